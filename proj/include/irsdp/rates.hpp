#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "irsdp/common.hpp"

namespace irsdp {

enum class Scheme { noma, fdma, tdma };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::noma: return "noma";
    case Scheme::fdma: return "fdma";
    default: return "tdma";
  }
}

/// Reflection coefficients. `v` is the common vector; `per_user` is set in
/// TDMA mode where each slot gets its own vector.
struct ReflectionDesign {
  CVec v;
  std::vector<CVec> per_user;

  bool tdma_mode() const { return !per_user.empty(); }

  /// Largest deviation of any entry modulus from 1.
  double unit_modulus_error() const {
    double err = 0.0;
    auto scan = [&err](const CVec& x) {
      for (int i = 0; i < x.size(); ++i) err = std::max(err, std::abs(std::abs(x[i]) - 1.0));
    };
    if (v.size() > 0) scan(v);
    for (const auto& vk : per_user) scan(vk);
    return err;
  }
};

struct PowerAllocation {
  VecX p;
  double p_max = 0.0;

  double total() const { return p.sum(); }
  bool feasible(double tol = 1e-9) const {
    return p.minCoeff() >= -tol && total() <= p_max + tol;
  }
};

/// mu[k] is the decoding position of user k (0-based). Higher position means
/// decoded later, i.e. stronger channel under SIC.
struct DecodingOrder {
  std::vector<int> mu;

  int num_users() const { return static_cast<int>(mu.size()); }

  static DecodingOrder identity(int k) {
    DecodingOrder d;
    d.mu.resize(k);
    std::iota(d.mu.begin(), d.mu.end(), 0);
    return d;
  }

  /// users_by_position()[t] = user decoded at position t.
  std::vector<int> users_by_position() const {
    std::vector<int> inv(mu.size());
    for (std::size_t k = 0; k < mu.size(); ++k) inv[static_cast<std::size_t>(mu[k])] = static_cast<int>(k);
    return inv;
  }

  bool valid() const {
    std::vector<bool> seen(mu.size(), false);
    for (int m : mu) {
      if (m < 0 || m >= num_users() || seen[static_cast<std::size_t>(m)]) return false;
      seen[static_cast<std::size_t>(m)] = true;
    }
    return true;
  }
};

struct SolutionBundle {
  Vec3 s = Vec3::Zero();
  ReflectionDesign design;
  PowerAllocation power;
  DecodingOrder order;
  VecX per_user_rates;
  double wsr = 0.0;
};

inline double channel_gain(const CMat& q, int k, const CVec& v) {
  return std::norm((q.row(k) * v).value());
}

/// SIC rates: user k sees interference from every user decoded after it.
inline VecX noma_rates(const CMat& q, const CVec& v, const PowerAllocation& power,
                       const DecodingOrder& order, double sigma2) {
  const int k_users = static_cast<int>(q.rows());
  VecX rates(k_users);
  for (int k = 0; k < k_users; ++k) {
    double interf = 0.0;
    for (int i = 0; i < k_users; ++i)
      if (order.mu[static_cast<std::size_t>(i)] > order.mu[static_cast<std::size_t>(k)]) interf += power.p[i];
    const double c = channel_gain(q, k, v);
    rates[k] = std::log2(1.0 + c * power.p[k] / (c * interf + sigma2));
  }
  return rates;
}

/// Equal frequency split; per-band noise sigma2/K.
inline VecX fdma_rates(const CMat& q, const CVec& v, const PowerAllocation& power, double sigma2) {
  const int k_users = static_cast<int>(q.rows());
  VecX rates(k_users);
  for (int k = 0; k < k_users; ++k) {
    const double c = channel_gain(q, k, v);
    rates[k] = std::log2(1.0 + c * power.p[k] / (sigma2 / k_users)) / k_users;
  }
  return rates;
}

/// Equal time slots, full power per slot, per-user reflection vectors.
inline VecX tdma_rates(const CMat& q, const std::vector<CVec>& per_user_v, double p_max,
                       double sigma2) {
  const int k_users = static_cast<int>(q.rows());
  VecX rates(k_users);
  for (int k = 0; k < k_users; ++k) {
    const double c = channel_gain(q, k, per_user_v[static_cast<std::size_t>(k)]);
    rates[k] = std::log2(1.0 + c * p_max / sigma2) / k_users;
  }
  return rates;
}

struct OrderViolation {
  enum class Kind { gain, power } kind;
  int user_k = -1;  // decoded later
  int user_j = -1;  // decoded earlier
  double deficit = 0.0;

  std::string describe() const {
    return std::string(kind == Kind::gain ? "gain" : "power") + " ordering violated for users (" +
           std::to_string(user_k) + "," + std::to_string(user_j) + "), deficit " +
           std::to_string(deficit);
  }
};

/// SIC decodability: whenever mu(k) > mu(j), user k must have the stronger
/// combined gain and the smaller power. Returns the first violated pair.
inline std::optional<OrderViolation> validate_noma(const CMat& q, const CVec& v,
                                                   const PowerAllocation& power,
                                                   const DecodingOrder& order,
                                                   double tol = 1e-9) {
  const int k_users = static_cast<int>(q.rows());
  VecX gain(k_users);
  for (int k = 0; k < k_users; ++k) gain[k] = channel_gain(q, k, v);
  for (int k = 0; k < k_users; ++k) {
    for (int j = 0; j < k_users; ++j) {
      if (order.mu[static_cast<std::size_t>(k)] <= order.mu[static_cast<std::size_t>(j)]) continue;
      if (gain[k] < gain[j] - tol)
        return OrderViolation{OrderViolation::Kind::gain, k, j, gain[j] - gain[k]};
      if (power.p[k] > power.p[j] + tol)
        return OrderViolation{OrderViolation::Kind::power, k, j, power.p[k] - power.p[j]};
    }
  }
  return std::nullopt;
}

inline double wsr(const VecX& weights, const VecX& rates) { return weights.dot(rates); }

}  // namespace irsdp
