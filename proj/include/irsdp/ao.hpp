#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "irsdp/channel.hpp"
#include "irsdp/parallel.hpp"
#include "irsdp/rates.hpp"
#include "irsdp/smooth.hpp"
#include "irsdp/srocr.hpp"

namespace irsdp {

struct AoConfig {
  double delta = 0.05;    // local-region radius, meters; zero freezes deployment
  double eps_max = 0.01;  // angle-drift ratio bound for the local region
  std::vector<Vec3> starts;
  double xi = 1e-3;  // fractional WSR increase threshold
  int max_outer = 50;
  std::uint64_t seed = 2024;
  int workers = 1;
  SrocrOptions srocr;
  double smooth_tol = 1e-8;
  int rand_samples = 1000;

  void validate() const {
    if (starts.empty()) throw ConfigError("ao: at least one candidate start required");
    if (max_outer < 1) throw ConfigError("ao: max_outer must be >= 1");
    if (delta < 0.0) throw ConfigError("ao: delta must be nonnegative");
    for (const auto& s : starts)
      if (delta > eps_max * std::abs(s[1]) + 1e-12)
        throw ConfigError("ao: delta exceeds eps_max * y_s for a candidate start");
  }
};

/// Weight-then-distance decoding order: smaller weights decode earlier;
/// among equal weights, users farther from the initial deployment point
/// decode earlier. Exact ties keep index order.
inline DecodingOrder user_ordering(const VecX& weights, const Vec3& s0,
                                   const std::vector<Vec3>& users) {
  const int k = static_cast<int>(users.size());
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (weights[a] != weights[b]) return weights[a] < weights[b];
    const double da = (s0 - users[static_cast<std::size_t>(a)]).norm();
    const double db = (s0 - users[static_cast<std::size_t>(b)]).norm();
    return da > db;
  });
  DecodingOrder d;
  d.mu.resize(static_cast<std::size_t>(k));
  for (int pos = 0; pos < k; ++pos) d.mu[static_cast<std::size_t>(idx[static_cast<std::size_t>(pos)])] = pos;
  return d;
}

namespace detail {

inline VecX position_powers(const PowerAllocation& power, const std::vector<int>& by_pos) {
  VecX p(static_cast<Eigen::Index>(by_pos.size()));
  for (std::size_t t = 0; t < by_pos.size(); ++t) p[static_cast<Eigen::Index>(t)] = power.p[by_pos[t]];
  return p;
}

inline VecX cumulative_tails(const VecX& p_pos) {
  VecX beta(p_pos.size() + 1);
  beta[p_pos.size()] = 0.0;
  for (int t = static_cast<int>(p_pos.size()) - 1; t >= 0; --t) beta[t] = beta[t + 1] + p_pos[t];
  return beta;
}

}  // namespace detail

/// One pass of the SCA power subproblem: the difference-of-logs rate is
/// replaced by its concave lower bound at beta_prev and solved once.
/// Operates in decoding-position space; returns user-indexed powers.
inline PowerAllocation power_step_noma(const CMat& q, const CVec& v, const DecodingOrder& order,
                                       const VecX& weights, double p_max, double sigma2,
                                       const VecX& beta_prev_pos, double tol = 1e-8) {
  const int k = static_cast<int>(q.rows());
  const auto by_pos = order.users_by_position();
  VecX c(k), w(k);
  for (int t = 0; t < k; ++t) {
    c[t] = channel_gain(q, by_pos[static_cast<std::size_t>(t)], v) * p_max / sigma2;  // per unit beta-hat
    w[t] = weights[by_pos[static_cast<std::size_t>(t)]];
  }
  VecX beta_l = beta_prev_pos / p_max;

  SmoothConvexProblem prob;
  prob.n = k;
  prob.objective = [c, w, beta_l, k](const VecX& b, VecX* g, MatX* h) {
    const double l2 = std::log(2.0);
    if (g) g->setZero();
    if (h) h->setZero();
    double val = 0.0;
    for (int t = 0; t < k; ++t) {
      const double d = 1.0 + c[t] * b[t];
      val += w[t] * std::log2(d);
      if (g) (*g)[t] += w[t] * c[t] / (d * l2);
      if (h) (*h)(t, t) -= w[t] * c[t] * c[t] / (d * d * l2);
      if (t + 1 < k) {
        const double dl = 1.0 + c[t] * beta_l[t + 1];
        val -= w[t] * (std::log2(dl) + c[t] * (b[t + 1] - beta_l[t + 1]) / (dl * l2));
        if (g) (*g)[t + 1] -= w[t] * c[t] / (dl * l2);
      }
    }
    return val;
  };
  // p_t - p_{t+1} >= p_{t+1} - p_{t+2}, i.e. second differences of beta
  for (int t = 0; t + 1 < k; ++t) {
    prob.constraints.push_back([t, k](const VecX& b, VecX* g, MatX* h) {
      if (g) g->setZero();
      if (h) h->setZero();
      const double b2 = t + 2 < k ? b[t + 2] : 0.0;
      if (g) {
        (*g)[t] = -1.0;
        (*g)[t + 1] = 2.0;
        if (t + 2 < k) (*g)[t + 2] = -1.0;
      }
      return -(b[t] - 2.0 * b[t + 1] + b2);
    });
  }
  prob.lower = VecX::Zero(k);
  prob.upper = VecX::Constant(k, 1.0);

  // strictly interior start: geometric power profile
  VecX start(k);
  {
    const double ratio = 0.45;
    double norm = 0.0, cur = 1.0;
    for (int t = 0; t < k; ++t, cur *= ratio) norm += cur;
    VecX p(k);
    cur = 1.0;
    for (int t = 0; t < k; ++t, cur *= ratio) p[t] = 0.9 * cur / norm;
    start = detail::cumulative_tails(p).head(k);
  }
  prob.start = start;

  auto sol = solve_smooth(prob, tol);
  PowerAllocation out;
  out.p_max = p_max;
  out.p = VecX::Zero(k);
  for (int t = 0; t < k; ++t) {
    const double next = t + 1 < k ? sol.x[t + 1] : 0.0;
    out.p[by_pos[static_cast<std::size_t>(t)]] = std::max(sol.x[t] - next, 0.0) * p_max;
  }
  return out;
}

/// FDMA power allocation: directly concave, solved without any surrogate.
inline PowerAllocation power_step_fdma(const CMat& q, const CVec& v, const VecX& weights,
                                       double p_max, double sigma2, double tol = 1e-8) {
  const int k = static_cast<int>(q.rows());
  VecX c(k);
  for (int i = 0; i < k; ++i) c[i] = channel_gain(q, i, v) * k * p_max / sigma2;

  SmoothConvexProblem prob;
  prob.n = k;
  prob.objective = [c, weights, k](const VecX& p, VecX* g, MatX* h) {
    const double l2 = std::log(2.0);
    if (g) g->setZero();
    if (h) h->setZero();
    double val = 0.0;
    for (int i = 0; i < k; ++i) {
      const double d = 1.0 + c[i] * p[i];
      val += weights[i] / k * std::log2(d);
      if (g) (*g)[i] = weights[i] / k * c[i] / (d * l2);
      if (h) (*h)(i, i) = -weights[i] / k * c[i] * c[i] / (d * d * l2);
    }
    return val;
  };
  prob.constraints.push_back([k](const VecX& p, VecX* g, MatX* h) {
    if (g) *g = VecX::Ones(k);
    if (h) h->setZero();
    return p.sum() - 1.0;
  });
  prob.lower = VecX::Zero(k);
  prob.upper = VecX::Constant(k, 1.0);
  prob.start = VecX::Constant(k, 0.9 / k);
  auto sol = solve_smooth(prob, tol);
  return PowerAllocation{sol.x * p_max, p_max};
}

struct ReflectionResult {
  CVec v;
  CMat v_lifted;
  bool converged = true;
};

/// SROCR reflection design for NOMA: concave-log objective with the second
/// log linearized at the previous lifted point, gain-ordering rows, unit
/// diagonal, and the relaxed rank-one row.
inline ReflectionResult reflection_step_noma(const CMat& q, const PowerAllocation& power,
                                             const DecodingOrder& order, const VecX& weights,
                                             const CMat& v_lifted_prev, double sigma2,
                                             const SrocrOptions& srocr_opts, std::uint64_t seed,
                                             int rand_samples = 1000) {
  const int k = static_cast<int>(q.rows());
  const int m = static_cast<int>(q.cols());
  const auto by_pos = order.users_by_position();
  const VecX p_pos = detail::position_powers(power, by_pos);
  const VecX beta = detail::cumulative_tails(p_pos);

  double chi2 = 1e-300;
  for (int i = 0; i < k; ++i) chi2 = std::max(chi2, q.row(i).squaredNorm());
  std::vector<CMat> q_hat;
  for (int t = 0; t < k; ++t) {
    const CVec row = q.row(by_pos[static_cast<std::size_t>(t)]).transpose() / std::sqrt(chi2);
    q_hat.push_back(row.conjugate() * row.transpose());
  }
  VecX w_pos(k);
  for (int t = 0; t < k; ++t) w_pos[t] = weights[by_pos[static_cast<std::size_t>(t)]];

  // interference logs are linearized at the outer-iteration lifted point and
  // stay fixed while the rank relaxation tightens
  VecX slope(k);
  for (int t = 0; t < k; ++t) {
    slope[t] = 0.0;
    if (t + 1 < k && beta[t + 1] > 0.0 && w_pos[t] > 0.0) {
      const double tr_prev =
          std::real((q_hat[static_cast<std::size_t>(t)] * v_lifted_prev).trace()) * chi2;
      slope[t] =
          w_pos[t] * beta[t + 1] / std::log(2.0) / (sigma2 + tr_prev * beta[t + 1]) * chi2;
    }
  }

  LiftedBuilder builder = [=](double omega, const CMat& v_prev) {
    LiftedProblem lp;
    lp.dim = m;
    lp.v_block = lp.prog.add_psd_block(2 * m);
    add_diag_one_rows(lp.prog, lp.v_block, m);
    for (int t = 0; t < k; ++t) {
      // log2(sigma2 + Tr(V Q_t) beta_t) through an auxiliary coordinate
      const double coef = chi2 * beta[t] / sigma2;
      if (coef > 0.0 && w_pos[t] > 0.0) {
        const int y = lp.prog.add_scalar(false);
        lp.prog.add_log_term(y, w_pos[t] / std::log(2.0), 1.0);
        lp.prog.begin_row(0.0);
        lp.prog.row_coeff(y, 1.0);
        row_trace(lp.prog, lp.v_block, q_hat[static_cast<std::size_t>(t)], -coef);
        lp.prog.end_row_eq();
      }
      if (slope[t] != 0.0)
        objective_trace(lp.prog, lp.v_block, q_hat[static_cast<std::size_t>(t)], -slope[t]);
      // gains non-decreasing along decoding positions
      if (t + 1 < k) {
        lp.prog.begin_row(0.0);
        row_trace(lp.prog, lp.v_block, q_hat[static_cast<std::size_t>(t)], 1.0);
        row_trace(lp.prog, lp.v_block, q_hat[static_cast<std::size_t>(t + 1)], -1.0);
        lp.prog.end_row_le();
      }
    }
    add_srocr_row(lp.prog, lp.v_block, m, omega, v_prev);
    return lp;
  };

  SrocrResult sr = srocr_solve(builder, v_lifted_prev, srocr_opts);
  ReflectionResult out;
  out.converged = sr.converged;
  out.v_lifted = sr.v_lifted;
  auto evaluate = [&](const CVec& v) {
    return wsr(weights, noma_rates(q, v, power, order, sigma2));
  };
  try {
    out.v = extract_rank_one(sr.v_lifted);
  } catch (const RankOneError&) {
    const auto top = largest_eigpair(sr.v_lifted);
    CVec cand(m);
    for (int i = 0; i < m; ++i) {
      const double a = std::abs(top.vector[i]);
      cand[i] = a > 0 ? top.vector[i] / a : Complex(1, 0);
    }
    const CVec rnd = gaussian_randomization(sr.v_lifted, rand_samples, evaluate, seed);
    out.v = evaluate(cand) >= evaluate(rnd) ? cand : rnd;
  }
  return out;
}

/// SROCR reflection design for FDMA: one shared vector, no ordering rows.
inline ReflectionResult reflection_step_fdma(const CMat& q, const PowerAllocation& power,
                                             const VecX& weights, const CMat& v_lifted_prev,
                                             double sigma2, const SrocrOptions& srocr_opts,
                                             std::uint64_t seed, int rand_samples = 1000) {
  const int k = static_cast<int>(q.rows());
  const int m = static_cast<int>(q.cols());
  double chi2 = 1e-300;
  for (int i = 0; i < k; ++i) chi2 = std::max(chi2, q.row(i).squaredNorm());
  std::vector<CMat> q_hat;
  for (int i = 0; i < k; ++i) {
    const CVec row = q.row(i).transpose() / std::sqrt(chi2);
    q_hat.push_back(row.conjugate() * row.transpose());
  }

  LiftedBuilder builder = [=](double omega, const CMat& v_prev) {
    LiftedProblem lp;
    lp.dim = m;
    lp.v_block = lp.prog.add_psd_block(2 * m);
    add_diag_one_rows(lp.prog, lp.v_block, m);
    for (int i = 0; i < k; ++i) {
      const double coef = chi2 * power.p[i] * k / sigma2;
      if (coef <= 0.0 || weights[i] <= 0.0) continue;
      const int y = lp.prog.add_scalar(false);
      lp.prog.add_log_term(y, weights[i] / k / std::log(2.0), 1.0);
      lp.prog.begin_row(0.0);
      lp.prog.row_coeff(y, 1.0);
      row_trace(lp.prog, lp.v_block, q_hat[static_cast<std::size_t>(i)], -coef);
      lp.prog.end_row_eq();
    }
    add_srocr_row(lp.prog, lp.v_block, m, omega, v_prev);
    return lp;
  };

  SrocrResult sr = srocr_solve(builder, v_lifted_prev, srocr_opts);
  ReflectionResult out;
  out.converged = sr.converged;
  out.v_lifted = sr.v_lifted;
  auto evaluate = [&](const CVec& v) { return wsr(weights, fdma_rates(q, v, power, sigma2)); };
  try {
    out.v = extract_rank_one(sr.v_lifted);
  } catch (const RankOneError&) {
    const auto top = largest_eigpair(sr.v_lifted);
    CVec cand(m);
    for (int i = 0; i < m; ++i) {
      const double a = std::abs(top.vector[i]);
      cand[i] = a > 0 ? top.vector[i] / a : Complex(1, 0);
    }
    const CVec rnd = gaussian_randomization(sr.v_lifted, rand_samples, evaluate, seed);
    out.v = evaluate(cand) >= evaluate(rnd) ? cand : rnd;
  }
  return out;
}

struct DeploymentInputs {
  Scheme scheme = Scheme::noma;
  std::vector<double> cbar;  // frozen array gains |qbar v|^2, decoding-position order
  VecX p_pos;                // powers in position order (TDMA: p_max per slot)
  VecX w_pos;                // weights in position order
  std::vector<Vec3> users_pos;
  Vec3 ap = Vec3::Zero();
  Region region;
  PathLossModel model;
  double sigma2 = 1.0;
  double delta = 0.05;
};

/// Local-region deployment update. Auxiliary distance powers are normalized
/// by their values at s_prev; the bilinear product constraint keeps the SCA
/// set inside the true one, so any accepted move stays feasible. Returns
/// s_prev when the local region is infeasible for the ordering rows.
inline Vec3 deployment_step(const DeploymentInputs& in, const Vec3& s_prev,
                            SolverReport* report = nullptr, double tol = 1e-8) {
  const int k = static_cast<int>(in.users_pos.size());
  if (in.delta <= 0.0) return s_prev;

  const double a_ai = in.model.alpha_ai, a_iu = in.model.alpha_iu;
  const double phi_l = std::pow((s_prev - in.ap).norm(), a_ai);
  VecX ups_l(k), tau_l(k);
  for (int t = 0; t < k; ++t) {
    ups_l[t] = std::pow((s_prev - in.users_pos[static_cast<std::size_t>(t)]).norm(), a_iu);
    tau_l[t] = phi_l * ups_l[t] / (in.model.rho0 * in.model.rho0);
  }

  // rate surrogate slopes in tau: R(tau) = w log2(1 + A/(B tau + C))
  VecX slope(k), const_part(k);
  for (int t = 0; t < k; ++t) {
    double interference = 0.0;
    if (in.scheme == Scheme::noma)
      for (int tt = t + 1; tt < k; ++tt)
        interference += in.cbar[static_cast<std::size_t>(t)] * in.p_pos[tt];
    const double a = in.cbar[static_cast<std::size_t>(t)] * in.p_pos[t];
    const double b = in.scheme == Scheme::fdma ? in.sigma2 / k : in.sigma2;
    const double cc = interference;
    const double w = in.scheme == Scheme::noma ? in.w_pos[t] : in.w_pos[t] / k;
    const double den = b * tau_l[t] + cc;
    const_part[t] = w * std::log2(1.0 + a / std::max(den, 1e-300));
    slope[t] = -w * a * b / (std::log(2.0) * den * (den + a));
  }

  const int n = 4 + 2 * k;  // s, phi_hat, ups_hat, tau_hat
  SmoothConvexProblem prob;
  prob.n = n;
  prob.lower = VecX::Constant(n, 1e-6);
  prob.upper = VecX::Constant(n, 8.0);
  prob.lower.head(3) = in.region.lo;
  prob.upper.head(3) = in.region.hi;

  const VecX tau_scale = tau_l;
  prob.objective = [slope, const_part, tau_scale, k](const VecX& x, VecX* g, MatX* h) {
    if (g) g->setZero();
    if (h) h->setZero();
    double val = 0.0;
    for (int t = 0; t < k; ++t) {
      val += const_part[t] + slope[t] * tau_scale[t] * (x[4 + k + t] - 1.0);
      if (g) (*g)[4 + k + t] = slope[t] * tau_scale[t];
    }
    return val;
  };

  // local region ball
  prob.constraints.push_back([s_prev, delta = in.delta](const VecX& x, VecX* g, MatX* h) {
    if (g) g->setZero();
    if (h) h->setZero();
    double v = -delta * delta;
    for (int a = 0; a < 3; ++a) {
      const double d = x[a] - s_prev[a];
      v += d * d;
      if (g) (*g)[a] = 2.0 * d;
      if (h) (*h)(a, a) = 2.0;
    }
    return v;
  });
  // ||s - point||^2 <= (scale * xhat)^(2/alpha) definitions
  auto add_power_def = [&](const Vec3& point, double scale, int coord, double alpha) {
    const double e = 2.0 / alpha;
    prob.constraints.push_back([point, scale, coord, e](const VecX& x, VecX* g, MatX* h) {
      if (g) g->setZero();
      if (h) h->setZero();
      const double ph = std::max(x[coord], 1e-12);
      const double rhs = std::pow(scale, e) * std::pow(ph, e);
      double v = -rhs;
      for (int a = 0; a < 3; ++a) {
        const double d = x[a] - point[a];
        v += d * d;
        if (g) (*g)[a] = 2.0 * d;
        if (h) (*h)(a, a) = 2.0;
      }
      if (g) (*g)[coord] = -std::pow(scale, e) * e * std::pow(ph, e - 1.0);
      if (h) (*h)(coord, coord) = -std::pow(scale, e) * e * (e - 1.0) * std::pow(ph, e - 2.0);
      return v;
    });
  };
  add_power_def(in.ap, phi_l, 3, a_ai);
  for (int t = 0; t < k; ++t)
    add_power_def(in.users_pos[static_cast<std::size_t>(t)], ups_l[t], 4 + t, a_iu);

  // bilinear tau link through the square-difference surrogate
  const double rho2 = in.model.rho0 * in.model.rho0;
  for (int t = 0; t < k; ++t) {
    prob.constraints.push_back(
        [phi_l, ul = ups_l[t], tl = tau_l[t], rho2, t, k](const VecX& x, VecX* g, MatX* h) {
          if (g) g->setZero();
          if (h) h->setZero();
          const double phi = phi_l * x[3];
          const double ups = ul * x[4 + t];
          const double sum = phi + ups;
          const double v = 0.5 * sum * sum - phi_l * phi_l * (x[3] - 0.5) -
                           ul * ul * (x[4 + t] - 0.5) - rho2 * tl * x[4 + k + t];
          if (g) {
            (*g)[3] = sum * phi_l - phi_l * phi_l;
            (*g)[4 + t] = sum * ul - ul * ul;
            (*g)[4 + k + t] = -rho2 * tl;
          }
          if (h) {
            (*h)(3, 3) = phi_l * phi_l;
            (*h)(3, 4 + t) = (*h)(4 + t, 3) = phi_l * ul;
            (*h)(4 + t, 4 + t) = ul * ul;
          }
          return v;
        });
  }

  // decoding-order rows for NOMA: linearized-farness of earlier users
  if (in.scheme == Scheme::noma) {
    for (int later = 0; later < k; ++later) {
      for (int earlier = 0; earlier < later; ++earlier) {
        const double ck = in.cbar[static_cast<std::size_t>(later)];
        const double cj = in.cbar[static_cast<std::size_t>(earlier)];
        if (ck <= 1e-300) continue;
        const double ratio = std::pow(cj / ck, 2.0 / a_iu);
        const Vec3 uj = in.users_pos[static_cast<std::size_t>(earlier)];
        const Vec3 uk = in.users_pos[static_cast<std::size_t>(later)];
        const double base = (s_prev - uj).squaredNorm();
        auto row = [ratio, uj, uk, base, s_prev](const VecX& x, VecX* g, MatX* h) {
          if (g) g->setZero();
          if (h) h->setZero();
          double v = -base;
          for (int a = 0; a < 3; ++a) {
            const double dk = x[a] - uk[a];
            v += ratio * dk * dk - 2.0 * (s_prev[a] - uj[a]) * (x[a] - s_prev[a]);
            if (g) (*g)[a] = 2.0 * ratio * dk - 2.0 * (s_prev[a] - uj[a]);
            if (h) (*h)(a, a) = 2.0 * ratio;
          }
          return v;
        };
        // keep the start strictly feasible under rank-one extraction noise
        VecX probe(n);
        probe.head(3) = s_prev;
        probe.tail(n - 3).setOnes();
        const double at_start = row(probe, nullptr, nullptr);
        const double scale = std::max(1.0, base);
        if (at_start > 1e-3 * scale) {
          if (report) report->status = SolveStatus::infeasible;
          return s_prev;  // ordering cannot hold in this local region
        }
        const double shift = std::max(0.0, at_start) + 1e-9 * scale;
        prob.constraints.push_back([row, shift](const VecX& x, VecX* g, MatX* h) {
          return row(x, g, h) - shift;
        });
      }
    }
  }

  // strictly interior start near s_prev
  VecX start(n);
  Vec3 s0 = s_prev;
  for (int a = 0; a < 3; ++a) {
    const double lo = in.region.lo[a], hi = in.region.hi[a];
    if (hi > lo) {
      const double nudge = std::min(in.delta / 10.0, (hi - lo) / 1000.0);
      s0[a] = std::clamp(s0[a], lo + nudge, hi - nudge);
    }
  }
  start.head(3) = s0;
  start[3] = std::pow((s0 - in.ap).norm(), a_ai) / phi_l * (1.0 + 1e-4);
  for (int t = 0; t < k; ++t)
    start[4 + t] =
        std::pow((s0 - in.users_pos[static_cast<std::size_t>(t)]).norm(), a_iu) / ups_l[t] * (1.0 + 1e-4);
  for (int t = 0; t < k; ++t) start[4 + k + t] = start[3] * start[4 + t] * (1.0 + 1e-3);
  prob.start = start;

  auto sol = solve_smooth(prob, tol);
  if (report) *report = sol.report;
  if (sol.report.status == SolveStatus::infeasible) return s_prev;
  Vec3 s_new = sol.x.head(3);
  if (!in.region.contains(s_new)) return s_prev;
  if ((s_new - s_prev).norm() > in.delta + 1e-9) return s_prev;
  return s_new;
}

using ChannelFn = std::function<ChannelRealization(const Vec3&)>;

struct AoRun {
  SolutionBundle bundle;
  std::vector<double> trace;  // WSR after each outer iteration (index 0 = initial)
  bool converged = false;
  int iterations = 0;
};

struct AoResult {
  SolutionBundle best;
  std::vector<AoRun> runs;  // one per start
  int best_start = -1;
};

namespace detail {

inline double evaluate_wsr(Scheme scheme, const CMat& q, const ReflectionDesign& design,
                           const PowerAllocation& power, const DecodingOrder& order,
                           const VecX& weights, double sigma2, double p_max, VecX* rates_out) {
  VecX rates;
  switch (scheme) {
    case Scheme::noma: rates = noma_rates(q, design.v, power, order, sigma2); break;
    case Scheme::fdma: rates = fdma_rates(q, design.v, power, sigma2); break;
    case Scheme::tdma: rates = tdma_rates(q, design.per_user, p_max, sigma2); break;
  }
  if (rates_out) *rates_out = rates;
  return wsr(weights, rates);
}

inline AoRun ao_single_start(Scheme scheme, const NetworkGeometry& geo, const PathLossModel& model,
                             const VecX& weights, double p_max, double sigma2,
                             const AoConfig& cfg, const ChannelFn& channels, const Vec3& s0,
                             std::uint64_t run_seed, const DecodingOrder* order_override) {
  const int k = geo.num_users();
  const int m = geo.num_elements();
  AoRun run;

  Vec3 s = s0;
  DecodingOrder order = order_override ? *order_override
                        : scheme == Scheme::noma ? user_ordering(weights, s0, geo.users)
                                                 : DecodingOrder::identity(k);
  ChannelRealization ch = channels(s);
  CMat q = cascaded_channel(ch, s, geo, model);

  ReflectionDesign design;
  Rng rng(run_seed);
  if (scheme == Scheme::tdma) {
    design.per_user.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) design.per_user.push_back(matched_phases(q.row(i)));
    design.v = design.per_user[0];
  } else {
    design.v = CVec(m);
    for (int i = 0; i < m; ++i) design.v[i] = std::polar(1.0, rng.uniform(0.0, 2.0 * kPi));
  }
  PowerAllocation power{VecX::Constant(k, p_max / k), p_max};
  if (scheme == Scheme::tdma) power.p.setConstant(p_max);

  CMat v_lift = scheme == Scheme::tdma ? CMat() : CMat(design.v * design.v.adjoint());
  VecX rates;
  double cur = evaluate_wsr(scheme, q, design, power, order, weights, sigma2, p_max, &rates);
  run.trace.push_back(cur);

  const auto by_pos = order.users_by_position();
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    const double before = cur;

    if (scheme == Scheme::noma) {
      const VecX beta_prev = cumulative_tails(position_powers(power, by_pos));
      power = power_step_noma(q, design.v, order, weights, p_max, sigma2, beta_prev.head(k),
                              cfg.smooth_tol);
      cur = evaluate_wsr(scheme, q, design, power, order, weights, sigma2, p_max, &rates);
    } else if (scheme == Scheme::fdma) {
      power = power_step_fdma(q, design.v, weights, p_max, sigma2, cfg.smooth_tol);
      cur = evaluate_wsr(scheme, q, design, power, order, weights, sigma2, p_max, &rates);
    }

    if (scheme != Scheme::tdma) {
      ReflectionResult refl =
          scheme == Scheme::noma
              ? reflection_step_noma(q, power, order, weights, v_lift, sigma2, cfg.srocr,
                                     derive_seed(run_seed, 1000 + static_cast<std::uint64_t>(outer)),
                                     cfg.rand_samples)
              : reflection_step_fdma(q, power, weights, v_lift, sigma2, cfg.srocr,
                                     derive_seed(run_seed, 1000 + static_cast<std::uint64_t>(outer)),
                                     cfg.rand_samples);
      ReflectionDesign cand_design = design;
      cand_design.v = refl.v;
      const double cand =
          evaluate_wsr(scheme, q, cand_design, power, order, weights, sigma2, p_max, nullptr);
      if (cand >= cur - 1e-12) {  // keep the trace monotone under extraction noise
        design = cand_design;
        v_lift = refl.v_lifted;
        cur = evaluate_wsr(scheme, q, design, power, order, weights, sigma2, p_max, &rates);
      }
    }

    if (cfg.delta > 0.0) {
      const CMat qbar = cascaded_channel_unit_loss(ch);
      DeploymentInputs din;
      din.scheme = scheme;
      din.cbar.resize(static_cast<std::size_t>(k));
      din.p_pos = VecX(k);
      din.w_pos = VecX(k);
      din.users_pos.resize(static_cast<std::size_t>(k));
      for (int t = 0; t < k; ++t) {
        const int user = by_pos[static_cast<std::size_t>(t)];
        din.cbar[static_cast<std::size_t>(t)] =
            scheme == Scheme::tdma ? l1_sq(qbar.row(user))
                                   : channel_gain(qbar, user, design.v);
        din.p_pos[t] = scheme == Scheme::tdma ? p_max : power.p[user];
        din.w_pos[t] = weights[user];
        din.users_pos[static_cast<std::size_t>(t)] = geo.users[static_cast<std::size_t>(user)];
      }
      din.ap = geo.ap;
      din.region = geo.region;
      din.model = model;
      din.sigma2 = sigma2;
      din.delta = cfg.delta;
      const Vec3 s_new = deployment_step(din, s, nullptr, cfg.smooth_tol);
      if ((s_new - s).norm() > 1e-12) {
        ChannelRealization ch_new = channels(s_new);
        CMat q_new = cascaded_channel(ch_new, s_new, geo, model);
        ReflectionDesign cand_design = design;
        if (scheme == Scheme::tdma) {
          for (int i = 0; i < k; ++i) cand_design.per_user[static_cast<std::size_t>(i)] = matched_phases(q_new.row(i));
          cand_design.v = cand_design.per_user[0];
        }
        const double cand =
            evaluate_wsr(scheme, q_new, cand_design, power, order, weights, sigma2, p_max, nullptr);
        if (cand >= cur - 1e-12) {  // frozen-gain drift must not break monotonicity
          s = s_new;
          ch = std::move(ch_new);
          q = std::move(q_new);
          design = cand_design;
          cur = evaluate_wsr(scheme, q, design, power, order, weights, sigma2, p_max, &rates);
        }
      }
    } else if (scheme == Scheme::tdma) {
      // nothing moves without deployment; the closed form is already optimal
      run.trace.push_back(cur);
      run.converged = true;
      run.iterations = outer + 1;
      break;
    }

    run.trace.push_back(cur);
    run.iterations = outer + 1;
    if (cur - before <= cfg.xi * std::max(before, 1e-12)) {
      run.converged = true;
      break;
    }
  }

  run.bundle.s = s;
  run.bundle.design = design;
  run.bundle.power = power;
  run.bundle.order = order;
  run.bundle.per_user_rates = rates;
  run.bundle.wsr = cur;
  return run;
}

}  // namespace detail

/// Alternating optimization over all candidate starts; the best WSR wins.
inline AoResult ao_solve(Scheme scheme, const NetworkGeometry& geo, const PathLossModel& model,
                         const VecX& weights, double p_max, double sigma2, const AoConfig& cfg,
                         const ChannelFn& channels_in = nullptr,
                         const DecodingOrder* order_override = nullptr) {
  cfg.validate();
  const ChannelFn channels =
      channels_in ? channels_in : ChannelFn([&geo](const Vec3& s) { return los_channel(geo, s); });
  AoResult res;
  res.runs.resize(cfg.starts.size());
  parallel_map(static_cast<int>(cfg.starts.size()), cfg.workers, [&](int i) {
    res.runs[static_cast<std::size_t>(i)] = detail::ao_single_start(
        scheme, geo, model, weights, p_max, sigma2, cfg, channels, cfg.starts[static_cast<std::size_t>(i)],
        derive_seed(cfg.seed, static_cast<std::uint64_t>(i)), order_override);
  });
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    if (res.best_start < 0 || res.runs[i].bundle.wsr > res.best.wsr) {
      res.best = res.runs[i].bundle;
      res.best_start = static_cast<int>(i);
    }
  }
  return res;
}

inline AoResult ao_noma(const NetworkGeometry& geo, const PathLossModel& model, const VecX& weights,
                        double p_max, double sigma2, const AoConfig& cfg,
                        const ChannelFn& channels = nullptr,
                        const DecodingOrder* order_override = nullptr) {
  return ao_solve(Scheme::noma, geo, model, weights, p_max, sigma2, cfg, channels, order_override);
}

inline AoResult ao_fdma(const NetworkGeometry& geo, const PathLossModel& model, const VecX& weights,
                        double p_max, double sigma2, const AoConfig& cfg,
                        const ChannelFn& channels = nullptr) {
  return ao_solve(Scheme::fdma, geo, model, weights, p_max, sigma2, cfg, channels);
}

inline AoResult ao_tdma(const NetworkGeometry& geo, const PathLossModel& model, const VecX& weights,
                        double p_max, double sigma2, const AoConfig& cfg,
                        const ChannelFn& channels = nullptr) {
  return ao_solve(Scheme::tdma, geo, model, weights, p_max, sigma2, cfg, channels);
}

}  // namespace irsdp
