#pragma once

#include <cstdint>
#include <vector>

#include "irsdp/geometry.hpp"
#include "irsdp/rng.hpp"

namespace irsdp {

/// One small-scale fading draw: AP->panel vector g and per-user panel->user
/// vectors r_k. Entries are unit modulus in LoS-only mode.
struct ChannelRealization {
  CVec g;
  std::vector<CVec> r;
  std::uint64_t seed = 0;
};

/// Deterministic LoS channel at deployment point s; independent of any seed.
inline ChannelRealization los_channel(const NetworkGeometry& geo, const Vec3& s) {
  ChannelRealization out;
  const auto a_ai = compute_angles(s, geo.ap);
  out.g = array_response(a_ai.elevation, a_ai.azimuth, geo.panel_v, geo.panel_h,
                         geo.spacing_ratio());
  out.r.reserve(geo.users.size());
  for (const auto& u : geo.users) {
    const auto a_iu = compute_angles(s, u);
    out.r.push_back(array_response(a_iu.elevation, a_iu.azimuth, geo.panel_v, geo.panel_h,
                                   geo.spacing_ratio()));
  }
  return out;
}

/// Rician draw: sqrt(b/(1+b)) * LoS + sqrt(1/(1+b)) * CN(0, I).
/// Pure function of (geometry, s, rician, seed).
inline ChannelRealization sample_channel(const NetworkGeometry& geo, const Vec3& s,
                                         const RicianParams& rician, std::uint64_t seed) {
  ChannelRealization out = los_channel(geo, s);
  out.seed = seed;
  if (rician.los_only) return out;

  Rng rng(seed);
  const int m = geo.num_elements();
  {
    const double c_los = std::sqrt(rician.beta_ai / (1.0 + rician.beta_ai));
    const double c_nlos = std::sqrt(1.0 / (1.0 + rician.beta_ai));
    for (int i = 0; i < m; ++i) out.g[i] = c_los * out.g[i] + c_nlos * rng.complex_normal();
  }
  const double c_los = std::sqrt(rician.beta_iu / (1.0 + rician.beta_iu));
  const double c_nlos = std::sqrt(1.0 / (1.0 + rician.beta_iu));
  for (auto& rk : out.r)
    for (int i = 0; i < m; ++i) rk[i] = c_los * rk[i] + c_nlos * rng.complex_normal();
  return out;
}

/// Cascaded rows q_k = sqrt(L_k) * r_k^H diag(g), one matrix row per user, so
/// that the combined channel power gain of user k is |q_k v|^2.
inline CMat cascaded_channel(const ChannelRealization& ch, const Vec3& s,
                             const NetworkGeometry& geo, const PathLossModel& model) {
  const int k_users = static_cast<int>(ch.r.size());
  const int m = static_cast<int>(ch.g.size());
  CMat q(k_users, m);
  for (int k = 0; k < k_users; ++k) {
    const double root_loss = std::sqrt(path_loss(s, geo.ap, geo.users[k], model));
    for (int i = 0; i < m; ++i) q(k, i) = root_loss * std::conj(ch.r[k][i]) * ch.g[i];
  }
  return q;
}

/// Same rows without the path loss factor (used where the loss is tracked
/// separately as a function of s).
inline CMat cascaded_channel_unit_loss(const ChannelRealization& ch) {
  const int k_users = static_cast<int>(ch.r.size());
  const int m = static_cast<int>(ch.g.size());
  CMat q(k_users, m);
  for (int k = 0; k < k_users; ++k)
    for (int i = 0; i < m; ++i) q(k, i) = std::conj(ch.r[k][i]) * ch.g[i];
  return q;
}

}  // namespace irsdp
