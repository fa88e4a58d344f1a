#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "irsdp/common.hpp"

namespace irsdp {

/// Axis-aligned deployment region for the reflecting panel.
struct Region {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& s, double tol = 1e-9) const {
    for (int i = 0; i < 3; ++i)
      if (s[i] < lo[i] - tol || s[i] > hi[i] + tol) return false;
    return true;
  }
  void validate() const {
    for (int i = 0; i < 3; ++i)
      if (lo[i] > hi[i]) throw ConfigError("region bounds out of order");
  }
};

/// Static scene: access point, users, deployment region, and the panel.
struct NetworkGeometry {
  Vec3 ap = Vec3::Zero();
  std::vector<Vec3> users;
  Region region;
  int panel_v = 1;  // vertical element count
  int panel_h = 1;  // horizontal element count
  double element_spacing = 0.05;  // meters
  double wavelength = 0.1;        // meters

  int num_elements() const { return panel_v * panel_h; }
  int num_users() const { return static_cast<int>(users.size()); }
  double spacing_ratio() const { return element_spacing / wavelength; }

  void validate() const {
    if (panel_v < 1 || panel_h < 1) throw ConfigError("panel counts must be >= 1");
    if (element_spacing <= 0.0) throw ConfigError("element spacing must be positive");
    if (wavelength <= 0.0) throw ConfigError("wavelength must be positive");
    if (users.empty()) throw ConfigError("at least one user required");
    region.validate();
    if (!ap.allFinite()) throw ConfigError("non-finite AP position");
    for (const auto& u : users)
      if (!u.allFinite()) throw ConfigError("non-finite user position");
  }
};

/// Double-fading path loss parameters, linear scale.
struct PathLossModel {
  double rho0 = 1e-3;     // reference gain at 1 m
  double alpha_ai = 2.2;  // AP-panel exponent
  double alpha_iu = 2.2;  // panel-user exponent

  void validate() const {
    if (rho0 <= 0.0) throw ConfigError("rho0 must be positive");
    if (alpha_ai <= 0.0 || alpha_iu <= 0.0) throw ConfigError("path loss exponents must be positive");
  }
};

/// Linear Rician factors; los_only bypasses the fading entirely.
struct RicianParams {
  double beta_ai = 0.0;
  double beta_iu = 0.0;
  bool los_only = false;

  void validate() const {
    if (beta_ai < 0.0 || beta_iu < 0.0) throw ConfigError("Rician factors must be nonnegative");
  }
};

struct SteeringAngles {
  double elevation = 0.0;  // [-pi/2, pi/2]
  double azimuth = 0.0;    // [0, pi]
};

/// Elevation/azimuth of `target` as seen from the panel at `s`.
/// Elevation is arcsin(height difference over 3-D distance); azimuth is
/// arccos(x difference over horizontal distance).
inline SteeringAngles compute_angles(const Vec3& s, const Vec3& target) {
  const Vec3 d = target - s;
  const double dist = d.norm();
  if (dist <= 0.0) throw std::domain_error("coincident points: angles undefined");
  const double horiz = std::hypot(d[0], d[1]);
  if (horiz <= 0.0)
    throw std::domain_error("point directly above/below panel: azimuth undefined");
  SteeringAngles a;
  a.elevation = std::asin(std::clamp(d[2] / dist, -1.0, 1.0));
  a.azimuth = std::acos(std::clamp(d[0] / horiz, -1.0, 1.0));
  return a;
}

/// Planar-array response: Kronecker product of the vertical and horizontal
/// steering vectors. Every entry has unit modulus; length is Mv*Mh.
inline CVec array_response(double phi, double varphi, int mv, int mh, double spacing_ratio) {
  if (phi < -kPi / 2 - 1e-12 || phi > kPi / 2 + 1e-12)
    throw std::domain_error("elevation angle outside [-pi/2, pi/2]");
  if (varphi < -1e-12 || varphi > kPi + 1e-12)
    throw std::domain_error("azimuth angle outside [0, pi]");
  if (mv < 1 || mh < 1) throw std::invalid_argument("panel counts must be >= 1");

  const double w = 2.0 * kPi * spacing_ratio;
  const double sv = std::sin(phi) * std::cos(varphi);
  const double sh = std::sin(phi) * std::sin(varphi);

  CVec out(mv * mh);
  for (int i = 0; i < mv; ++i) {
    const Complex vi = std::polar(1.0, -w * i * sv);
    for (int l = 0; l < mh; ++l) {
      out[i * mh + l] = vi * std::polar(1.0, -w * l * sh);
    }
  }
  return out;
}

/// Product path loss of the cascaded AP-panel-user link.
inline double path_loss(const Vec3& s, const Vec3& ap, const Vec3& user, const PathLossModel& m) {
  const double d_ai = (s - ap).norm();
  const double d_iu = (s - user).norm();
  if (d_ai <= 0.0 || d_iu <= 0.0) throw std::domain_error("zero link distance");
  return (m.rho0 / std::pow(d_ai, m.alpha_ai)) * (m.rho0 / std::pow(d_iu, m.alpha_iu));
}

}  // namespace irsdp
