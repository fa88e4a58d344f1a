#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "irsdp/ao.hpp"
#include "irsdp/geometry.hpp"
#include "irsdp/polyblock.hpp"

namespace irsdp {

enum class SolverKind { ao, mo_bound, exhaustive };

inline const char* to_string(SolverKind s) {
  switch (s) {
    case SolverKind::ao: return "ao";
    case SolverKind::mo_bound: return "mo-bound";
    default: return "exhaustive";
  }
}

struct MoConfig {
  double eps = 1e-2;
  double bisect_eps = 1e-4;
  int max_iters = 500;
  double grid_step = 0.5;
};

struct SweepConfig {
  std::string param;  // one of: M, p_max_dbm, x_grid
  std::vector<double> values;
};

/// Everything one experiment needs, with defaults mirroring the reference
/// simulation setup. dB-scale inputs are converted to linear once, here.
struct ExperimentConfig {
  NetworkGeometry geometry;
  PathLossModel model;
  RicianParams rician;
  Scheme scheme = Scheme::noma;
  SolverKind solver = SolverKind::ao;
  VecX weights;
  double p_max_dbm = 30.0;
  double sigma2_dbm = -90.0;
  int realizations = 100;
  std::uint64_t seed = 1;
  int workers = 1;
  AoConfig ao;
  MoConfig mo;
  SweepConfig sweep;

  double p_max_watts() const { return dbm_to_watts(p_max_dbm); }
  double sigma2_watts() const { return dbm_to_watts(sigma2_dbm); }

  static ExperimentConfig defaults(int users = 4, int elements = 20) {
    ExperimentConfig c;
    c.geometry.ap = Vec3(0, 0, 5);
    for (int k = 1; k <= users; ++k) c.geometry.users.push_back(Vec3(25 + 5 * k, 0, 1.5));
    c.geometry.region.lo = Vec3(30, 5, 5);
    c.geometry.region.hi = Vec3(45, 5, 5);
    c.geometry.panel_h = 5;
    c.geometry.panel_v = elements / 5;
    c.geometry.wavelength = 0.1;
    c.geometry.element_spacing = 0.05;
    c.model.rho0 = db_to_linear(-30.0);
    c.model.alpha_ai = 2.2;
    c.model.alpha_iu = 2.2;
    c.rician.beta_ai = db_to_linear(3.0);
    c.rician.beta_iu = db_to_linear(3.0);
    c.weights = VecX::Constant(users, 1.0 / users);
    c.ao.delta = 0.05;
    c.ao.eps_max = 0.01;
    for (int n = 1; n <= 4; ++n) c.ao.starts.push_back(Vec3(25 + 5 * n, 5, 5));
    c.ao.xi = 1e-3;
    c.ao.max_outer = 50;
    return c;
  }

  void validate() const {
    geometry.validate();
    model.validate();
    rician.validate();
    const int k = geometry.num_users();
    if (weights.size() != k) throw ConfigError("run.weights: expected one weight per user");
    for (int i = 0; i < k; ++i)
      if (weights[i] < 0.0) throw ConfigError("run.weights: weights must be nonnegative");
    if (geometry.num_elements() % geometry.panel_h != 0)
      throw ConfigError("geometry.m: element count must be divisible by m_h");
    if (realizations < 1) throw ConfigError("run.realizations: must be >= 1");
    if (workers < 1) throw ConfigError("run.workers: must be >= 1");
    if (mo.grid_step <= 0.0) throw ConfigError("mo.grid_step: must be positive");
    if (!sweep.param.empty() && sweep.param != "M" && sweep.param != "p_max_dbm" &&
        sweep.param != "x_grid")
      throw ConfigError("sweep.param: must be one of M, p_max_dbm, x_grid");
    ao.validate();
  }
};

namespace detail {

struct KeyValue {
  std::string section, key, value;
  int line = 0;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<KeyValue> tokenize_config(std::istream& in) {
  std::vector<KeyValue> out;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any [section]");
    out.push_back({section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno});
  }
  return out;
}

inline double parse_double(const KeyValue& kv) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(kv.value, &pos);
  } catch (...) {
    throw ConfigError(kv.section + "." + kv.key + ": not a number: '" + kv.value + "'");
  }
  if (trim(kv.value.substr(pos)) != "")
    throw ConfigError(kv.section + "." + kv.key + ": trailing characters in '" + kv.value + "'");
  return v;
}

inline long long parse_int(const KeyValue& kv) {
  const double v = parse_double(kv);
  if (v != std::floor(v)) throw ConfigError(kv.section + "." + kv.key + ": expected an integer");
  return static_cast<long long>(v);
}

inline bool parse_bool(const KeyValue& kv) {
  if (kv.value == "true" || kv.value == "1") return true;
  if (kv.value == "false" || kv.value == "0") return false;
  throw ConfigError(kv.section + "." + kv.key + ": expected true/false");
}

inline std::vector<double> parse_list(const KeyValue& kv) {
  std::vector<double> out;
  std::istringstream ss(kv.value);
  std::string tok;
  while (ss >> tok) {
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      throw ConfigError(kv.section + "." + kv.key + ": not a number: '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError(kv.section + "." + kv.key + ": empty list");
  return out;
}

inline Vec3 parse_vec3(const KeyValue& kv) {
  const auto xs = parse_list(kv);
  if (xs.size() != 3) throw ConfigError(kv.section + "." + kv.key + ": expected three coordinates");
  return Vec3(xs[0], xs[1], xs[2]);
}

}  // namespace detail

/// Parses the flat sectioned key=value format. Unknown keys are hard errors;
/// repeated `user` and `start` keys accumulate.
inline ExperimentConfig parse_config(std::istream& in) {
  using detail::KeyValue;
  ExperimentConfig cfg = ExperimentConfig::defaults();
  bool users_cleared = false, starts_cleared = false, weights_set = false;
  int m_total = cfg.geometry.num_elements();
  double spacing_ratio = -1.0;  // applied after the wavelength is known

  for (const KeyValue& kv : detail::tokenize_config(in)) {
    const std::string path = kv.section + "." + kv.key;
    if (kv.section == "geometry") {
      if (kv.key == "ap") cfg.geometry.ap = detail::parse_vec3(kv);
      else if (kv.key == "user") {
        if (!users_cleared) {
          cfg.geometry.users.clear();
          users_cleared = true;
        }
        cfg.geometry.users.push_back(detail::parse_vec3(kv));
      } else if (kv.key == "region_x") {
        const auto v = detail::parse_list(kv);
        if (v.size() != 2) throw ConfigError(path + ": expected min max");
        cfg.geometry.region.lo[0] = v[0];
        cfg.geometry.region.hi[0] = v[1];
      } else if (kv.key == "region_y") {
        const auto v = detail::parse_list(kv);
        if (v.size() != 2) throw ConfigError(path + ": expected min max");
        cfg.geometry.region.lo[1] = v[0];
        cfg.geometry.region.hi[1] = v[1];
      } else if (kv.key == "region_h") {
        const auto v = detail::parse_list(kv);
        if (v.size() != 2) throw ConfigError(path + ": expected min max");
        cfg.geometry.region.lo[2] = v[0];
        cfg.geometry.region.hi[2] = v[1];
      } else if (kv.key == "m") m_total = static_cast<int>(detail::parse_int(kv));
      else if (kv.key == "m_h") cfg.geometry.panel_h = static_cast<int>(detail::parse_int(kv));
      else if (kv.key == "wavelength") cfg.geometry.wavelength = detail::parse_double(kv);
      else if (kv.key == "spacing_ratio") spacing_ratio = detail::parse_double(kv);
      else throw ConfigError(path + ": unknown key");
    } else if (kv.section == "channel") {
      if (kv.key == "rho0_db") cfg.model.rho0 = db_to_linear(detail::parse_double(kv));
      else if (kv.key == "alpha_ai") cfg.model.alpha_ai = detail::parse_double(kv);
      else if (kv.key == "alpha_iu") cfg.model.alpha_iu = detail::parse_double(kv);
      else if (kv.key == "rician_ai_db") cfg.rician.beta_ai = db_to_linear(detail::parse_double(kv));
      else if (kv.key == "rician_iu_db") cfg.rician.beta_iu = db_to_linear(detail::parse_double(kv));
      else if (kv.key == "los_only") cfg.rician.los_only = detail::parse_bool(kv);
      else throw ConfigError(path + ": unknown key");
    } else if (kv.section == "run") {
      if (kv.key == "scheme") {
        if (kv.value == "noma") cfg.scheme = Scheme::noma;
        else if (kv.value == "fdma") cfg.scheme = Scheme::fdma;
        else if (kv.value == "tdma") cfg.scheme = Scheme::tdma;
        else throw ConfigError(path + ": expected noma|fdma|tdma");
      } else if (kv.key == "solver") {
        if (kv.value == "ao") cfg.solver = SolverKind::ao;
        else if (kv.value == "mo-bound") cfg.solver = SolverKind::mo_bound;
        else if (kv.value == "exhaustive") cfg.solver = SolverKind::exhaustive;
        else throw ConfigError(path + ": expected ao|mo-bound|exhaustive");
      } else if (kv.key == "weights") {
        const auto v = detail::parse_list(kv);
        cfg.weights = Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
        weights_set = true;
      } else if (kv.key == "p_max_dbm") cfg.p_max_dbm = detail::parse_double(kv);
      else if (kv.key == "sigma2_dbm") cfg.sigma2_dbm = detail::parse_double(kv);
      else if (kv.key == "realizations") cfg.realizations = static_cast<int>(detail::parse_int(kv));
      else if (kv.key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_int(kv));
      else if (kv.key == "workers") cfg.workers = static_cast<int>(detail::parse_int(kv));
      else throw ConfigError(path + ": unknown key");
    } else if (kv.section == "ao") {
      if (kv.key == "delta") cfg.ao.delta = detail::parse_double(kv);
      else if (kv.key == "eps_max") cfg.ao.eps_max = detail::parse_double(kv);
      else if (kv.key == "start") {
        if (!starts_cleared) {
          cfg.ao.starts.clear();
          starts_cleared = true;
        }
        cfg.ao.starts.push_back(detail::parse_vec3(kv));
      } else if (kv.key == "xi") cfg.ao.xi = detail::parse_double(kv);
      else if (kv.key == "max_outer") cfg.ao.max_outer = static_cast<int>(detail::parse_int(kv));
      else throw ConfigError(path + ": unknown key");
    } else if (kv.section == "mo") {
      if (kv.key == "eps") cfg.mo.eps = detail::parse_double(kv);
      else if (kv.key == "bisect_eps") cfg.mo.bisect_eps = detail::parse_double(kv);
      else if (kv.key == "max_iters") cfg.mo.max_iters = static_cast<int>(detail::parse_int(kv));
      else if (kv.key == "grid_step") cfg.mo.grid_step = detail::parse_double(kv);
      else throw ConfigError(path + ": unknown key");
    } else if (kv.section == "sweep") {
      if (kv.key == "param") cfg.sweep.param = kv.value;
      else if (kv.key == "values") cfg.sweep.values = detail::parse_list(kv);
      else throw ConfigError(path + ": unknown key");
    } else {
      throw ConfigError(kv.section + ": unknown section");
    }
  }

  if (spacing_ratio > 0.0) cfg.geometry.element_spacing = spacing_ratio * cfg.geometry.wavelength;
  if (m_total % std::max(cfg.geometry.panel_h, 1) != 0)
    throw ConfigError("geometry.m: element count must be divisible by m_h");
  cfg.geometry.panel_v = m_total / cfg.geometry.panel_h;
  if (!weights_set && cfg.geometry.num_users() != cfg.weights.size())
    cfg.weights = VecX::Constant(cfg.geometry.num_users(), 1.0 / cfg.geometry.num_users());
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in);
}

}  // namespace irsdp
