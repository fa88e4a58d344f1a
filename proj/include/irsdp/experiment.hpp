#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "irsdp/config.hpp"
#include "irsdp/parallel.hpp"
#include "irsdp/polyblock.hpp"

namespace irsdp {

struct ResultRecord {
  std::string scheme;
  std::string solver;
  int m = 0;
  double p_max_dbm = 0.0;
  int realization = 0;
  double wsr = 0.0;
  Vec3 s = Vec3::Zero();
  int iters = 0;
  double wall_ms = 0.0;
  VecX rates;
};

struct RunSummary {
  std::vector<ResultRecord> records;
  Vec3 deployment = Vec3::Zero();
  double phase1_value = 0.0;  // offline objective (bound for the MO solvers)
  double mean_wsr = 0.0;
  bool all_converged = true;
};

namespace detail {

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// Fixed-deployment solve used for the per-realization phase.
inline ResultRecord solve_at_fixed_s(const ExperimentConfig& cfg, const Vec3& s,
                                     const ChannelRealization& ch, std::uint64_t run_seed,
                                     bool* converged) {
  const double p_max = cfg.p_max_watts();
  const double sigma2 = cfg.sigma2_watts();
  ResultRecord rec;
  rec.s = s;

  if (cfg.solver == SolverKind::ao) {
    AoConfig online = cfg.ao;
    online.delta = 0.0;  // deployment is fixed after the offline phase
    online.starts = {s};
    online.seed = run_seed;
    online.workers = 1;
    const ChannelFn frozen = [&ch](const Vec3&) { return ch; };
    AoResult res = ao_solve(cfg.scheme, cfg.geometry, cfg.model, cfg.weights, p_max, sigma2,
                            online, frozen);
    rec.wsr = res.best.wsr;
    rec.rates = res.best.per_user_rates;
    rec.iters = res.runs[static_cast<std::size_t>(std::max(res.best_start, 0))].iterations;
    *converged = res.runs[static_cast<std::size_t>(std::max(res.best_start, 0))].converged;
    return rec;
  }

  // upper-bound solvers at a fixed deployment
  const CMat q = cascaded_channel(ch, s, cfg.geometry, cfg.model);
  const int k = cfg.geometry.num_users();
  if (cfg.scheme == Scheme::tdma) {
    std::vector<CVec> per_user;
    for (int i = 0; i < k; ++i) per_user.push_back(matched_phases(q.row(i)));
    rec.rates = tdma_rates(q, per_user, p_max, sigma2);
    rec.wsr = wsr(cfg.weights, rec.rates);
    rec.iters = 1;
    *converged = true;
    return rec;
  }
  PolyblockOptions mo;
  mo.eps = cfg.mo.eps;
  mo.bisect_eps = cfg.mo.bisect_eps;
  mo.max_iters = cfg.mo.max_iters;
  const auto orders = cfg.scheme == Scheme::noma
                          ? all_orders(k)
                          : std::vector<DecodingOrder>{DecodingOrder::identity(k)};
  double best = -1.0;
  bool conv = true;
  int iters = 0;
  VecX gamma;
  for (const auto& order : orders) {
    auto pb = polyblock_maximize(q, order, cfg.weights, p_max, sigma2, cfg.scheme, mo);
    conv = conv && pb.converged;
    if (pb.bound > best) {
      best = pb.bound;
      iters = pb.iterations;
      gamma = pb.gamma_star;
    }
  }
  rec.wsr = best;
  rec.iters = iters;
  VecX rates = VecX::Zero(k);
  if (gamma.size() == k)
    for (int i = 0; i < k; ++i)
      rates[i] = std::log2(std::max(gamma[i], 1.0)) / (cfg.scheme == Scheme::fdma ? k : 1);
  rec.rates = rates;
  *converged = conv;
  return rec;
}

}  // namespace detail

/// Two-phase experiment: the deployment location comes from the LoS-only
/// offline problem, then each seeded realization re-optimizes reflection and
/// power at the fixed location.
inline RunSummary run_experiment(const ExperimentConfig& cfg, bool timing = false) {
  cfg.validate();
  RunSummary out;
  const double p_max = cfg.p_max_watts();
  const double sigma2 = cfg.sigma2_watts();

  // phase 1: offline deployment from LoS components
  if (cfg.solver == SolverKind::ao) {
    AoConfig offline = cfg.ao;
    offline.seed = derive_seed(cfg.seed, 0xA0);
    offline.workers = cfg.workers;
    AoResult res =
        ao_solve(cfg.scheme, cfg.geometry, cfg.model, cfg.weights, p_max, sigma2, offline);
    out.deployment = res.best.s;
    out.phase1_value = res.best.wsr;
    if (res.best_start >= 0)
      out.all_converged = res.runs[static_cast<std::size_t>(res.best_start)].converged;
  } else {
    DriverOptions opts;
    opts.mo.eps = cfg.mo.eps;
    opts.mo.bisect_eps = cfg.mo.bisect_eps;
    opts.mo.max_iters = cfg.mo.max_iters;
    opts.grid_step = cfg.mo.grid_step;
    opts.workers = cfg.workers;
    opts.seed = derive_seed(cfg.seed, 0xB0);
    DriverResult res = exhaustive_driver(cfg.geometry, cfg.model, cfg.scheme, cfg.weights, p_max,
                                         sigma2, opts);
    out.deployment = res.best.s;
    out.phase1_value = res.bound;
    out.all_converged = res.converged;
  }

  // phase 2: per-realization re-optimization at the fixed deployment
  out.records.resize(static_cast<std::size_t>(cfg.realizations));
  std::vector<char> converged(static_cast<std::size_t>(cfg.realizations), 1);
  parallel_map(cfg.realizations, cfg.workers, [&](int r) {
    const std::uint64_t ch_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    const auto ch = sample_channel(cfg.geometry, out.deployment, cfg.rician, ch_seed);
    const auto t0 = std::chrono::steady_clock::now();
    bool conv = true;
    ResultRecord rec = detail::solve_at_fixed_s(
        cfg, out.deployment, ch, derive_seed(cfg.seed, 0x5EED0000ULL + static_cast<std::uint64_t>(r)),
        &conv);
    const auto t1 = std::chrono::steady_clock::now();
    rec.scheme = to_string(cfg.scheme);
    rec.solver = to_string(cfg.solver);
    rec.m = cfg.geometry.num_elements();
    rec.p_max_dbm = cfg.p_max_dbm;
    rec.realization = r;
    rec.wall_ms = timing ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
    out.records[static_cast<std::size_t>(r)] = std::move(rec);
    converged[static_cast<std::size_t>(r)] = conv ? 1 : 0;
  });
  double acc = 0.0;
  for (const auto& r : out.records) acc += r.wsr;
  for (char c : converged) out.all_converged = out.all_converged && c;
  out.mean_wsr = acc / std::max<std::size_t>(out.records.size(), 1);
  return out;
}

/// One run per sweep value; records are concatenated in sweep order.
inline std::vector<ResultRecord> sweep_experiment(const ExperimentConfig& base, bool timing = false,
                                                  bool* all_converged = nullptr) {
  if (base.sweep.param.empty() || base.sweep.values.empty())
    throw ConfigError("sweep: param and a non-empty value list are required");
  std::vector<ResultRecord> records;
  bool ok = true;
  for (double value : base.sweep.values) {
    ExperimentConfig cfg = base;
    if (base.sweep.param == "M") {
      const int m = static_cast<int>(value);
      if (m <= 0 || m % cfg.geometry.panel_h != 0)
        throw ConfigError("sweep.values: M must be a positive multiple of m_h");
      cfg.geometry.panel_v = m / cfg.geometry.panel_h;
    } else if (base.sweep.param == "p_max_dbm") {
      cfg.p_max_dbm = value;
    } else {  // x_grid
      cfg.mo.grid_step = value;
    }
    RunSummary summary = run_experiment(cfg, timing);
    ok = ok && summary.all_converged;
    records.insert(records.end(), summary.records.begin(), summary.records.end());
  }
  if (all_converged) *all_converged = ok;
  return records;
}

inline void emit_csv(const std::vector<ResultRecord>& records, std::ostream& os) {
  int k = 0;
  for (const auto& r : records) k = std::max(k, static_cast<int>(r.rates.size()));
  os << "scheme,solver,M,p_max_dbm,realization,wsr_bps_hz,s_x,s_y,s_z,iters,wall_ms";
  for (int i = 1; i <= k; ++i) os << ",rate_" << i;
  os << "\n";
  for (const auto& r : records) {
    os << r.scheme << ',' << r.solver << ',' << r.m << ',' << detail::fmt9(r.p_max_dbm) << ','
       << r.realization << ',' << detail::fmt9(r.wsr) << ',' << detail::fmt9(r.s[0]) << ','
       << detail::fmt9(r.s[1]) << ',' << detail::fmt9(r.s[2]) << ',' << r.iters << ','
       << detail::fmt9(r.wall_ms);
    for (int i = 0; i < k; ++i) os << ',' << detail::fmt9(i < r.rates.size() ? r.rates[i] : 0.0);
    os << "\n";
  }
}

inline nlohmann::ordered_json record_to_json(const ResultRecord& r) {
  nlohmann::ordered_json j;
  j["scheme"] = r.scheme;
  j["solver"] = r.solver;
  j["M"] = r.m;
  j["p_max_dbm"] = r.p_max_dbm;
  j["realization"] = r.realization;
  j["wsr_bps_hz"] = r.wsr;
  j["s"] = {r.s[0], r.s[1], r.s[2]};
  j["iters"] = r.iters;
  j["wall_ms"] = r.wall_ms;
  std::vector<double> rates(r.rates.data(), r.rates.data() + r.rates.size());
  j["rates"] = rates;
  return j;
}

inline ResultRecord record_from_json(const nlohmann::json& j) {
  ResultRecord r;
  r.scheme = j.at("scheme").get<std::string>();
  r.solver = j.at("solver").get<std::string>();
  r.m = j.at("M").get<int>();
  r.p_max_dbm = j.at("p_max_dbm").get<double>();
  r.realization = j.at("realization").get<int>();
  r.wsr = j.at("wsr_bps_hz").get<double>();
  const auto& s = j.at("s");
  r.s = Vec3(s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>());
  r.iters = j.at("iters").get<int>();
  r.wall_ms = j.at("wall_ms").get<double>();
  const auto& rates = j.at("rates");
  r.rates = VecX(static_cast<Eigen::Index>(rates.size()));
  for (std::size_t i = 0; i < rates.size(); ++i) r.rates[static_cast<Eigen::Index>(i)] = rates.at(i).get<double>();
  return r;
}

inline void emit_json(const std::vector<ResultRecord>& records, std::ostream& os) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : records) arr.push_back(record_to_json(r));
  os << arr.dump(2) << "\n";
}

/// Writes records to `path`; format is "csv" or "json".
inline void emit(const std::vector<ResultRecord>& records, const std::string& format,
                 const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open output file: " + path);
  if (format == "csv") emit_csv(records, os);
  else if (format == "json") emit_json(records, os);
  else throw ConfigError("unknown output format: " + format);
}

}  // namespace irsdp
