#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <vector>

#include "irsdp/channel.hpp"
#include "irsdp/parallel.hpp"
#include "irsdp/rates.hpp"
#include "irsdp/sdp.hpp"
#include "irsdp/srocr.hpp"

namespace irsdp {

/// Initial polyblock vertex: per-user rate ceiling with all power and the
/// matched-phase reflection, gamma_k = 1 + P ||q_k||_1^2 / sigma^2.
inline VecX init_vertex(const CMat& q, double p_max, double sigma2) {
  VecX g(q.rows());
  for (int k = 0; k < q.rows(); ++k) g[k] = 1.0 + p_max * l1_sq(q.row(k)) / sigma2;
  return g;
}

struct ProjectionResult {
  double alpha = 0.0;
  VecX point;    // alpha * z
  VecX p;        // recovered powers, user indexing
  VecX lambda;   // recovered effective noises, user indexing
  CMat v_lifted;
  bool has_witness = false;
};

/// Feasibility oracle for the projection subproblem: given a scaled vertex
/// target, decide whether rates (alpha z) are supported by some power split
/// and lifted reflection matrix. The joint problem couples scalars and the
/// matrix through hyperbolic terms; those become fixed-off-diagonal 2x2 PSD
/// blocks next to the embedded reflection block, and the whole system is
/// solved as one margin-maximization cone program. A clearly negative
/// optimal margin certifies infeasibility; borderline cases count as
/// feasible, which biases the outer bound conservatively upward.
class MoOracle {
public:
  MoOracle(const CMat& q, const DecodingOrder& order, Scheme scheme, double p_max, double sigma2,
           double sdp_tol = 1e-6, int sdp_max_iters = 20000)
      : q_(q),
        by_pos_(order.users_by_position()),
        scheme_(scheme),
        sdp_tol_(sdp_tol),
        sdp_max_iters_(sdp_max_iters) {
    const int k_users = static_cast<int>(q.rows());
    chi2_ = 1e-300;
    for (int k = 0; k < k_users; ++k) chi2_ = std::max(chi2_, q.row(k).squaredNorm());
    sigma_hat2_ = sigma2 / (chi2_ * p_max);
    q_hat_.reserve(static_cast<std::size_t>(k_users));
    l1_hat_sq_.reserve(static_cast<std::size_t>(k_users));
    for (int k = 0; k < k_users; ++k) {
      const CVec row = q.row(k).transpose() / std::sqrt(chi2_);
      q_hat_.push_back(row.conjugate() * row.transpose());
      l1_hat_sq_.push_back(std::max(l1_sq(row), 1e-300));
    }
    p_max_ = p_max;
    sigma2_ = sigma2;
  }

  bool feasible(double alpha, const VecX& z, ProjectionResult* witness = nullptr) {
    const int k_users = static_cast<int>(by_pos_.size());
    const int m = static_cast<int>(q_.cols());
    const double sig2 = scheme_ == Scheme::fdma ? sigma_hat2_ / k_users : sigma_hat2_;

    std::vector<double> gain_target(static_cast<std::size_t>(k_users));
    std::uint64_t pattern = 0;
    for (int t = 0; t < k_users; ++t) {
      const double g = alpha * z[by_pos_[static_cast<std::size_t>(t)]] - 1.0;
      gain_target[static_cast<std::size_t>(t)] = std::max(g, 0.0);
      if (g > 0.0) pattern |= (1ULL << t);
    }

    // Cheap necessary condition first: even with every user at its own
    // matched-phase gain ceiling (a relaxation of the joint problem), the
    // minimal power stack may already exceed the budget.
    if (pattern != 0) {
      double total = 0.0, prev_power = 0.0;
      for (int t = k_users - 1; t >= 0; --t) {
        const double g = gain_target[static_cast<std::size_t>(t)];
        const double lam_min =
            sig2 / l1_hat_sq_[static_cast<std::size_t>(by_pos_[static_cast<std::size_t>(t)])];
        double need = g * ((scheme_ == Scheme::noma ? total : 0.0) + lam_min);
        if (scheme_ == Scheme::noma) need = std::max(need, prev_power);
        total += need;
        prev_power = need;
        if (total > 1.0 + 1e-9) return false;
      }
    }

    ConeProgram prog;
    const int blk = prog.add_psd_block(2 * m);
    add_diag_one_rows(prog, blk, m);
    const int delta = prog.add_scalar(false);
    prog.add_objective(delta, 1.0);
    prog.begin_row(10.0);
    prog.row_coeff(delta, 1.0);
    prog.end_row_le();

    std::vector<int> pvar(static_cast<std::size_t>(k_users));
    for (int t = 0; t < k_users; ++t) pvar[static_cast<std::size_t>(t)] = prog.add_scalar(true);
    std::vector<int> hyper(static_cast<std::size_t>(k_users), -1);
    std::vector<double> tscale(static_cast<std::size_t>(k_users), 1.0);

    for (int t = 0; t < k_users; ++t) {
      const double g = gain_target[static_cast<std::size_t>(t)];
      if (g <= 0.0) continue;
      const int user = by_pos_[static_cast<std::size_t>(t)];
      // per-user rescaling keeps every block entry near unity: the noise
      // variable carries the SINR target, the gain variable its ceiling
      const double ell = l1_hat_sq_[static_cast<std::size_t>(user)];
      tscale[static_cast<std::size_t>(t)] = ell;
      const int hb = prog.add_psd_block(2);
      hyper[static_cast<std::size_t>(t)] = hb;
      // block [[g*lambda, c],[c, gain/ell]] with c^2 = g*sig2/ell
      prog.begin_row(std::sqrt(g * sig2 / ell));
      prog.row_entry(hb, 0, 1, 1.0);
      prog.end_row_eq();
      // ell * tgain <= Re Tr(Qhat_user V) - margin
      prog.begin_row(0.0);
      prog.row_entry(hb, 1, 1, ell);
      row_trace(prog, blk, q_hat_[static_cast<std::size_t>(user)], -1.0);
      prog.row_coeff(delta, 1.0);
      prog.end_row_le();
      // required SINR: g * interference + (g lambda) <= p_t - margin
      prog.begin_row(0.0);
      if (scheme_ == Scheme::noma)
        for (int tau = t + 1; tau < k_users; ++tau)
          prog.row_coeff(pvar[static_cast<std::size_t>(tau)], g);
      prog.row_entry(hb, 0, 0, 1.0);
      prog.row_coeff(pvar[static_cast<std::size_t>(t)], -1.0);
      prog.row_coeff(delta, 1.0);
      prog.end_row_le();
    }

    // total power, normalized to one
    prog.begin_row(1.0);
    for (int t = 0; t < k_users; ++t) prog.row_coeff(pvar[static_cast<std::size_t>(t)], 1.0);
    prog.row_coeff(delta, 1.0);
    prog.end_row_le();

    if (scheme_ == Scheme::noma) {
      for (int t = 0; t + 1 < k_users; ++t) {
        // powers non-increasing along decoding positions
        prog.begin_row(0.0);
        prog.row_coeff(pvar[static_cast<std::size_t>(t + 1)], 1.0);
        prog.row_coeff(pvar[static_cast<std::size_t>(t)], -1.0);
        prog.row_coeff(delta, 1.0);
        prog.end_row_le();
        // gains non-decreasing along decoding positions
        prog.begin_row(0.0);
        row_trace(prog, blk, q_hat_[static_cast<std::size_t>(by_pos_[static_cast<std::size_t>(t)])], 1.0);
        row_trace(prog, blk, q_hat_[static_cast<std::size_t>(by_pos_[static_cast<std::size_t>(t + 1)])], -1.0);
        prog.row_coeff(delta, 1.0);
        prog.end_row_le();
      }
    }

    ConeProgram::Options opt;
    opt.tol = sdp_tol_;
    opt.max_iters = sdp_max_iters_;
    SolverReport rep = prog.solve(opt, &warm_[pattern]);
    const double margin = prog.value(delta);
    // an unconverged solve counts as feasible, which only biases the outer
    // bound upward (it stays a bound)
    const bool ok = margin >= -1e-5 || rep.status != SolveStatus::optimal;
    if (ok && witness) {
      witness->v_lifted = real_embedding_to_complex(prog.psd_value(blk));
      witness->p = VecX::Zero(k_users);
      witness->lambda = VecX::Zero(k_users);
      for (int t = 0; t < k_users; ++t) {
        const int user = by_pos_[static_cast<std::size_t>(t)];
        witness->p[user] = p_max_ * prog.value(pvar[static_cast<std::size_t>(t)]);
        const double c = std::real((q_hat_[static_cast<std::size_t>(user)] * witness->v_lifted).trace()) * chi2_;
        witness->lambda[user] = sigma2_ / std::max(c, 1e-300);
      }
      witness->has_witness = true;
    }
    return ok;
  }

private:
  CMat q_;
  std::vector<int> by_pos_;
  Scheme scheme_;
  double sdp_tol_;
  int sdp_max_iters_;
  double chi2_ = 1.0;
  double sigma_hat2_ = 1.0;
  double p_max_ = 1.0;
  double sigma2_ = 1.0;
  std::vector<CMat> q_hat_;
  std::vector<double> l1_hat_sq_;
  std::map<std::uint64_t, ConeProgram::State> warm_;
};

/// Bisection on the scaling factor alpha (Algorithm-2 style): alpha_min stays
/// feasible, alpha_max infeasible; the certified projection is alpha_min * z.
inline ProjectionResult project_bisection(const VecX& z, MoOracle& oracle, double eps = 1e-4) {
  ProjectionResult best;
  best.point = VecX::Zero(z.size());
  if (oracle.feasible(1.0, z, &best)) {
    best.alpha = 1.0;
    best.point = z;
    return best;
  }
  double lo = 0.0, hi = 1.0;
  while (hi - lo >= eps) {
    const double mid = 0.5 * (lo + hi);
    ProjectionResult probe;
    if (oracle.feasible(mid, z, &probe)) {
      lo = mid;
      best = probe;
      best.alpha = mid;
    } else {
      hi = mid;
    }
  }
  best.alpha = lo;
  best.point = lo * z;
  return best;
}

struct PolyblockOptions {
  double eps = 1e-2;         // outer gap tolerance, bits/s/Hz
  double bisect_eps = 1e-4;  // projection tolerance
  int max_iters = 500;
  bool weighted = true;  // weighted best-vertex selection; unweighted mirrors the bare pseudocode
  double sdp_tol = 1e-6;
  int sdp_max_iters = 20000;
};

struct PolyblockResult {
  double bound = 0.0;        // certified upper bound on the relaxed optimum
  VecX gamma_star;           // best feasible rate point
  double best_value = 0.0;   // objective at gamma_star
  ProjectionResult witness;  // variables supporting gamma_star
  bool converged = false;
  int iterations = 0;
  std::vector<double> bound_trace;  // U(z) per iteration
  std::vector<int> vertex_counts;
};

/// Polyblock outer approximation for the fixed order/deployment subproblem.
/// Vertices are generated from the conservative end of the bisection bracket
/// so containment of the feasible set survives the projection tolerance.
inline PolyblockResult polyblock_maximize(const CMat& q, const DecodingOrder& order,
                                          const VecX& weights, double p_max, double sigma2,
                                          Scheme scheme, const PolyblockOptions& opts = {}) {
  const int k_users = static_cast<int>(q.rows());
  VecX w_eff = weights;
  if (scheme == Scheme::fdma) w_eff /= k_users;
  const VecX w_sel = opts.weighted ? w_eff : VecX::Ones(k_users);

  auto value = [&](const VecX& g) {
    double u = 0.0;
    for (int k = 0; k < k_users; ++k) u += w_eff[k] * std::log2(std::max(g[k], 1.0));
    return u;
  };
  auto select_value = [&](const VecX& g) {
    double u = 0.0;
    for (int k = 0; k < k_users; ++k) u += w_sel[k] * std::log2(std::max(g[k], 1.0));
    return u;
  };

  MoOracle oracle(q, order, scheme, p_max, sigma2, opts.sdp_tol, opts.sdp_max_iters);
  std::vector<VecX> verts{init_vertex(q, p_max, sigma2)};

  PolyblockResult res;
  res.gamma_star = VecX::Ones(k_users);
  double u_star = 0.0;

  for (int n = 0; n < opts.max_iters; ++n) {
    res.iterations = n + 1;
    if (verts.empty()) {
      res.bound = u_star;
      res.converged = true;
      break;
    }
    std::size_t best_idx = 0;
    double best_sel = -1e300;
    for (std::size_t i = 0; i < verts.size(); ++i) {
      const double u = select_value(verts[i]);
      if (u > best_sel) {
        best_sel = u;
        best_idx = i;
      }
    }
    const VecX z = verts[best_idx];
    res.bound = std::max(value(z), u_star);
    res.bound_trace.push_back(value(z));
    res.vertex_counts.push_back(static_cast<int>(verts.size()));
    if (value(z) - u_star <= opts.eps) {
      res.converged = true;
      break;
    }

    ProjectionResult proj = project_bisection(z, oracle, opts.bisect_eps);
    if (proj.alpha > 0.0 && proj.has_witness && proj.point.minCoeff() >= 1.0 - 1e-9) {
      const double val = value(proj.point);
      if (val >= u_star) {
        u_star = val;
        res.gamma_star = proj.point.cwiseMax(1.0);
        res.best_value = val;
        res.witness = proj;
      }
    }

    const double alpha_hi = std::min(1.0, proj.alpha + opts.bisect_eps);
    verts.erase(verts.begin() + static_cast<std::ptrdiff_t>(best_idx));
    bool changed = false;
    for (int k = 0; k < k_users; ++k) {
      const double nv = alpha_hi * z[k];
      if (nv >= z[k] - 1e-15) continue;
      changed = true;
      if (nv < 1.0) continue;  // vertex leaves the conormal set
      VecX vtx = z;
      vtx[k] = nv;
      verts.push_back(vtx);
    }
    if (!changed) {
      // z is feasible up to the bisection tolerance; the gap is below eps
      res.bound = std::max(value(z), u_star);
      res.converged = true;
      break;
    }

    // drop dominated vertices
    for (std::size_t i = 0; i < verts.size();) {
      bool dominated = false;
      for (std::size_t j = 0; j < verts.size(); ++j) {
        if (i == j) continue;
        if ((verts[i].array() <= verts[j].array() + 1e-15).all() &&
            (verts[i] - verts[j]).norm() > 0.0) {
          dominated = true;
          break;
        }
      }
      if (dominated)
        verts.erase(verts.begin() + static_cast<std::ptrdiff_t>(i));
      else
        ++i;
    }
  }

  if (!res.converged && !verts.empty()) {
    double top = u_star;
    for (const auto& v : verts) top = std::max(top, value(v));
    res.bound = top;
  }
  res.best_value = u_star;
  return res;
}

inline std::vector<DecodingOrder> all_orders(int k_users) {
  if (k_users > 7) throw ConfigError("exhaustive order enumeration capped at 7 users");
  std::vector<int> pos(static_cast<std::size_t>(k_users));
  std::iota(pos.begin(), pos.end(), 0);
  std::vector<DecodingOrder> out;
  do {
    DecodingOrder d;
    d.mu = pos;
    out.push_back(d);
  } while (std::next_permutation(pos.begin(), pos.end()));
  return out;
}

/// Grid points over the non-degenerate axes of the deployment region.
inline std::vector<Vec3> region_grid(const Region& region, double step) {
  if (step <= 0.0) throw ConfigError("grid step must be positive");
  std::array<std::vector<double>, 3> axes;
  for (int a = 0; a < 3; ++a) {
    const double lo = region.lo[a], hi = region.hi[a];
    for (double x = lo; x < hi - 1e-9; x += step) axes[static_cast<std::size_t>(a)].push_back(x);
    axes[static_cast<std::size_t>(a)].push_back(hi);
  }
  std::vector<Vec3> pts;
  for (double x : axes[0])
    for (double y : axes[1])
      for (double z : axes[2]) pts.push_back(Vec3(x, y, z));
  return pts;
}

struct DriverOptions {
  PolyblockOptions mo;
  double grid_step = 0.5;
  int workers = 1;
  std::uint64_t seed = 1234;  // randomization fallback
  int rand_samples = 1000;
};

struct DriverResult {
  SolutionBundle best;
  double bound = 0.0;
  bool converged = true;
};

/// Exhaustive upper-bound driver: polyblock optimization (or the TDMA closed
/// form) at every grid point, and for NOMA at every decoding order.
inline DriverResult exhaustive_driver(
    const NetworkGeometry& geo, const PathLossModel& model, Scheme scheme, const VecX& weights,
    double p_max, double sigma2, const DriverOptions& opts,
    const std::function<ChannelRealization(const Vec3&)>& channel_fn = nullptr) {
  const auto channels = channel_fn ? channel_fn
                                   : [&geo](const Vec3& s) { return los_channel(geo, s); };
  const auto points = region_grid(geo.region, opts.grid_step);
  const int k_users = geo.num_users();

  struct Candidate {
    double bound = -1.0;
    Vec3 s;
    DecodingOrder order;
    PolyblockResult pb;
    CMat q;
    bool valid = false;
  };

  if (scheme == Scheme::tdma) {
    DriverResult out;
    out.bound = -1.0;
    for (const auto& s : points) {
      const CMat q = cascaded_channel(channels(s), s, geo, model);
      std::vector<CVec> per_user;
      per_user.reserve(static_cast<std::size_t>(k_users));
      for (int k = 0; k < k_users; ++k) per_user.push_back(matched_phases(q.row(k)));
      const VecX rates = tdma_rates(q, per_user, p_max, sigma2);
      const double val = wsr(weights, rates);
      if (val > out.bound) {
        out.bound = val;
        out.best.s = s;
        out.best.design.per_user = per_user;
        out.best.design.v = per_user[0];
        out.best.power = PowerAllocation{VecX::Constant(k_users, p_max), p_max};
        out.best.order = DecodingOrder::identity(k_users);
        out.best.per_user_rates = rates;
        out.best.wsr = val;
      }
    }
    return out;
  }

  std::vector<DecodingOrder> orders =
      scheme == Scheme::noma ? all_orders(k_users)
                             : std::vector<DecodingOrder>{DecodingOrder::identity(k_users)};
  std::vector<Candidate> cands(points.size() * orders.size());
  parallel_map(static_cast<int>(cands.size()), opts.workers, [&](int idx) {
    const auto& s = points[static_cast<std::size_t>(idx) / orders.size()];
    const auto& order = orders[static_cast<std::size_t>(idx) % orders.size()];
    Candidate c;
    c.s = s;
    c.order = order;
    c.q = cascaded_channel(channels(s), s, geo, model);
    c.pb = polyblock_maximize(c.q, order, weights, p_max, sigma2, scheme, opts.mo);
    c.bound = c.pb.bound;
    c.valid = c.pb.witness.has_witness;
    cands[static_cast<std::size_t>(idx)] = std::move(c);
  });

  DriverResult out;
  const Candidate* top = nullptr;
  for (const auto& c : cands) {
    out.bound = std::max(out.bound, c.bound);
    out.converged = out.converged && c.pb.converged;
    if (c.valid && (!top || c.bound > top->bound)) top = &c;
  }
  if (!top) return out;

  // extract a unit-modulus design from the witness
  const auto& w = top->pb.witness;
  PowerAllocation power{w.p, p_max};
  auto evaluate = [&](const CVec& v) {
    const VecX rates = scheme == Scheme::noma
                           ? noma_rates(top->q, v, power, top->order, sigma2)
                           : fdma_rates(top->q, v, power, sigma2);
    return wsr(weights, rates);
  };
  CVec v;
  try {
    v = extract_rank_one(w.v_lifted);
  } catch (const RankOneError&) {
    const auto pair = largest_eigpair(w.v_lifted);
    CVec cand(pair.vector.size());
    for (int i = 0; i < cand.size(); ++i) {
      const double a = std::abs(pair.vector[i]);
      cand[i] = a > 0 ? pair.vector[i] / a : Complex(1, 0);
    }
    const CVec rnd = gaussian_randomization(w.v_lifted, opts.rand_samples, evaluate, opts.seed);
    v = evaluate(cand) >= evaluate(rnd) ? cand : rnd;
  }

  out.best.s = top->s;
  out.best.design.v = v;
  out.best.power = power;
  out.best.order = top->order;
  out.best.per_user_rates = scheme == Scheme::noma
                                ? noma_rates(top->q, v, power, top->order, sigma2)
                                : fdma_rates(top->q, v, power, sigma2);
  out.best.wsr = wsr(weights, out.best.per_user_rates);
  return out;
}

}  // namespace irsdp
