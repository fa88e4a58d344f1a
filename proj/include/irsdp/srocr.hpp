#pragma once

#include <functional>

#include "irsdp/linalg.hpp"
#include "irsdp/rng.hpp"
#include "irsdp/sdp.hpp"

namespace irsdp {

struct SrocrOptions {
  double eps1 = 1e-3;    // objective stall threshold
  double eps2 = 1e-3;    // eigenvalue-ratio gap threshold
  double delta0 = 0.1;   // initial relaxation step
  double delta_floor = 1e-6;
  int max_iters = 200;
  double sdp_tol = 1e-6;
  int sdp_max_iters = 20000;
};

struct SrocrResult {
  CMat v_lifted;
  double objective = 0.0;
  double omega = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Sequential rank-one constraint relaxation. The builder assembles the
/// convex subproblem for a given relaxation level omega and the previous
/// iterate (whose leading eigenvector parameterizes the relaxed rank
/// constraint). Infeasible steps halve the step size; feasible steps reset it.
inline SrocrResult srocr_solve(const LiftedBuilder& builder, const CMat& v_init,
                               const SrocrOptions& opt = {}) {
  SrocrResult res;
  CMat v_cur = v_init;
  double omega = 0.0;
  double delta = opt.delta0;
  double obj_prev = 0.0;
  bool have_obj = false;
  ConeProgram::State warm;

  for (int i = 0; i < opt.max_iters; ++i) {
    LiftedProblem sub = builder(omega, v_cur);
    ConeProgram::Options copt;
    copt.tol = opt.sdp_tol;
    copt.max_iters = opt.sdp_max_iters;
    SolverReport rep = sub.prog.solve(copt, &warm);
    res.iterations = i + 1;

    const bool ok = rep.status == SolveStatus::optimal;
    if (ok) {
      v_cur = sub.extract();
      delta = opt.delta0;
      const double obj = rep.objective;
      const double omega_prev = omega;
      const auto top = largest_eigpair(v_cur);
      const double ratio = top.value / std::max(v_cur.trace().real(), 1e-300);
      omega = std::min(1.0, ratio + delta);
      if (have_obj && std::abs(obj - obj_prev) <= opt.eps1 && std::abs(1.0 - omega_prev) <= opt.eps2) {
        res.converged = true;
        res.objective = obj;
        break;
      }
      obj_prev = obj;
      have_obj = true;
      res.objective = obj;
    } else {
      delta /= 2.0;
      if (delta < opt.delta_floor) break;
      const auto top = largest_eigpair(v_cur);
      const double ratio = top.value / std::max(v_cur.trace().real(), 1e-300);
      omega = std::min(1.0, ratio + delta);
    }
  }
  res.v_lifted = v_cur;
  res.omega = omega;
  return res;
}

/// Draws zero-mean complex Gaussians with covariance V, normalizes each
/// entry to unit modulus, and keeps the candidate with the best evaluator
/// value. Deterministic under a fixed seed.
inline CVec gaussian_randomization(const CMat& v_lifted, int num_samples,
                                   const std::function<double(const CVec&)>& evaluator,
                                   std::uint64_t seed) {
  const int m = static_cast<int>(v_lifted.rows());
  Eigen::SelfAdjointEigenSolver<CMat> eig(hermitize(v_lifted));
  VecX lam = eig.eigenvalues().cwiseMax(0.0);
  CMat factor = eig.eigenvectors() * lam.cwiseSqrt().asDiagonal();

  Rng rng(seed);
  CVec best;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < num_samples; ++s) {
    CVec xi(m);
    for (int i = 0; i < m; ++i) xi[i] = rng.complex_normal();
    CVec x = factor * xi;
    CVec v(m);
    for (int i = 0; i < m; ++i) {
      const double a = std::abs(x[i]);
      v[i] = a > 0.0 ? x[i] / a : Complex(1.0, 0.0);
    }
    const double val = evaluator(v);
    if (val > best_val) {
      best_val = val;
      best = v;
    }
  }
  return best;
}

struct RankOneError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unit-modulus vector from a numerically rank-one lifted matrix. The global
/// phase is fixed by making the first entry real positive. Callers should
/// fall back to gaussian_randomization when the rank test fails.
inline CVec extract_rank_one(const CMat& v_lifted, double ratio_tol = 1e-6) {
  const int m = static_cast<int>(v_lifted.rows());
  Eigen::SelfAdjointEigenSolver<CMat> eig(hermitize(v_lifted));
  const double l1 = eig.eigenvalues()[m - 1];
  const double l2 = m > 1 ? std::abs(eig.eigenvalues()[m - 2]) : 0.0;
  if (l1 <= 0.0 || (m > 1 && l2 / l1 > ratio_tol))
    throw RankOneError("lifted matrix is not rank-one; use gaussian_randomization");
  CVec v = std::sqrt(l1) * eig.eigenvectors().col(m - 1);
  for (int i = 0; i < m; ++i) {
    const double a = std::abs(v[i]);
    v[i] = a > 0.0 ? v[i] / a : Complex(1.0, 0.0);
  }
  if (std::abs(v[0]) > 0.0) v *= std::conj(v[0]) / std::abs(v[0]);
  return v;
}

/// Relaxed rank-one constraint row: u_max(V_prev)^H V u_max(V_prev) >= omega * Tr(V).
/// Under the unit diagonal, Tr(V) is the dimension, so the bound is constant.
inline void add_srocr_row(ConeProgram& prog, int block, int dim, double omega,
                          const CMat& v_prev) {
  const CVec u = largest_eigpair(v_prev).vector;
  prog.begin_row(-omega * dim);
  row_trace(prog, block, CMat(u * u.adjoint()), -1.0);
  prog.end_row_le();
}

/// Matched phases: the reflection vector maximizing |q v| for one row (the
/// closed-form optimum whose gain is the squared l1 norm of q).
inline CVec matched_phases(const CVec& q_row) {
  CVec v(q_row.size());
  for (int i = 0; i < q_row.size(); ++i) v[i] = std::polar(1.0, -std::arg(q_row[i]));
  return v;
}

inline double l1_sq(const CVec& q_row) {
  double s = 0.0;
  for (int i = 0; i < q_row.size(); ++i) s += std::abs(q_row[i]);
  return s * s;
}

}  // namespace irsdp
