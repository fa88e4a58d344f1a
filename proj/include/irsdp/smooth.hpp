#pragma once

#include <Eigen/Cholesky>
#include <algorithm>
#include <functional>
#include <limits>
#include <vector>

#include "irsdp/common.hpp"

namespace irsdp {

/// Twice-differentiable scalar function of a small dense vector. `grad` and
/// `hess` are filled when non-null.
using SmoothFn = std::function<double(const VecX&, VecX*, MatX*)>;

/// maximize f(x)  s.t.  g_i(x) <= 0,  lower <= x <= upper
/// with f concave and every g_i convex (caller-asserted). Dimensions here are
/// tiny (a few per user), so dense Newton steps are fine.
struct SmoothConvexProblem {
  int n = 0;
  SmoothFn objective;
  std::vector<SmoothFn> constraints;
  VecX lower, upper;  // +-infinity allowed; equal bounds pin a coordinate
  VecX start;         // optional strictly feasible hint
};

struct SmoothSolution {
  VecX x;
  SolverReport report;
};

namespace detail {

struct BarrierSetup {
  const SmoothConvexProblem* p = nullptr;
  std::vector<int> free_idx;  // non-pinned coordinates
  VecX pinned;                // full-size template with pinned values set

  VecX expand(const VecX& xr) const {
    VecX full = pinned;
    for (std::size_t i = 0; i < free_idx.size(); ++i) full[free_idx[i]] = xr[static_cast<Eigen::Index>(i)];
    return full;
  }
  VecX reduce(const VecX& full) const {
    VecX xr(static_cast<Eigen::Index>(free_idx.size()));
    for (std::size_t i = 0; i < free_idx.size(); ++i) xr[static_cast<Eigen::Index>(i)] = full[free_idx[i]];
    return xr;
  }
};

// One centering pass of damped Newton on
//   psi(x) = -t f(x) - sum ln(-g_i(x)) - box log terms.
// Returns false if progress stalls without reaching the decrement tolerance.
inline bool center(const BarrierSetup& su, double t, VecX& xr, int& newton_steps) {
  const auto& p = *su.p;
  const int nr = static_cast<int>(su.free_idx.size());

  auto eval_psi = [&](const VecX& x, bool with_derivs, double* psi, VecX* grad, MatX* hess) {
    const VecX full = su.expand(x);
    VecX gf(p.n);
    MatX hf(p.n, p.n);
    double val = p.objective(full, with_derivs ? &gf : nullptr, with_derivs ? &hf : nullptr);
    double acc = -t * val;
    VecX g = VecX::Zero(nr);
    MatX h = MatX::Zero(nr, nr);
    if (with_derivs) {
      for (int i = 0; i < nr; ++i) {
        g[i] = -t * gf[su.free_idx[static_cast<std::size_t>(i)]];
        for (int j = 0; j < nr; ++j)
          h(i, j) = -t * hf(su.free_idx[static_cast<std::size_t>(i)], su.free_idx[static_cast<std::size_t>(j)]);
      }
    }
    for (const auto& con : p.constraints) {
      VecX cg(p.n);
      MatX ch(p.n, p.n);
      const double cv = con(full, with_derivs ? &cg : nullptr, with_derivs ? &ch : nullptr);
      if (cv >= 0.0) return false;
      acc -= std::log(-cv);
      if (with_derivs) {
        VecX cgr(nr);
        for (int i = 0; i < nr; ++i) cgr[i] = cg[su.free_idx[static_cast<std::size_t>(i)]];
        g += cgr / (-cv);
        h += cgr * cgr.transpose() / (cv * cv);
        for (int i = 0; i < nr; ++i)
          for (int j = 0; j < nr; ++j)
            h(i, j) += ch(su.free_idx[static_cast<std::size_t>(i)], su.free_idx[static_cast<std::size_t>(j)]) / (-cv);
      }
    }
    for (int i = 0; i < nr; ++i) {
      const int fi = su.free_idx[static_cast<std::size_t>(i)];
      const double lo = p.lower.size() ? p.lower[fi] : -std::numeric_limits<double>::infinity();
      const double hi = p.upper.size() ? p.upper[fi] : std::numeric_limits<double>::infinity();
      if (std::isfinite(lo)) {
        const double d = x[i] - lo;
        if (d <= 0.0) return false;
        acc -= std::log(d);
        if (with_derivs) {
          g[i] -= 1.0 / d;
          h(i, i) += 1.0 / (d * d);
        }
      }
      if (std::isfinite(hi)) {
        const double d = hi - x[i];
        if (d <= 0.0) return false;
        acc -= std::log(d);
        if (with_derivs) {
          g[i] += 1.0 / d;
          h(i, i) += 1.0 / (d * d);
        }
      }
    }
    *psi = acc;
    if (with_derivs) {
      *grad = g;
      *hess = h;
    }
    return true;
  };

  for (int it = 0; it < 80; ++it) {
    double psi;
    VecX grad(nr);
    MatX hess(nr, nr);
    if (!eval_psi(xr, true, &psi, &grad, &hess)) return false;

    VecX dir;
    double reg = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
      MatX hreg = hess;
      if (reg > 0.0) hreg.diagonal().array() += reg;
      Eigen::LDLT<MatX> ldlt(hreg);
      if (ldlt.info() == Eigen::Success) {
        dir = ldlt.solve(-grad);
        if (dir.allFinite() && grad.dot(dir) < 0.0) break;
      }
      reg = reg == 0.0 ? 1e-10 * std::max(1.0, hess.trace()) : reg * 100.0;
      dir.resize(0);
    }
    if (dir.size() == 0) return false;

    const double decrement2 = -grad.dot(dir);
    ++newton_steps;
    if (decrement2 / 2.0 <= 1e-10) return true;

    double alpha = 1.0;
    bool stepped = false;
    for (int ls = 0; ls < 60; ++ls) {
      double psi_new;
      if (eval_psi(xr + alpha * dir, false, &psi_new, nullptr, nullptr) &&
          psi_new <= psi + 1e-4 * alpha * grad.dot(dir)) {
        xr += alpha * dir;
        stepped = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!stepped) return true;  // at numerical limit of progress
  }
  return true;
}

inline bool strictly_feasible(const SmoothConvexProblem& p, const VecX& x, double slack = 0.0) {
  for (const auto& con : p.constraints)
    if (con(x, nullptr, nullptr) >= -slack) return false;
  for (int i = 0; i < p.n; ++i) {
    const double lo = p.lower.size() ? p.lower[i] : -std::numeric_limits<double>::infinity();
    const double hi = p.upper.size() ? p.upper[i] : std::numeric_limits<double>::infinity();
    if (lo == hi) continue;  // pinned
    if (x[i] <= lo || x[i] >= hi) return false;
  }
  return true;
}

}  // namespace detail

inline SmoothSolution solve_smooth(const SmoothConvexProblem& p, double tol = 1e-8,
                                   int max_outer = 64);

namespace detail {

/// Phase I: minimize the worst constraint slack from an arbitrary box point.
inline bool phase_one(const SmoothConvexProblem& p, VecX& x0) {
  // box point
  VecX x(p.n);
  for (int i = 0; i < p.n; ++i) {
    const double lo = p.lower.size() ? p.lower[i] : -std::numeric_limits<double>::infinity();
    const double hi = p.upper.size() ? p.upper[i] : std::numeric_limits<double>::infinity();
    if (std::isfinite(lo) && std::isfinite(hi))
      x[i] = 0.5 * (lo + hi);
    else if (std::isfinite(lo))
      x[i] = lo + 1.0;
    else if (std::isfinite(hi))
      x[i] = hi - 1.0;
    else
      x[i] = 0.0;
  }
  double worst = 0.0;
  for (const auto& con : p.constraints) worst = std::max(worst, con(x, nullptr, nullptr));
  if (worst < 0.0) {
    x0 = x;
    return true;
  }

  SmoothConvexProblem aux;
  aux.n = p.n + 1;
  aux.lower = VecX::Constant(aux.n, -std::numeric_limits<double>::infinity());
  aux.upper = VecX::Constant(aux.n, std::numeric_limits<double>::infinity());
  if (p.lower.size()) aux.lower.head(p.n) = p.lower;
  if (p.upper.size()) aux.upper.head(p.n) = p.upper;
  aux.objective = [n = p.n](const VecX& y, VecX* g, MatX* h) {
    if (g) {
      g->setZero();
      (*g)[n] = -1.0;
    }
    if (h) h->setZero();
    return -y[n];
  };
  for (const auto& con : p.constraints) {
    aux.constraints.push_back([con, n = p.n](const VecX& y, VecX* g, MatX* h) {
      VecX xg(n);
      MatX xh(n, n);
      const double v = con(y.head(n), g ? &xg : nullptr, h ? &xh : nullptr);
      if (g) {
        g->setZero();
        g->head(n) = xg;
        (*g)[n] = -1.0;
      }
      if (h) {
        h->setZero();
        h->topLeftCorner(n, n) = xh;
      }
      return v - y[n];
    });
  }
  VecX start(aux.n);
  start.head(p.n) = x;
  start[p.n] = worst + 1.0;
  aux.start = start;
  SmoothSolution sol = solve_smooth(aux, 1e-9, 64);
  if (sol.x[p.n] >= 0.0) return false;
  x0 = sol.x.head(p.n);
  return strictly_feasible(p, x0);
}

}  // namespace detail

/// Log-barrier interior point with damped Newton centering. Reported
/// residual is the final duality gap bound m/t.
inline SmoothSolution solve_smooth(const SmoothConvexProblem& p, double tol, int max_outer) {
  detail::BarrierSetup su;
  su.p = &p;
  su.pinned = VecX::Zero(p.n);
  for (int i = 0; i < p.n; ++i) {
    const double lo = p.lower.size() ? p.lower[i] : -std::numeric_limits<double>::infinity();
    const double hi = p.upper.size() ? p.upper[i] : std::numeric_limits<double>::infinity();
    if (lo == hi && std::isfinite(lo))
      su.pinned[i] = lo;
    else
      su.free_idx.push_back(i);
  }

  SmoothSolution sol;
  VecX x0 = p.start;
  if (x0.size() == p.n) {
    for (int i = 0; i < p.n; ++i)  // pinned coordinates come from the bounds
      if (std::find(su.free_idx.begin(), su.free_idx.end(), i) == su.free_idx.end())
        x0[i] = su.pinned[i];
  }
  if (x0.size() != p.n || !detail::strictly_feasible(p, x0)) {
    VecX found;
    if (!detail::phase_one(p, found)) {
      sol.x = x0.size() == p.n ? x0 : VecX::Zero(p.n);
      sol.report.status = SolveStatus::infeasible;
      return sol;
    }
    x0 = found;
  }
  // pinned coordinates are taken from the bounds, not the start
  VecX xr = su.reduce(x0);

  int m_total = static_cast<int>(p.constraints.size());
  for (int i : su.free_idx) {
    if (p.lower.size() && std::isfinite(p.lower[i])) ++m_total;
    if (p.upper.size() && std::isfinite(p.upper[i])) ++m_total;
  }

  double t = 1.0;
  int newton_steps = 0;
  bool clean = true;
  for (int outer = 0; outer < max_outer; ++outer) {
    if (!su.free_idx.empty()) clean = detail::center(su, t, xr, newton_steps) && clean;
    if (m_total == 0 || m_total / t <= tol) break;
    t *= 20.0;
  }

  sol.x = su.expand(xr);
  sol.report.status = clean ? SolveStatus::optimal : SolveStatus::max_iters;
  sol.report.objective = p.objective(sol.x, nullptr, nullptr);
  sol.report.primal_residual = m_total / t;
  sol.report.dual_residual = 0.0;
  sol.report.iterations = newton_steps;
  return sol;
}

}  // namespace irsdp
