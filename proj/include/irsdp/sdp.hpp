#pragma once

#include <functional>

#include "irsdp/linalg.hpp"
#include "irsdp/splitting.hpp"

namespace irsdp {

enum class Sense { ge, eq, le };

/// Diagonal-constrained complex SDP over the lifted reflection matrix:
/// maximize Re Tr(C V) subject to trace constraints, unit diagonal, V PSD.
/// An empty objective turns the instance into a feasibility problem.
struct SdpProblem {
  struct TraceConstraint {
    CMat a;  // Hermitian
    Sense sense = Sense::ge;
    double bound = 0.0;
  };

  int dim = 0;
  CMat objective;  // empty => feasibility
  std::vector<TraceConstraint> trace_constraints;
  bool diag_one = true;

  bool is_feasibility() const { return objective.size() == 0 || objective.norm() == 0.0; }
};

struct SdpSolution {
  CMat v;
  SolverReport report;
};

/// Adds `scale * Re Tr(A V)` to the pending row of a program whose PSD block
/// holds the real embedding of V.
inline void row_trace(ConeProgram& prog, int block, const CMat& a, double scale = 1.0) {
  prog.row_psd(block, (0.5 * scale) * complex_to_real_embedding(a));
}

inline void objective_trace(ConeProgram& prog, int block, const CMat& a, double scale = 1.0) {
  prog.add_objective_psd(block, (0.5 * scale) * complex_to_real_embedding(a));
}

/// Unit-diagonal rows for the embedded block: (W_mm + W_{M+m,M+m})/2 = 1.
inline void add_diag_one_rows(ConeProgram& prog, int block, int m) {
  for (int i = 0; i < m; ++i) {
    prog.begin_row(1.0);
    prog.row_entry(block, i, i, 0.5);
    prog.row_entry(block, m + i, m + i, 0.5);
    prog.end_row_eq();
  }
}

/// Complex Hermitian SDPs run through the real embedding of doubled
/// dimension so the splitting core only ever projects real symmetric blocks.
/// Feasibility instances maximize a common margin on all inequality rows; a
/// clearly negative optimal margin certifies infeasibility.
inline SdpSolution solve_sdp(const SdpProblem& p, double tol = 1e-6, int max_iters = 50000,
                             ConeProgram::State* warm = nullptr) {
  ConeProgram prog;
  const int blk = prog.add_psd_block(2 * p.dim);
  if (p.diag_one) add_diag_one_rows(prog, blk, p.dim);

  const bool feasibility = p.is_feasibility();
  int margin = -1;
  double bound_scale = 1.0;
  if (feasibility) {
    margin = prog.add_scalar(false);
    prog.add_objective(margin, 1.0);
    for (const auto& tc : p.trace_constraints)
      bound_scale = std::max(bound_scale, std::abs(tc.bound));
    prog.begin_row(10.0 * bound_scale);
    prog.row_coeff(margin, 1.0);
    prog.end_row_le();
  } else {
    objective_trace(prog, blk, p.objective);
  }

  for (const auto& tc : p.trace_constraints) {
    if (tc.sense == Sense::eq) {
      prog.begin_row(tc.bound);
      row_trace(prog, blk, tc.a);
      prog.end_row_eq();
      continue;
    }
    // normalize to <=
    const double sgn = tc.sense == Sense::le ? 1.0 : -1.0;
    prog.begin_row(sgn * tc.bound);
    row_trace(prog, blk, tc.a, sgn);
    if (margin >= 0) prog.row_coeff(margin, 1.0);
    prog.end_row_le();
  }

  ConeProgram::Options opt;
  opt.tol = tol;
  opt.max_iters = max_iters;
  SolverReport rep = prog.solve(opt, warm);

  SdpSolution sol;
  sol.v = real_embedding_to_complex(prog.psd_value(blk));
  sol.report = rep;
  if (feasibility && rep.status == SolveStatus::optimal) {
    const double delta = prog.value(margin);
    if (delta < -1e-5 * bound_scale) sol.report.status = SolveStatus::infeasible;
    sol.report.objective = delta;
  }
  return sol;
}

/// A lifted reflection subproblem: a fully assembled program plus the block
/// holding the embedded V. Builders hand these to the SROCR loop.
struct LiftedProblem {
  ConeProgram prog;
  int v_block = 0;
  int dim = 0;

  CMat extract() { return real_embedding_to_complex(prog.psd_value(v_block)); }
};

using LiftedBuilder = std::function<LiftedProblem(double omega, const CMat& v_prev)>;

}  // namespace irsdp
