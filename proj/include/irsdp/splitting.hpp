#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <ostream>
#include <vector>

#include "irsdp/common.hpp"

namespace irsdp {

/// Block-structured conic program solved by ADMM over the splitting
///
///   maximize  obj'x + sum_j a_j ln(off_j + x[t_j])
///   s.t.      G x = h,   x in K
///
/// where K is a product of small PSD cones (stored in scaled svec form so
/// that matrix inner products are plain dot products), nonnegative scalars,
/// and free scalars. The x-update is a projection onto the affine set, the
/// z-update applies per-block projections/proximal maps. Inequality rows are
/// expressed by the caller through nonnegative slack scalars.
///
/// Instances hold private workspace and are not re-entrant.
class ConeProgram {
public:
  struct Options {
    double tol = 1e-6;
    int max_iters = 50000;
    double rho = 1.0;
    double over_relax = 1.6;
    std::ostream* trace = nullptr;
  };

  /// Warm-start state; reusable across solves with an identical layout.
  struct State {
    VecX x, z, u;
    double rho = 0.0;
  };

  int add_psd_block(int dim) {
    PsdBlock b;
    b.dim = dim;
    b.offset = n_;
    n_ += dim * (dim + 1) / 2;
    psd_blocks_.push_back(b);
    return static_cast<int>(psd_blocks_.size()) - 1;
  }

  /// Returns the coordinate index of a new scalar variable.
  int add_scalar(bool nonneg) {
    const int c = n_++;
    if (nonneg) nonneg_coords_.push_back(c);
    return c;
  }

  /// Adds `weight * ln(offset + x[coord])` to the maximized objective.
  /// The coordinate must be a free scalar; the prox keeps it in-domain.
  void add_log_term(int coord, double weight, double offset) {
    logs_.push_back({coord, weight, offset});
  }

  void add_objective(int coord, double c) { obj_.emplace_back(coord, c); }

  /// Adds `<a, X_block>` to the maximized objective (a symmetric).
  void add_objective_psd(int block, const MatX& a) {
    append_svec(obj_, psd_blocks_[static_cast<std::size_t>(block)].offset, a);
  }

  // -- row construction (equality rows; inequalities go through slacks) --
  void begin_row(double rhs) {
    row_.clear();
    rhs_pending_ = rhs;
  }
  void row_coeff(int coord, double c) { row_.emplace_back(coord, c); }
  void row_psd(int block, const MatX& a) {
    append_svec(row_, psd_blocks_[static_cast<std::size_t>(block)].offset, a);
  }
  /// Coefficient on a single symmetric-matrix entry: adds c * X_ij.
  void row_entry(int block, int i, int j, double c) {
    const auto& b = psd_blocks_[static_cast<std::size_t>(block)];
    if (i > j) std::swap(i, j);
    row_.emplace_back(b.offset + svec_index(j, i), i == j ? c : c * M_SQRT1_2);
  }
  /// Commits the pending row as sum == rhs.
  void end_row_eq() { commit_row(); }
  /// Commits the pending row as sum <= rhs by attaching a fresh slack.
  void end_row_le() {
    row_.emplace_back(add_scalar(true), 1.0);
    commit_row();
  }

  int num_coords() const { return n_; }
  int num_rows() const { return static_cast<int>(rows_.size()); }

  SolverReport solve(const Options& opt, State* warm = nullptr) {
    const int n = n_;
    const int r = num_rows();

    // Row-normalized constraint matrix.
    MatX g = MatX::Zero(r, n);
    VecX h(r);
    for (int i = 0; i < r; ++i) {
      double nrm = 0.0;
      for (const auto& [c, v] : rows_[static_cast<std::size_t>(i)].coeffs) nrm += v * v;
      nrm = std::sqrt(std::max(nrm, 1e-300));
      for (const auto& [c, v] : rows_[static_cast<std::size_t>(i)].coeffs) g(i, c) += v / nrm;
      h[i] = rows_[static_cast<std::size_t>(i)].rhs / nrm;
    }
    MatX gram = g * g.transpose();
    gram.diagonal().array() += 1e-12 * std::max(1.0, gram.trace());
    Eigen::LDLT<MatX> ldlt(gram);

    VecX cmin = VecX::Zero(n);  // minimization objective
    for (const auto& [c, v] : obj_) cmin[c] -= v;

    VecX x = VecX::Zero(n), z = VecX::Zero(n), u = VecX::Zero(n);
    double rho = opt.rho;
    if (warm && warm->x.size() == n) {
      x = warm->x;
      z = warm->z;
      u = warm->u;
      rho = warm->rho > 0 ? warm->rho : rho;
    }

    SolverReport rep;
    VecX z_prev = z;
    for (int it = 0; it < opt.max_iters; ++it) {
      // x-step: affine projection of (z - u - cmin/rho).
      VecX v = z - u - cmin / rho;
      if (r > 0) {
        VecX y = ldlt.solve(g * v - h);
        x = v - g.transpose() * y;
      } else {
        x = v;
      }

      // z-step with over-relaxation.
      z_prev = z;
      const VecX xr = opt.over_relax * x + (1.0 - opt.over_relax) * z;
      VecX y = xr + u;
      project_cones(y, rho);
      z = y;
      u += xr - z;

      const double rp = (x - z).norm() / std::max({1.0, x.norm(), z.norm()});
      const double rd = rho * (z - z_prev).norm() / std::max(1.0, rho * u.norm());
      if (opt.trace) (*opt.trace) << rp << ' ' << rd << '\n';

      if (rp < opt.tol && rd < opt.tol) {
        rep.status = SolveStatus::optimal;
        rep.primal_residual = rp;
        rep.dual_residual = rd;
        rep.iterations = it + 1;
        break;
      }
      if ((it + 1) % 25 == 0) {
        if (rp > 10.0 * rd && rho < 1e8) {
          rho *= 2.0;
          u /= 2.0;
        } else if (rd > 10.0 * rp && rho > 1e-6) {
          rho /= 2.0;
          u *= 2.0;
        }
      }
      rep.primal_residual = rp;
      rep.dual_residual = rd;
      rep.iterations = it + 1;
    }

    z_ = z;
    rep.objective = objective_at(z);
    if (warm) {
      warm->x = x;
      warm->z = z;
      warm->u = u;
      warm->rho = rho;
    }
    return rep;
  }

  // -- solution access (cone-feasible z point) --
  double value(int coord) const { return z_[coord]; }

  MatX psd_value(int block) const {
    const auto& b = psd_blocks_[static_cast<std::size_t>(block)];
    return smat(z_.segment(b.offset, b.dim * (b.dim + 1) / 2), b.dim);
  }

  double objective_at(const VecX& pt) const {
    double val = 0.0;
    for (const auto& [c, v] : obj_) val += v * pt[c];
    for (const auto& lt : logs_) val += lt.weight * std::log(std::max(lt.offset + pt[lt.coord], 1e-300));
    return val;
  }

  static MatX smat(const VecX& s, int dim) {
    MatX m(dim, dim);
    int idx = 0;
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i <= j; ++i) {
        m(i, j) = i == j ? s[idx] : s[idx] * M_SQRT1_2;
        m(j, i) = m(i, j);
        ++idx;
      }
    return m;
  }

private:
  struct PsdBlock {
    int dim = 0;
    int offset = 0;
  };
  struct LogTerm {
    int coord;
    double weight;
    double offset;
  };
  struct Row {
    std::vector<std::pair<int, double>> coeffs;
    double rhs;
  };

  static int svec_index(int col, int row) { return col * (col + 1) / 2 + row; }  // row <= col

  void append_svec(std::vector<std::pair<int, double>>& dst, int offset, const MatX& a) {
    int idx = 0;
    for (int j = 0; j < a.cols(); ++j)
      for (int i = 0; i <= j; ++i) {
        const double v = i == j ? a(i, i) : M_SQRT2 * a(i, j);
        if (v != 0.0) dst.emplace_back(offset + idx, v);
        ++idx;
      }
  }

  void commit_row() {
    rows_.push_back({row_, rhs_pending_});
    row_.clear();
  }

  void project_cones(VecX& y, double rho) {
    for (const auto& b : psd_blocks_) {
      const int len = b.dim * (b.dim + 1) / 2;
      MatX m = smat(y.segment(b.offset, len), b.dim);
      Eigen::SelfAdjointEigenSolver<MatX> eig(m);
      VecX lam = eig.eigenvalues().cwiseMax(0.0);
      MatX proj = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
      int idx = 0;
      for (int j = 0; j < b.dim; ++j)
        for (int i = 0; i <= j; ++i) {
          y[b.offset + idx] = i == j ? proj(i, i) : M_SQRT2 * proj(i, j);
          ++idx;
        }
    }
    for (int c : nonneg_coords_) y[c] = std::max(y[c], 0.0);
    for (const auto& lt : logs_) {
      // prox of -a ln(off + t) at y: positive root of the stationarity quadratic.
      const double a = lt.weight, off = lt.offset, v = y[lt.coord];
      const double disc = rho * rho * (off + v) * (off + v) + 4.0 * rho * a;
      y[lt.coord] = (rho * (v - off) + std::sqrt(disc)) / (2.0 * rho);
    }
  }

  int n_ = 0;
  std::vector<PsdBlock> psd_blocks_;
  std::vector<int> nonneg_coords_;
  std::vector<LogTerm> logs_;
  std::vector<std::pair<int, double>> obj_;
  std::vector<Row> rows_;
  std::vector<std::pair<int, double>> row_;
  double rhs_pending_ = 0.0;
  VecX z_;
};

}  // namespace irsdp
