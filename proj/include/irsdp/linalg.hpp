#pragma once

#include <Eigen/Eigenvalues>

#include "irsdp/common.hpp"

namespace irsdp {

inline CMat hermitize(const CMat& a) { return 0.5 * (a + a.adjoint()); }

/// Nearest PSD matrix in Frobenius norm: eigenvalue clipping at zero.
inline CMat psd_project(const CMat& h) {
  Eigen::SelfAdjointEigenSolver<CMat> eig(hermitize(h));
  VecX lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().adjoint();
}

struct EigPair {
  double value = 0.0;
  CVec vector;
};

/// Largest (algebraic) eigenpair of a Hermitian matrix. Shifted power
/// iteration with a dense-eigensolver fallback when the gap is too small.
inline EigPair largest_eigpair(const CMat& h_in, double tol = 1e-10) {
  const CMat h = hermitize(h_in);
  const int n = static_cast<int>(h.rows());
  const double scale = std::max(h.norm(), 1e-300);

  // Gershgorin bound keeps the shifted matrix PSD-dominant.
  double shift = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) row += std::abs(h(i, j));
    shift = std::max(shift, row - std::real(h(i, i)));
  }
  const CMat b = h + (shift + 1e-6 * scale) * CMat::Identity(n, n);

  CVec u = CVec::Ones(n);
  for (int i = 0; i < n; ++i) u[i] += Complex(0.0, 1e-3 * (i + 1));
  u /= u.norm();
  for (int it = 0; it < 2000; ++it) {
    CVec w = b * u;
    const double nw = w.norm();
    if (nw <= 0.0) break;
    u = w / nw;
    if (it % 8 == 7) {
      const double lam = std::real(u.dot(h * u));
      if ((h * u - lam * u).norm() <= tol * scale) return {lam, u};
    }
  }

  Eigen::SelfAdjointEigenSolver<CMat> eig(h);
  const int last = n - 1;
  return {eig.eigenvalues()[last], eig.eigenvectors().col(last)};
}

/// Real embedding of a Hermitian matrix: V = X + iY maps to the symmetric
/// [[X, -Y], [Y, X]] of twice the dimension; PSD-ness is preserved and
/// <T(A), T(V)> = 2 Re Tr(A V).
inline MatX complex_to_real_embedding(const CMat& v) {
  const int m = static_cast<int>(v.rows());
  MatX w(2 * m, 2 * m);
  const MatX x = v.real();
  const MatX y = v.imag();
  w.topLeftCorner(m, m) = x;
  w.topRightCorner(m, m) = -y;
  w.bottomLeftCorner(m, m) = y;
  w.bottomRightCorner(m, m) = x;
  return w;
}

inline CMat real_embedding_to_complex(const MatX& w) {
  const int m = static_cast<int>(w.rows()) / 2;
  const MatX x = 0.5 * (w.topLeftCorner(m, m) + w.bottomRightCorner(m, m));
  const MatX y = 0.5 * (w.bottomLeftCorner(m, m) - w.topRightCorner(m, m));
  CMat v(m, m);
  v.real() = x;
  v.imag() = y;
  return hermitize(v);
}

}  // namespace irsdp
