#pragma once

// Independent reference computations used as test oracles.  They avoid the
// library code paths they check (explicit loops, non-Hermitian eigensolvers).

#include "eofdual/eofdual.hpp"

#include <Eigen/Eigenvalues>

namespace oracle {

using eofdual::Complex;
using eofdual::Matrix;
using eofdual::Vector;

inline Vector bell_vector() {
  Vector v = Vector::Zero(4);
  v(0) = v(3) = M_SQRT1_2;
  return v;
}

inline Matrix bell_projector() { return bell_vector() * bell_vector().adjoint(); }

/// p Bell + (1-p) I/4
inline Matrix werner_like(double p) { return p * bell_projector() + (1 - p) * Matrix::Identity(4, 4) / 4.0; }

/// Tr_B by explicit summation, A-major layout.
inline Matrix trace_out_b(const Matrix& m, int da, int db) {
  Matrix out = Matrix::Zero(da, da);
  for (int a = 0; a < da; ++a)
    for (int a2 = 0; a2 < da; ++a2)
      for (int b = 0; b < db; ++b) out(a, a2) += m(a * db + b, a2 * db + b);
  return out;
}

inline Matrix trace_out_a(const Matrix& m, int da, int db) {
  Matrix out = Matrix::Zero(db, db);
  for (int b = 0; b < db; ++b)
    for (int b2 = 0; b2 < db; ++b2)
      for (int a = 0; a < da; ++a) out(b, b2) += m(a * db + b, a * db + b2);
  return out;
}

inline double entropy(const Matrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
  double s = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double x = es.eigenvalues()(i);
    if (x > 1e-300) s -= x * std::log(x);
  }
  return s;
}

/// Wootters formula with the textbook recipe: square roots of the eigenvalues
/// of the non-Hermitian product rho (sy x sy) rho* (sy x sy).  Evaluated in
/// long double since rank-deficient states put eigenvalues at rounding level.
inline double wootters(const Matrix& rho) {
  using LComplex = std::complex<long double>;
  using LMatrix = Eigen::Matrix<LComplex, Eigen::Dynamic, Eigen::Dynamic>;
  const LMatrix r_l = rho.cast<LComplex>();
  LMatrix flip = LMatrix::Zero(4, 4);
  flip(0, 3) = flip(3, 0) = -1;
  flip(1, 2) = flip(2, 1) = 1;
  const LMatrix r = r_l * flip * r_l.conjugate() * flip;
  Eigen::ComplexEigenSolver<LMatrix> es(r);
  std::vector<long double> l;
  for (int i = 0; i < 4; ++i) l.push_back(std::sqrt(std::max(0.0L, es.eigenvalues()(i).real())));
  std::sort(l.rbegin(), l.rend());
  const double c = static_cast<double>(std::max(0.0L, l[0] - l[1] - l[2] - l[3]));
  const double x = (1 + std::sqrt(std::max(0.0, 1 - c * c))) / 2;
  auto h = [](double t) { return t <= 0 || t >= 1 ? 0.0 : -t * std::log(t) - (1 - t) * std::log(1 - t); };
  return h(x);
}

/// Werner-Holevo map applied through its defining formula (no Kraus operators).
inline Matrix werner_holevo_apply(const Matrix& rho, int d) {
  return (rho.trace() * Matrix::Identity(d, d) - rho.transpose()) / double(d - 1);
}

/// (L (x) L)(X) for the Werner-Holevo map L, by linearity over matrix units.
inline Matrix werner_holevo_pair_apply(const Matrix& x, int d) {
  const int n = d * d;
  Matrix out = Matrix::Zero(n, n);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          const Complex c = x(i * d + k, j * d + l);
          if (c == Complex(0)) continue;
          Matrix e1 = Matrix::Zero(d, d), e2 = Matrix::Zero(d, d);
          e1(i, j) = 1;
          e2(k, l) = 1;
          out += c * Eigen::kroneckerProduct(werner_holevo_apply(e1, d), werner_holevo_apply(e2, d)).eval();
        }
  return out;
}

inline double schatten_psd(const Matrix& m, double q) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  double s = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) s += std::pow(std::max(0.0, es.eigenvalues()(i)), q);
  return std::pow(s, 1 / q);
}

}  // namespace oracle
