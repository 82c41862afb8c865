#pragma once

#include "eofdual/linalg.hpp"

#include <cstdint>
#include <random>

namespace eofdual {

/// splitmix64 finalizer; used to derive independent sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic sub-seed for stream `index` of `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(mix_seed(seed) ^ mix_seed(index + 0x632BE59BD9B4E019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re * M_SQRT1_2, im * M_SQRT1_2};
  }
  Matrix complex_gaussian(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = complex_normal();
    return m;
  }
  Vector complex_gaussian(Eigen::Index n) { return complex_gaussian(n, 1).col(0); }
  RealVector real_gaussian(Eigen::Index n) {
    RealVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline constexpr double kFilterFloor = 1e-6;

/// Haar-distributed unit vector.
inline PureStateVector sample_haar_pure(const BipartiteDims& dims, std::uint64_t seed) {
  Rng rng(seed);
  return PureStateVector::normalized(dims, rng.complex_gaussian(dims.total()));
}

/// Induced-measure state G G^dagger / Tr with G of size n x rank; rank 0 means n (full rank).
inline DensityMatrix sample_ginibre_density(const BipartiteDims& dims, std::uint64_t seed, int rank = 0) {
  Rng rng(seed);
  const auto n = dims.total();
  const Matrix g = rng.complex_gaussian(n, rank > 0 ? rank : n);
  return DensityMatrix::normalized(dims, g * g.adjoint());
}

/// Gaussian Hermitian matrix (GUE normalization, unit-variance diagonal).
inline HermitianOperator sample_hermitian(const BipartiteDims& dims, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = dims.total();
  const Matrix g = rng.complex_gaussian(n, n);
  return {dims, (g + g.adjoint()) * M_SQRT1_2};
}

/// Operator with spectrum in [kFilterFloor, 1]: (H/||H|| + I)/2 for Gaussian H, clipped.
inline HermitianOperator sample_filter_m(const BipartiteDims& dims, std::uint64_t seed) {
  const HermitianOperator h = sample_hermitian(dims, seed);
  Spectrum s = eigh(h);
  const double scale = s.eigenvalues.cwiseAbs().maxCoeff();
  RealVector mapped = (s.eigenvalues / scale).array() * 0.5 + 0.5;
  mapped = mapped.cwiseMax(kFilterFloor).cwiseMin(1.0);
  return {dims, from_spectrum(s.eigenvectors, mapped)};
}

/// Haar unitary via QR of a Ginibre matrix with phase correction.
inline Matrix sample_unitary(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix g = rng.complex_gaussian(n, n);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex d = r(i, i);
    const double a = std::abs(d);
    if (a > 0) q.col(i) *= d / a;
  }
  return q;
}

}  // namespace eofdual
