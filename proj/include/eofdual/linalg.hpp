#pragma once

#include "eofdual/types.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <numeric>
#include <vector>

namespace eofdual {

inline constexpr double kOperatorNorm = std::numeric_limits<double>::infinity();
inline constexpr double kRankTolerance = 1e-10;

// ---------------------------------------------------------------------------
// spectra

inline Spectrum eigh(const Matrix& h) {
  if (h.rows() != h.cols()) {
    throw ShapeError(detail::concat("eigh: matrix is ", h.rows(), "x", h.cols()));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success) {
    throw DecompositionError(detail::concat("eigh: eigensolver did not converge (size ", h.rows(),
                                            ", Frobenius norm ", h.norm(), ", max |entry| ",
                                            h.cwiseAbs().maxCoeff(), ")"));
  }
  const auto n = h.rows();
  Spectrum s;
  s.eigenvalues = es.eigenvalues().reverse();
  s.eigenvectors = es.eigenvectors().rowwise().reverse();
  if (n == 0) s.eigenvectors.resize(0, 0);
  return s;
}

inline Spectrum eigh(const HermitianOperator& h) { return eigh(h.matrix()); }

inline double lambda_max(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

/// V diag(values) V^dagger
inline Matrix from_spectrum(const Matrix& vectors, const RealVector& values) {
  return vectors * values.cast<Complex>().asDiagonal() * vectors.adjoint();
}

struct MatrixFunction {
  enum class Kind { log, exp, power };
  Kind kind = Kind::exp;
  double exponent = 1.0;

  static MatrixFunction log() { return {Kind::log, 0.0}; }
  static MatrixFunction exp() { return {Kind::exp, 0.0}; }
  static MatrixFunction power(double t) { return {Kind::power, t}; }
};

/// Spectral application f(h) = V diag(f(lambda)) V^dagger.
///
/// log and negative powers require a positive definite argument; for
/// singular PSD operators use restricted_log().  Non-negative non-integer
/// powers clamp eigenvalues in [-kStateEigenvalueTolerance, 0) to zero.
inline Matrix matrix_fn(const Matrix& h, MatrixFunction fn) {
  const Spectrum s = eigh(h);
  RealVector f(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double x = s.eigenvalues(i);
    switch (fn.kind) {
      case MatrixFunction::Kind::exp:
        f(i) = std::exp(x);
        break;
      case MatrixFunction::Kind::log:
        if (x <= 0.0) {
          throw DomainError(detail::concat("matrix log of an operator with eigenvalue ", x,
                                           "; use restricted_log for singular operators"));
        }
        f(i) = std::log(x);
        break;
      case MatrixFunction::Kind::power:
        if (fn.exponent < 0.0 && x <= 0.0) {
          throw DomainError(detail::concat("negative power ", fn.exponent, " of eigenvalue ", x));
        }
        if (x < 0.0) {
          if (x < -kStateEigenvalueTolerance) {
            throw DomainError(detail::concat("fractional power of eigenvalue ", x));
          }
          f(i) = fn.exponent == 0.0 ? 1.0 : 0.0;
        } else {
          f(i) = std::pow(x, fn.exponent);
        }
        break;
    }
  }
  return from_spectrum(s.eigenvectors, f);
}

inline HermitianOperator matrix_fn(const HermitianOperator& h, MatrixFunction fn) {
  return {h.dims(), matrix_fn(h.matrix(), fn)};
}

/// Logarithm of a PSD operator computed on its support.
///
/// Eigenvalues above rank_tol form the support; log_on_support is zero on
/// the complement.  Tr[rho log M] is minus infinity whenever rho leaks out of
/// the support, which trace_with() reports through ExtendedReal.
struct RestrictedLog {
  HermitianOperator log_on_support;
  Matrix support_basis;  // columns: orthonormal basis of ran(M)
  int complement_dim = 0;

  [[nodiscard]] bool full_rank() const { return complement_dim == 0; }
  [[nodiscard]] Matrix support_projector() const { return support_basis * support_basis.adjoint(); }

  /// Tr[rho log M] with the minus-infinity convention off the support.
  [[nodiscard]] ExtendedReal trace_with(const Matrix& rho, double leak_tol = 1e-10) const {
    if (complement_dim > 0) {
      const Matrix p = support_projector();
      const double leak = (rho - p * rho * p).cwiseAbs().maxCoeff();
      if (leak > leak_tol) return ExtendedReal::minus_infinity();
    }
    return (rho * log_on_support.matrix()).trace().real();
  }
};

inline RestrictedLog restricted_log(const HermitianOperator& m, double rank_tol = kRankTolerance) {
  const Spectrum s = eigh(m);
  if (s.eigenvalues.size() > 0 && s.eigenvalues.minCoeff() < -rank_tol) {
    throw DomainError(detail::concat("restricted_log: operator has negative eigenvalue ",
                                     s.eigenvalues.minCoeff()));
  }
  const auto n = s.eigenvalues.size();
  Eigen::Index rank = 0;
  while (rank < n && s.eigenvalues(rank) > rank_tol) ++rank;
  RestrictedLog out;
  out.support_basis = s.eigenvectors.leftCols(rank);
  out.complement_dim = static_cast<int>(n - rank);
  RealVector logs = s.eigenvalues.head(rank).array().log();
  out.log_on_support = HermitianOperator(m.dims(), from_spectrum(out.support_basis, logs));
  return out;
}

// ---------------------------------------------------------------------------
// entropy and norms

/// -sum x ln x over the given eigenvalues, with 0 ln 0 = 0.
inline double entropy_of(const RealVector& eigenvalues) {
  double s = 0.0;
  for (double x : eigenvalues) {
    if (x > 0.0) s -= x * std::log(x);
  }
  return s;
}

inline double von_neumann_entropy(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix(), Eigen::EigenvaluesOnly);
  return entropy_of(es.eigenvalues());
}

/// (sum |x_i|^q)^(1/q), scaled to avoid overflow; q == kOperatorNorm gives max |x_i|.
inline double schatten_from_values(const RealVector& values, double q) {
  if (!(q >= 1.0)) throw DomainError(detail::concat("Schatten index q must be >= 1, got ", q));
  const double top = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
  if (top == 0.0) return 0.0;
  if (std::isinf(q)) return top;
  double acc = 0.0;
  for (double x : values) acc += std::pow(std::abs(x) / top, q);
  return top * std::pow(acc, 1.0 / q);
}

/// Schatten q-norm from singular values.
inline double schatten_norm(const Matrix& m, double q) {
  if (!(q >= 1.0)) throw DomainError(detail::concat("Schatten index q must be >= 1, got ", q));
  Eigen::JacobiSVD<Matrix> svd(m);
  return schatten_from_values(svd.singularValues(), q);
}

/// Hermitian input: singular values are |eigenvalues|.
inline double schatten_norm(const HermitianOperator& h, double q) {
  if (!(q >= 1.0)) throw DomainError(detail::concat("Schatten index q must be >= 1, got ", q));
  Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix(), Eigen::EigenvaluesOnly);
  return schatten_from_values(es.eigenvalues(), q);
}

// ---------------------------------------------------------------------------
// tensor structure

namespace detail {

/// Tensor factor dimensions in basis order: [A, B] or [A1, B1, A2, B2].
inline std::vector<int> factor_dims(const BipartiteDims& d) {
  if (d.copies == 1) return {d.dim_a, d.dim_b};
  return {d.dim_a, d.dim_b, d.dim_a, d.dim_b};
}

/// index map for reordering tensor factors: result[new_index] = old_index,
/// where new factor k is old factor perm[k].
inline std::vector<Eigen::Index> factor_permutation(const std::vector<int>& dims,
                                                    const std::vector<int>& perm) {
  const auto nf = dims.size();
  std::vector<int> new_dims(nf);
  for (std::size_t k = 0; k < nf; ++k) new_dims[k] = dims[perm[k]];
  std::vector<Eigen::Index> old_stride(nf);
  Eigen::Index stride = 1;
  for (std::size_t k = nf; k-- > 0;) {
    old_stride[k] = stride;
    stride *= dims[k];
  }
  std::vector<Eigen::Index> out(stride);
  std::vector<int> digit(nf, 0);
  for (Eigen::Index idx = 0; idx < stride; ++idx) {
    Eigen::Index old = 0;
    for (std::size_t k = 0; k < nf; ++k) old += digit[k] * old_stride[perm[k]];
    out[idx] = old;
    for (std::size_t k = nf; k-- > 0;) {
      if (++digit[k] < new_dims[k]) break;
      digit[k] = 0;
    }
  }
  return out;
}

inline Matrix permute_matrix(const Matrix& m, const std::vector<Eigen::Index>& map) {
  const auto n = static_cast<Eigen::Index>(map.size());
  Matrix out(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) out(i, j) = m(map[i], map[j]);
  return out;
}

inline Vector permute_vector(const Vector& v, const std::vector<Eigen::Index>& map) {
  Vector out(static_cast<Eigen::Index>(map.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = v(map[i]);
  return out;
}

/// Traces out every factor whose keep flag is false.
inline Matrix trace_out(const Matrix& m, const std::vector<int>& dims, const std::vector<bool>& keep) {
  std::vector<int> order;
  int kept_dim = 1, traced_dim = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (keep[k]) {
      order.push_back(static_cast<int>(k));
      kept_dim *= dims[k];
    }
  }
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (!keep[k]) {
      order.push_back(static_cast<int>(k));
      traced_dim *= dims[k];
    }
  }
  const Matrix p = permute_matrix(m, factor_permutation(dims, order));
  Matrix out = Matrix::Zero(kept_dim, kept_dim);
  for (int t = 0; t < traced_dim; ++t) {
    for (int j = 0; j < kept_dim; ++j)
      for (int i = 0; i < kept_dim; ++i) out(i, j) += p(i * traced_dim + t, j * traced_dim + t);
  }
  return out;
}

}  // namespace detail

enum class Party { A, B };

/// Traces out `party` in every copy.  The result lives on the other party
/// and is labelled with dims {d_other, 1, copies}.
inline Matrix partial_trace(const Matrix& m, const BipartiteDims& dims, Party party) {
  require_square(m, dims, "partial_trace");
  const auto fd = detail::factor_dims(dims);
  std::vector<bool> keep(fd.size());
  for (std::size_t k = 0; k < fd.size(); ++k) keep[k] = (k % 2 == 0) ? party == Party::B : party == Party::A;
  return detail::trace_out(m, fd, keep);
}

inline BipartiteDims traced_dims(const BipartiteDims& dims, Party party) {
  return {party == Party::A ? dims.dim_b : dims.dim_a, 1, dims.copies};
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, Party party) {
  return DensityMatrix::normalized(traced_dims(rho.dims(), party),
                                   partial_trace(rho.matrix(), rho.dims(), party));
}

/// Reduction of a two-copy operator to copy `keep` (0 = I, 1 = II).
inline Matrix reduce_to_copy(const Matrix& m, const BipartiteDims& dims, int keep) {
  require_square(m, dims, "reduce_to_copy");
  if (dims.copies != 2) throw ShapeError("reduce_to_copy needs a two-copy operator");
  if (keep != 0 && keep != 1) throw ShapeError(detail::concat("copy index must be 0 or 1, got ", keep));
  const std::vector<bool> mask = keep == 0 ? std::vector<bool>{true, true, false, false}
                                           : std::vector<bool>{false, false, true, true};
  return detail::trace_out(m, detail::factor_dims(dims), mask);
}

inline DensityMatrix reduce_to_copy(const DensityMatrix& rho, int keep) {
  return DensityMatrix::normalized(rho.dims().single_copy(), reduce_to_copy(rho.matrix(), rho.dims(), keep));
}

/// Regroups a two-copy object as a single bipartite system A1A2 | B1B2.
inline BipartiteDims grouped_dims(const BipartiteDims& dims) {
  if (dims.copies != 2) throw ShapeError("grouping needs a two-copy object");
  return {dims.dim_a * dims.dim_a, dims.dim_b * dims.dim_b, 1};
}

namespace detail {
inline std::vector<Eigen::Index> grouping_map(const BipartiteDims& dims) {
  return factor_permutation(factor_dims(dims), {0, 2, 1, 3});
}
}  // namespace detail

inline Matrix group_copies(const Matrix& m, const BipartiteDims& dims) {
  require_square(m, dims, "group_copies");
  (void)grouped_dims(dims);
  return detail::permute_matrix(m, detail::grouping_map(dims));
}

inline DensityMatrix group_copies(const DensityMatrix& rho) {
  return {grouped_dims(rho.dims()), group_copies(rho.matrix(), rho.dims())};
}

inline HermitianOperator group_copies(const HermitianOperator& h) {
  return {grouped_dims(h.dims()), group_copies(h.matrix(), h.dims())};
}

inline PureStateVector group_copies(const PureStateVector& psi) {
  return PureStateVector::normalized(grouped_dims(psi.dims()),
                                     detail::permute_vector(psi.amplitudes(), detail::grouping_map(psi.dims())));
}

/// Inverse of group_copies for a two-copy layout `dims`.
inline Vector ungroup_copies(const Vector& v, const BipartiteDims& dims) {
  const auto map = detail::grouping_map(dims);
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out(map[i]) = v(i);
  return out;
}

/// Amplitudes of a single-copy vector as a dA x dB coefficient matrix.
inline Matrix coefficient_matrix(const Vector& psi, int dim_a, int dim_b) {
  Matrix c(dim_a, dim_b);
  for (int a = 0; a < dim_a; ++a)
    for (int b = 0; b < dim_b; ++b) c(a, b) = psi(a * dim_b + b);
  return c;
}

inline Vector from_coefficient_matrix(const Matrix& c) {
  Vector v(c.size());
  for (Eigen::Index a = 0; a < c.rows(); ++a)
    for (Eigen::Index b = 0; b < c.cols(); ++b) v(a * c.cols() + b) = c(a, b);
  return v;
}

// ---------------------------------------------------------------------------
// Kronecker products

inline Matrix kron(const Matrix& x, const Matrix& y) { return Eigen::kroneckerProduct(x, y).eval(); }

/// Product of a local operator on H_A with one on H_B.
inline Operator kron_ab(const Matrix& on_a, const Matrix& on_b) {
  if (on_a.rows() != on_a.cols() || on_b.rows() != on_b.cols()) {
    throw ShapeError("kron_ab expects square local operators");
  }
  return {BipartiteDims(static_cast<int>(on_a.rows()), static_cast<int>(on_b.rows()), 1), kron(on_a, on_b)};
}

/// The I-II product of two single-copy operators of equal dims.
inline Operator kron_copies(const Operator& x, const Operator& y) {
  if (x.dims.copies != 1 || y.dims.copies != 1) {
    throw ShapeError("kron_copies: operands must be single-copy operators");
  }
  if (!(x.dims == y.dims)) {
    throw ShapeError(detail::concat("kron_copies: dims differ: ", x.dims, " vs ", y.dims));
  }
  require_square(x.matrix, x.dims, "kron_copies");
  require_square(y.matrix, y.dims, "kron_copies");
  return {BipartiteDims(x.dims.dim_a, x.dims.dim_b, 2), kron(x.matrix, y.matrix)};
}

inline HermitianOperator kron_copies(const HermitianOperator& x, const HermitianOperator& y) {
  const Operator o = kron_copies(Operator{x.dims(), x.matrix()}, Operator{y.dims(), y.matrix()});
  return {o.dims, o.matrix};
}

inline DensityMatrix kron_copies(const DensityMatrix& x, const DensityMatrix& y) {
  const Operator o = kron_copies(Operator{x.dims(), x.matrix()}, Operator{y.dims(), y.matrix()});
  return {o.dims, o.matrix};
}

/// Z = X1 (x) I + I (x) X2 across the two copies.
inline HermitianOperator kron_sum(const HermitianOperator& x1, const HermitianOperator& x2) {
  if (x1.dims().copies != 1 || x2.dims().copies != 1 || !(x1.dims() == x2.dims())) {
    throw ShapeError(detail::concat("kron_sum needs two single-copy operators of equal dims, got ", x1.dims(),
                                    " and ", x2.dims()));
  }
  const auto d = x1.size();
  const Matrix id = Matrix::Identity(d, d);
  return {BipartiteDims(x1.dims().dim_a, x1.dims().dim_b, 2), kron(x1.matrix(), id) + kron(id, x2.matrix())};
}

/// I_A (x) sigma.
inline Matrix lift_to_b(int dim_a, const Matrix& sigma) {
  return kron(Matrix::Identity(dim_a, dim_a), sigma);
}

}  // namespace eofdual
