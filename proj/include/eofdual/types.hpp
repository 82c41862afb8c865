#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <compare>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace eofdual {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// errors

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DecompositionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class... Args>
std::string concat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// dimensions

/// A-B split of one Hilbert space copy and the number of I-II copies.
///
/// Basis ordering is A-major within a copy and copy-I-major across copies, so
/// a two-copy amplitude index is ((a1*dB + b1)*dA + a2)*dB + b2.  A state that
/// lives on a single party is written with dim_b == 1.
struct BipartiteDims {
  int dim_a = 1;
  int dim_b = 1;
  int copies = 1;

  BipartiteDims() = default;
  BipartiteDims(int a, int b, int c = 1) : dim_a(a), dim_b(b), copies(c) {
    if (a < 1 || b < 1) {
      throw ShapeError(detail::concat("party dimensions must be positive, got ", a, "x", b));
    }
    if (c != 1 && c != 2) {
      throw ShapeError(detail::concat("copies must be 1 or 2, got ", c));
    }
  }

  [[nodiscard]] int copy_dim() const { return dim_a * dim_b; }
  [[nodiscard]] int total() const { return copies == 1 ? copy_dim() : copy_dim() * copy_dim(); }
  [[nodiscard]] BipartiteDims single_copy() const { return {dim_a, dim_b, 1}; }

  friend bool operator==(const BipartiteDims&, const BipartiteDims&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const BipartiteDims& d) {
  return os << d.dim_a << "x" << d.dim_b << (d.copies == 2 ? " (2 copies)" : "");
}

inline void require_square(const Matrix& m, const BipartiteDims& dims, const char* what) {
  if (m.rows() != m.cols()) {
    throw ShapeError(detail::concat(what, ": matrix is ", m.rows(), "x", m.cols(), ", not square"));
  }
  if (m.rows() != dims.total()) {
    throw ShapeError(detail::concat(what, ": matrix size ", m.rows(), " does not match dims ", dims,
                                    " (total ", dims.total(), ")"));
  }
}

inline double hermiticity_defect(const Matrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------
// operators and states

/// General square operator carrying its tensor structure.
struct Operator {
  BipartiteDims dims;
  Matrix matrix;
};

/// Bounded Hermitian operator.  Symmetrized on construction.
class HermitianOperator {
 public:
  HermitianOperator() = default;
  HermitianOperator(BipartiteDims dims, const Matrix& m) : dims_(dims) {
    require_square(m, dims, "HermitianOperator");
    matrix_ = 0.5 * (m + m.adjoint());
  }

  static HermitianOperator identity(BipartiteDims dims) {
    return {dims, Matrix::Identity(dims.total(), dims.total())};
  }
  static HermitianOperator zero(BipartiteDims dims) {
    return {dims, Matrix::Zero(dims.total(), dims.total())};
  }

  [[nodiscard]] const BipartiteDims& dims() const { return dims_; }
  [[nodiscard]] const Matrix& matrix() const { return matrix_; }
  [[nodiscard]] Eigen::Index size() const { return matrix_.rows(); }

  HermitianOperator operator+(const HermitianOperator& o) const {
    check_same(o);
    return {dims_, matrix_ + o.matrix_};
  }
  HermitianOperator operator-(const HermitianOperator& o) const {
    check_same(o);
    return {dims_, matrix_ - o.matrix_};
  }
  HermitianOperator operator*(double s) const { return {dims_, matrix_ * s}; }
  HermitianOperator shifted(double c) const {
    return {dims_, matrix_ + c * Matrix::Identity(size(), size())};
  }

 private:
  void check_same(const HermitianOperator& o) const {
    if (!(o.dims_ == dims_)) {
      throw ShapeError(detail::concat("operator dims differ: ", dims_, " vs ", o.dims_));
    }
  }

  BipartiteDims dims_;
  Matrix matrix_;
};

inline constexpr double kStateEigenvalueTolerance = 1e-10;
inline constexpr double kTraceTolerance = 1e-10;
inline constexpr double kNormTolerance = 1e-12;

/// Normalized positive semidefinite operator.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  DensityMatrix(BipartiteDims dims, const Matrix& m) : dims_(dims) {
    require_square(m, dims, "DensityMatrix");
    matrix_ = 0.5 * (m + m.adjoint());
    const double tr = matrix_.trace().real();
    if (std::abs(tr - 1.0) > kTraceTolerance) {
      throw DomainError(detail::concat("density matrix trace is ", tr, ", expected 1"));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(matrix_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kStateEigenvalueTolerance) {
      throw DomainError(detail::concat("density matrix has eigenvalue ", es.eigenvalues().minCoeff()));
    }
  }

  /// Builds a state from an arbitrary nonzero PSD matrix by dividing out its trace.
  static DensityMatrix normalized(BipartiteDims dims, const Matrix& m) {
    return {dims, m / m.trace().real()};
  }
  static DensityMatrix maximally_mixed(BipartiteDims dims) {
    const auto n = dims.total();
    return {dims, Matrix::Identity(n, n) / static_cast<double>(n)};
  }

  [[nodiscard]] const BipartiteDims& dims() const { return dims_; }
  [[nodiscard]] const Matrix& matrix() const { return matrix_; }
  [[nodiscard]] Eigen::Index size() const { return matrix_.rows(); }
  [[nodiscard]] HermitianOperator as_operator() const { return {dims_, matrix_}; }

 private:
  BipartiteDims dims_;
  Matrix matrix_;
};

/// Unit vector in the declared space.
class PureStateVector {
 public:
  PureStateVector() = default;
  PureStateVector(BipartiteDims dims, const Vector& v) : dims_(dims), amplitudes_(v) {
    if (v.size() != dims.total()) {
      throw ShapeError(detail::concat("state vector length ", v.size(), " does not match dims ", dims));
    }
    if (std::abs(v.norm() - 1.0) > kNormTolerance) {
      throw DomainError(detail::concat("state vector norm is ", v.norm(), ", expected 1"));
    }
  }

  static PureStateVector normalized(BipartiteDims dims, const Vector& v) {
    const double n = v.norm();
    if (n == 0.0) throw DomainError("cannot normalize the zero vector");
    return {dims, v / n};
  }
  static PureStateVector basis(BipartiteDims dims, Eigen::Index k) {
    Vector v = Vector::Zero(dims.total());
    v(k) = 1.0;
    return {dims, v};
  }

  [[nodiscard]] const BipartiteDims& dims() const { return dims_; }
  [[nodiscard]] const Vector& amplitudes() const { return amplitudes_; }
  [[nodiscard]] Matrix projector() const { return amplitudes_ * amplitudes_.adjoint(); }
  [[nodiscard]] DensityMatrix density() const { return {dims_, projector()}; }

 private:
  BipartiteDims dims_;
  Vector amplitudes_;
};

/// Eigen-decomposition with eigenvalues sorted in descending order.
struct Spectrum {
  RealVector eigenvalues;
  Matrix eigenvectors;
};

// ---------------------------------------------------------------------------
// extended reals

/// A real number or minus infinity.  Used where a singular M makes
/// Tr[rho log M] or g(M) diverge; never encoded as a large negative float.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr ExtendedReal(double v) : value_(v) {}  // NOLINT(google-explicit-constructor)

  static constexpr ExtendedReal minus_infinity() {
    ExtendedReal r;
    r.minus_inf_ = true;
    return r;
  }

  [[nodiscard]] constexpr bool is_minus_infinity() const { return minus_inf_; }
  [[nodiscard]] constexpr bool is_finite() const { return !minus_inf_; }

  /// Finite value; throws on the sentinel.
  [[nodiscard]] double value() const {
    if (minus_inf_) throw DomainError("value requested from the minus-infinity sentinel");
    return value_;
  }
  /// Finite value, or -inf as an IEEE double for printing and exp().
  [[nodiscard]] double as_double() const {
    return minus_inf_ ? -std::numeric_limits<double>::infinity() : value_;
  }

  friend constexpr ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
    if (a.minus_inf_ || b.minus_inf_) return minus_infinity();
    return {a.value_ + b.value_};
  }
  friend constexpr ExtendedReal operator-(ExtendedReal a, double b) {
    if (a.minus_inf_) return minus_infinity();
    return {a.value_ - b};
  }
  friend constexpr bool operator==(ExtendedReal a, ExtendedReal b) {
    if (a.minus_inf_ || b.minus_inf_) return a.minus_inf_ == b.minus_inf_;
    return a.value_ == b.value_;
  }
  friend constexpr std::partial_ordering operator<=>(ExtendedReal a, ExtendedReal b) {
    if (a.minus_inf_ && b.minus_inf_) return std::partial_ordering::equivalent;
    if (a.minus_inf_) return std::partial_ordering::less;
    if (b.minus_inf_) return std::partial_ordering::greater;
    return a.value_ <=> b.value_;
  }

 private:
  double value_ = 0.0;
  bool minus_inf_ = false;
};

}  // namespace eofdual
