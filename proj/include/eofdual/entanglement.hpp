#pragma once

#include "eofdual/optimize.hpp"

#include <vector>

namespace eofdual {

// ---------------------------------------------------------------------------
// pure-state entanglement

namespace detail {

/// For an unnormalized coefficient matrix C (dA x dB) with p = |C|^2, returns
/// p * E(C/|C|) = -Tr[s ln s] + p ln p, where s is the reduced state on the
/// smaller party.  If grad is given it receives the complex gradient of that
/// quantity with respect to C, namely -2 ln(s_A/p) C (equivalently
/// -2 C ln(C^dagger C/p)); eigenvalues that are exactly zero contribute nothing.
inline double weighted_entanglement(const Matrix& c, Matrix* grad) {
  const bool left = c.rows() <= c.cols();
  const Matrix s = left ? Matrix(c * c.adjoint()) : Matrix(c.adjoint() * c);
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  const RealVector& mu = es.eigenvalues();
  const double p = mu.sum();
  if (!(p > 0.0)) {
    if (grad) grad->setZero(c.rows(), c.cols());
    return 0.0;
  }
  double value = p * std::log(p);
  RealVector logs(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (mu(i) > 0.0) {
      value -= mu(i) * std::log(mu(i));
      logs(i) = std::log(mu(i) / p);
    } else {
      logs(i) = 0.0;
    }
  }
  if (grad) {
    const Matrix l = from_spectrum(es.eigenvectors(), logs);
    *grad = left ? Matrix(-2.0 * l * c) : Matrix(-2.0 * c * l);
  }
  return value;
}

}  // namespace detail

/// E(psi) = S(Tr_A psi), in nats.  Computed from Schmidt coefficients.
inline double pure_entanglement(const PureStateVector& psi) {
  if (psi.dims().copies != 1) {
    throw ShapeError("pure_entanglement expects a single-copy state; group two-copy states first");
  }
  const Matrix c = coefficient_matrix(psi.amplitudes(), psi.dims().dim_a, psi.dims().dim_b);
  Eigen::JacobiSVD<Matrix> svd(c);
  RealVector lambdas = svd.singularValues().array().square();
  return entropy_of(lambdas);
}

// ---------------------------------------------------------------------------
// ensembles

struct EnsembleMember {
  double weight = 0.0;
  PureStateVector state;
};

/// Weighted pure-state decomposition of a mixed state.
class Ensemble {
 public:
  Ensemble() = default;
  explicit Ensemble(std::vector<EnsembleMember> members) : members_(std::move(members)) {
    if (members_.empty()) throw ParameterError("ensemble must have at least one member");
    double total = 0.0;
    for (const auto& m : members_) {
      if (m.weight < 0.0) throw ParameterError(detail::concat("negative ensemble weight ", m.weight));
      if (!(m.state.dims() == members_.front().state.dims())) {
        throw ShapeError("ensemble members have different dims");
      }
      total += m.weight;
    }
    if (std::abs(total - 1.0) > kTraceTolerance) {
      throw ParameterError(detail::concat("ensemble weights sum to ", total));
    }
  }

  [[nodiscard]] const std::vector<EnsembleMember>& members() const { return members_; }
  [[nodiscard]] std::size_t size() const { return members_.size(); }
  [[nodiscard]] const BipartiteDims& dims() const { return members_.front().state.dims(); }

  /// sum_i p_i Psi_i
  [[nodiscard]] Matrix density() const {
    const auto n = dims().total();
    Matrix rho = Matrix::Zero(n, n);
    for (const auto& m : members_) rho += m.weight * m.state.projector();
    return rho;
  }

  [[nodiscard]] double average_entanglement() const {
    double e = 0.0;
    for (const auto& m : members_) e += m.weight * pure_entanglement(m.state);
    return e;
  }

  /// Largest entry of |sum_i p_i Psi_i - rho|.
  [[nodiscard]] double reconstruction_error(const Matrix& rho) const {
    return (density() - rho).cwiseAbs().maxCoeff();
  }

 private:
  std::vector<EnsembleMember> members_;
};

inline constexpr double kEnsembleReconstructionTolerance = 1e-8;
inline constexpr double kIsometryTolerance = 1e-8;
inline constexpr double kZeroWeight = 1e-12;

/// N x R isometry V that mixes the R weighted eigenvectors of a rank-R state
/// into N ensemble members.
class RoofParameterization {
 public:
  explicit RoofParameterization(Matrix mixing) : mixing_(std::move(mixing)) {
    if (mixing_.rows() < mixing_.cols()) {
      throw ParameterError(detail::concat("cardinality ", mixing_.rows(), " is below rank ", mixing_.cols()));
    }
    const auto r = mixing_.cols();
    const double defect = (mixing_.adjoint() * mixing_ - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
    if (defect > kIsometryTolerance) {
      throw ParameterError(detail::concat("mixing matrix is not an isometry (defect ", defect, ")"));
    }
  }

  [[nodiscard]] int rank() const { return static_cast<int>(mixing_.cols()); }
  [[nodiscard]] int cardinality() const { return static_cast<int>(mixing_.rows()); }
  [[nodiscard]] const Matrix& mixing_matrix() const { return mixing_; }

 private:
  Matrix mixing_;
};

/// Eigenvectors of rho scaled by sqrt(eigenvalue), for eigenvalues above kRankTolerance.
inline Matrix weighted_eigenvectors(const DensityMatrix& rho) {
  const Spectrum s = eigh(rho.matrix());
  Eigen::Index rank = 0;
  while (rank < s.eigenvalues.size() && s.eigenvalues(rank) > kRankTolerance) ++rank;
  Matrix a = s.eigenvectors.leftCols(rank);
  for (Eigen::Index k = 0; k < rank; ++k) a.col(k) *= std::sqrt(s.eigenvalues(k));
  return a;
}

inline int numerical_rank(const DensityMatrix& rho) { return static_cast<int>(weighted_eigenvectors(rho).cols()); }

namespace detail {

inline Ensemble ensemble_from_members(const BipartiteDims& dims, const Matrix& members) {
  std::vector<EnsembleMember> out;
  double total = 0.0;
  for (Eigen::Index i = 0; i < members.cols(); ++i) {
    const double p = members.col(i).squaredNorm();
    if (p < kZeroWeight) continue;
    out.push_back({p, PureStateVector::normalized(dims, members.col(i))});
    total += p;
  }
  for (auto& m : out) m.weight /= total;
  return Ensemble(std::move(out));
}

}  // namespace detail

/// Members |psi_i> = sum_k V_ik sqrt(lambda_k)|e_k>, p_i = <psi_i|psi_i>.
inline Ensemble ensemble_from_mixing(const DensityMatrix& rho, const RoofParameterization& v) {
  const Matrix a = weighted_eigenvectors(rho);
  if (a.cols() != v.rank()) {
    throw ParameterError(detail::concat("mixing matrix has ", v.rank(), " columns but rho has rank ", a.cols()));
  }
  return detail::ensemble_from_members(rho.dims(), a * v.mixing_matrix().transpose());
}

// ---------------------------------------------------------------------------
// convex-roof search

struct RoofOptions {
  int cardinality = 0;  // 0: rank^2
  int restarts = 32;
  std::uint64_t seed = 0;
  double tol = 1e-8;
  int max_iterations = 5000;
  int threads = 1;
};

struct RoofResult {
  double value = 0.0;
  Ensemble ensemble;
  int restarts_used = 0;
  bool converged = false;
};

namespace detail {

/// Average entanglement of the ensemble generated by V = Z (Z^dagger Z)^(-1/2),
/// with its gradient with respect to Z.
class RoofObjective {
 public:
  RoofObjective(Matrix weighted_eigvecs, int dim_a, int dim_b, int cardinality)
      : a_(std::move(weighted_eigvecs)), dim_a_(dim_a), dim_b_(dim_b), n_(cardinality), r_(a_.cols()) {}

  [[nodiscard]] Eigen::Index cardinality() const { return n_; }
  [[nodiscard]] Eigen::Index rank() const { return r_; }

  static Matrix polar(const Matrix& z) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(z.adjoint() * z);
    const RealVector inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    return z * from_spectrum(es.eigenvectors(), inv_sqrt);
  }

  [[nodiscard]] Matrix members(const Matrix& v) const { return a_ * v.transpose(); }

  double operator()(const RealVector& x, RealVector& grad) const {
    const Matrix z = unpack(x, n_, r_);
    Eigen::SelfAdjointEigenSolver<Matrix> es(z.adjoint() * z);
    const RealVector g = es.eigenvalues().cwiseMax(1e-300);
    const Matrix& w = es.eigenvectors();
    const RealVector rs = g.cwiseSqrt();
    const Matrix s = from_spectrum(w, rs.cwiseInverse());
    const Matrix v = z * s;
    const Matrix psi = members(v);

    double value = 0.0;
    Matrix gmat(psi.rows(), n_);
    Matrix gc;
    for (Eigen::Index i = 0; i < n_; ++i) {
      const Matrix c = coefficient_matrix(psi.col(i), dim_a_, dim_b_);
      value += weighted_entanglement(c, &gc);
      gmat.col(i) = from_coefficient_matrix(gc);
    }
    const Matrix gamma = (a_.adjoint() * gmat).transpose();  // dF/dV

    // chain rule through V = Z G^(-1/2)
    Matrix c_hat = w.adjoint() * (z.adjoint() * gamma) * w;
    for (Eigen::Index i = 0; i < r_; ++i)
      for (Eigen::Index j = 0; j < r_; ++j) c_hat(i, j) *= -1.0 / (rs(i) * rs(j) * (rs(i) + rs(j)));
    const Matrix k = w * c_hat * w.adjoint();
    const Matrix gz = gamma * s + z * (k + k.adjoint());
    grad = pack(gz);
    return value;
  }

 private:
  Matrix a_;
  int dim_a_, dim_b_;
  Eigen::Index n_, r_;
};

}  // namespace detail

/// Upper bound on E_F(rho) from the best ensemble found by multi-restart
/// L-BFGS over the cardinality-N isometries.  Restart 0 starts from the
/// eigen-ensemble, so the result never exceeds its average entanglement.
inline RoofResult eof_roof(const DensityMatrix& rho, const RoofOptions& opt = {}) {
  if (rho.dims().copies != 1) {
    throw ShapeError("eof_roof expects a single-copy state; group two-copy states first");
  }
  const Matrix a = weighted_eigenvectors(rho);
  const int rank = static_cast<int>(a.cols());
  const int n = opt.cardinality > 0 ? opt.cardinality : rank * rank;
  if (n < rank) throw ParameterError(detail::concat("cardinality ", n, " is below rank ", rank));

  RoofResult out;
  if (rank == 1) {
    out.ensemble = detail::ensemble_from_members(rho.dims(), a);
    out.value = out.ensemble.average_entanglement();
    out.restarts_used = 0;
    out.converged = true;
    return out;
  }

  const detail::RoofObjective objective(a, rho.dims().dim_a, rho.dims().dim_b, n);
  struct Candidate {
    double value;
    Matrix v;
    double last_improvement;
  };
  auto run = [&](int index, std::uint64_t seed) {
    Matrix z;
    if (index == 0) {
      z = Matrix::Zero(n, rank);
      z.topRows(rank).setIdentity();
    } else {
      Rng rng(seed);
      z = rng.complex_gaussian(n, rank);
    }
    LbfgsOptions lo;
    lo.max_iterations = opt.max_iterations;
    lo.gradient_tolerance = 1e-12;
    double value = std::numeric_limits<double>::infinity();
    double last = 0.0;
    int budget = opt.max_iterations;
    // re-anchor Z on the isometry manifold between rounds
    for (int round = 0; round < 6 && budget > 0; ++round) {
      lo.max_iterations = budget;
      const LbfgsResult r = minimize_lbfgs(objective, pack(z), lo);
      budget -= r.iterations;
      z = detail::RoofObjective::polar(unpack(r.x, n, rank));
      last = value - r.value;
      value = r.value;
      if (last < opt.tol) break;
    }
    return Candidate{value, z, last};
  };
  RestartOptions ro{opt.restarts, opt.seed, opt.threads};
  const Candidate best =
      best_of_restarts(ro, run, [](const Candidate& x, const Candidate& y) { return x.value < y.value; });
  out.ensemble = detail::ensemble_from_members(rho.dims(), objective.members(best.v));
  out.value = out.ensemble.average_entanglement();
  out.restarts_used = std::max(1, opt.restarts);
  out.converged = best.last_improvement < opt.tol;
  return out;
}

// ---------------------------------------------------------------------------
// two-qubit closed form

/// Binary entropy in nats.
inline double binary_entropy(double x) {
  double h = 0.0;
  if (x > 0.0) h -= x * std::log(x);
  if (x < 1.0) h -= (1.0 - x) * std::log(1.0 - x);
  return h;
}

/// Concurrence from the singular values of A^T (sy x sy) A with rho = A A^dagger;
/// these are the square roots of the eigenvalues of rho (sy x sy) rho* (sy x sy).
inline double concurrence(const DensityMatrix& rho) {
  if (!(rho.dims() == BipartiteDims(2, 2, 1))) {
    throw ShapeError(detail::concat("concurrence is defined here for 2x2 states, got ", rho.dims()));
  }
  Matrix yy = Matrix::Zero(4, 4);
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const Matrix a = weighted_eigenvectors(rho);
  const Matrix t = a.transpose() * yy * a;
  Eigen::JacobiSVD<Matrix> svd(t);
  RealVector l = RealVector::Zero(4);
  l.head(svd.singularValues().size()) = svd.singularValues();
  return std::max(0.0, l(0) - l(1) - l(2) - l(3));
}

/// Closed-form two-qubit entanglement of formation, in nats.
inline double eof_from_concurrence(double c) {
  return binary_entropy(0.5 * (1.0 + std::sqrt(std::max(0.0, 1.0 - c * c))));
}

inline double wootters_eof(const DensityMatrix& rho) {
  if (!(rho.dims() == BipartiteDims(2, 2, 1))) {
    throw ShapeError(detail::concat("wootters_eof needs a single-copy 2x2 state, got ", rho.dims()));
  }
  return eof_from_concurrence(concurrence(rho));
}

}  // namespace eofdual
