#pragma once

#include "eofdual/entanglement.hpp"

#include <optional>
#include <string>
#include <vector>

namespace eofdual {

// ---------------------------------------------------------------------------
// E*(X) = max_psi Tr[Psi X] - E(Psi)

struct ConjugateOptions {
  int restarts = 32;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<Vector> extra_starts;  // tried before the random restarts
  int max_iterations = 5000;
};

struct ConjugateResult {
  double value = 0.0;
  PureStateVector argmax_state;
  int restarts_used = 0;
};

namespace detail {

/// Tr[Psi X] - E(Psi) for psi = basis * c, as a function of the unit vector c.
class ConjugateObjective {
 public:
  ConjugateObjective(const Matrix& x, const Matrix& basis, int dim_a, int dim_b)
      : basis_(basis), x_sub_(basis.adjoint() * x * basis), dim_a_(dim_a), dim_b_(dim_b) {}

  double operator()(const Vector& c, Vector& grad) const {
    const Vector psi = basis_ * c;
    const Vector xc = x_sub_ * c;
    Matrix ge;
    const double e = weighted_entanglement(coefficient_matrix(psi, dim_a_, dim_b_), &ge);
    grad = 2.0 * xc - basis_.adjoint() * from_coefficient_matrix(ge);
    return c.dot(xc).real() - e;
  }

  [[nodiscard]] const Matrix& compressed() const { return x_sub_; }
  [[nodiscard]] const Matrix& basis() const { return basis_; }

 private:
  Matrix basis_;
  Matrix x_sub_;
  int dim_a_, dim_b_;
};

/// All local maxima from the deterministic and random starts, in restart order.
inline std::vector<SphereMaximum> conjugate_local_maxima(const Matrix& x, const Matrix& basis, const BipartiteDims& dims,
                                                         const ConjugateOptions& opt) {
  const ConjugateObjective objective(x, basis, dims.dim_a, dims.dim_b);
  const auto r = basis.cols();
  std::vector<Vector> starts;
  {
    const Spectrum s = eigh(objective.compressed());
    starts.push_back(s.eigenvectors.col(0));
  }
  for (const auto& v : opt.extra_starts) {
    Vector c = basis.adjoint() * v;
    if (c.norm() > 1e-8) starts.push_back(c);
  }
  const int total = std::max<int>(opt.restarts, 1);
  LbfgsOptions lo;
  lo.max_iterations = opt.max_iterations;
  lo.gradient_tolerance = 1e-11;
  std::vector<SphereMaximum> out(total);
  auto run = [&](int i) {
    Vector start;
    if (i < static_cast<int>(starts.size())) {
      start = starts[i];
    } else {
      Rng rng(derive_seed(opt.seed, i));
      start = rng.complex_gaussian(r);
    }
    auto obj = objective;
    SphereMaximum m = maximize_on_sphere(obj, start, lo);
    m.point = basis * m.point;
    m.point /= m.point.norm();
    return m;
  };
  if (opt.threads <= 1) {
    for (int i = 0; i < total; ++i) out[i] = run(i);
  } else {
    std::vector<std::future<void>> jobs;
    const int workers = std::min(opt.threads, total);
    for (int w = 0; w < workers; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (int i = w; i < total; i += workers) out[i] = run(i);
      }));
    for (auto& j : jobs) j.get();
  }
  return out;
}

/// Tr[Psi X] - E(Psi) evaluated directly (SVD-based entanglement).
inline double conjugate_score(const Matrix& x, const PureStateVector& psi) {
  return psi.amplitudes().dot(x * psi.amplitudes()).real() - pure_entanglement(psi);
}

inline ConjugateResult conjugate_on_basis(const Matrix& x, const Matrix& basis, const BipartiteDims& dims,
                                          const ConjugateOptions& opt) {
  const auto maxima = conjugate_local_maxima(x, basis, dims, opt);
  std::size_t best = 0;
  for (std::size_t i = 1; i < maxima.size(); ++i)
    if (maxima[i].value > maxima[best].value) best = i;
  ConjugateResult out;
  out.argmax_state = PureStateVector::normalized(dims, maxima[best].point);
  out.value = conjugate_score(x, out.argmax_state);
  out.restarts_used = static_cast<int>(maxima.size());
  return out;
}

inline void require_single_copy(const BipartiteDims& dims, const char* what) {
  if (dims.copies != 1) {
    throw ShapeError(detail::concat(what, " expects a single-copy operator; group two-copy operators first"));
  }
}

}  // namespace detail

/// Multi-restart ascent on the unit sphere.  The value is achieved by the
/// reported state, so it is a certified lower bound on E*(X).
inline ConjugateResult conjugate_e(const HermitianOperator& x, const ConjugateOptions& opt = {}) {
  detail::require_single_copy(x.dims(), "conjugate_e");
  const auto n = x.size();
  return detail::conjugate_on_basis(x.matrix(), Matrix::Identity(n, n), x.dims(), opt);
}

// ---------------------------------------------------------------------------
// g(M) = E*(log M)

enum class GMethod { direct, eigen };

inline const char* to_string(GMethod m) { return m == GMethod::direct ? "direct" : "eigen"; }

struct GEvalResult {
  ExtendedReal value;
  DensityMatrix argmax_tau;       // state on H_B, dims {dB, 1, 1}
  std::optional<PureStateVector> argmax_state;  // direct method only
  GMethod method = GMethod::direct;
  bool tau_on_boundary = false;  // argmax tau is rank deficient
};

struct GOptions {
  int restarts = 32;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<Vector> extra_states;  // direct method: starting vectors
  std::vector<Matrix> extra_taus;    // eigen method: starting states on H_B
};

namespace detail {

inline HermitianOperator single_copy_view(const HermitianOperator& m) {
  return m.dims().copies == 2 ? group_copies(m) : m;
}

inline RestrictedLog checked_log(const HermitianOperator& m) {
  const Spectrum s = eigh(m);
  if (s.eigenvalues.size() && s.eigenvalues.minCoeff() < -kStateEigenvalueTolerance) {
    throw DomainError(detail::concat("g(M) needs M >= 0; smallest eigenvalue is ", s.eigenvalues.minCoeff()));
  }
  return restricted_log(m);
}

inline DensityMatrix reduced_b(const PureStateVector& psi) {
  const Matrix c = coefficient_matrix(psi.amplitudes(), psi.dims().dim_a, psi.dims().dim_b);
  return DensityMatrix::normalized({psi.dims().dim_b, 1, 1}, (c.adjoint() * c).transpose());
}

inline bool rank_deficient(const Matrix& tau, double tol = 1e-8) {
  return eigh(tau).eigenvalues.minCoeff() < tol;
}

// -- search over states tau on H_B -------------------------------------------
//
// tau = W W^dagger / Tr(W W^dagger) with W a dB x k matrix of full column rank.
// Operators are evaluated on H_A (x) ran(tau) through the isometry
// Q = W (W^dagger W)^(-1/2); tau restricted to its range is G = W^dagger W / Tr.

struct TauFrame {
  Matrix q;          // dB x k isometry onto ran(tau)
  RealVector g;      // eigenvalues of G (normalized, all > 0)
  Matrix g_vectors;  // eigenvectors of G, in the Q frame
};

/// Directions of W with relative weight below this are treated as absent, so
/// a nearly rank-deficient W is read as a lower-rank tau.
inline constexpr double kTauRelativeFloor = 1e-14;

inline TauFrame tau_frame(const Matrix& w) {
  const Spectrum s = eigh(Matrix(w.adjoint() * w));
  const double top = s.eigenvalues.size() ? s.eigenvalues(0) : 0.0;
  Eigen::Index k = 0;
  while (k < s.eigenvalues.size() && s.eigenvalues(k) > kTauRelativeFloor * top) ++k;
  if (k == 0) throw DomainError("tau_frame: W is zero");
  const RealVector ev = s.eigenvalues.head(k);
  const Matrix vecs = s.eigenvectors.leftCols(k);
  TauFrame f;
  f.q = w * vecs * ev.cwiseSqrt().cwiseInverse().asDiagonal();
  f.g = ev / ev.sum();
  f.g_vectors = Matrix::Identity(k, k);
  return f;
}

inline Matrix tau_from_w(const Matrix& w) {
  const Matrix t = w * w.adjoint();
  return t / t.trace().real();
}

/// Ranks tried for tau, cycling over restarts: min(dA, dB) first, then the rest.
inline std::vector<int> tau_ranks(int dim_a, int dim_b) {
  std::vector<int> ranks{std::min(dim_a, dim_b)};
  for (int k = 1; k <= dim_b; ++k)
    if (k != ranks.front()) ranks.push_back(k);
  return ranks;
}

/// W of rank k whose tau approximates the given state (top-k eigenvectors).
inline Matrix w_for_tau(const Matrix& tau, int k) {
  const Spectrum s = eigh(tau);
  Matrix w = s.eigenvectors.leftCols(k);
  for (int i = 0; i < k; ++i) w.col(i) *= std::sqrt(std::max(s.eigenvalues(i), 1e-8));
  return w;
}

struct TauSearchResult {
  double value = -std::numeric_limits<double>::infinity();
  Matrix w;
};

/// Maximizes value(W) over W, for each rank in turn; value may return -inf.
template <class Value>
TauSearchResult maximize_over_tau(Value&& value, int dim_a, int dim_b, int restarts, std::uint64_t seed, int threads,
                                  const std::vector<Matrix>& seeds_w) {
  const auto ranks = tau_ranks(dim_a, dim_b);
  LbfgsOptions lo;
  lo.gradient_tolerance = 1e-9;
  lo.max_iterations = 2000;
  auto run = [&](int i, std::uint64_t sub) {
    Matrix w0;
    if (i < static_cast<int>(seeds_w.size())) {
      w0 = seeds_w[i];
    } else {
      const int k = ranks[(i - seeds_w.size()) % ranks.size()];
      Rng rng(sub);
      w0 = rng.complex_gaussian(dim_b, k);
    }
    const auto k = w0.cols();
    auto neg = [&](const RealVector& x) {
      if (x.squaredNorm() == 0.0) return std::numeric_limits<double>::infinity();
      const double v = value(unpack(x, dim_b, k));
      return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
    };
    auto f = [&](const RealVector& x, RealVector& grad) {
      const double v = numeric_gradient(neg, x, grad);
      if (!std::isfinite(grad.sum())) grad.setZero();
      return v;
    };
    TauSearchResult r;
    RealVector x0 = pack(Matrix(w0 / w0.norm()));
    const double v0 = -neg(x0);
    if (!std::isfinite(v0)) {
      r.w = w0;
      return r;
    }
    const LbfgsResult lr = minimize_lbfgs(f, x0, lo);
    r.w = unpack(lr.x, dim_b, k);
    r.value = value(r.w);
    return r;
  };
  const int total = std::max<int>(restarts, static_cast<int>(seeds_w.size()));
  return best_of_restarts(RestartOptions{total, seed, threads}, run,
                          [](const TauSearchResult& a, const TauSearchResult& b) { return a.value > b.value; });
}

/// lambda_max(log M + log(I (x) tau)) on ran(M) intersected with H_A (x) ran(tau).
class EigenFormValue {
 public:
  EigenFormValue(const RestrictedLog& log_m, int dim_a, int dim_b)
      : log_m_(log_m.log_on_support.matrix()), dim_a_(dim_a), dim_b_(dim_b), singular_(!log_m.full_rank()) {
    if (singular_) {
      const auto n = log_m_.rows();
      perp_ = Matrix::Identity(n, n) - log_m.support_projector();
      rank_m_ = log_m.support_basis.cols();
    }
  }

  double operator()(const Matrix& w) const {
    const TauFrame f = tau_frame(w);
    const auto k = f.q.cols();
    const Matrix s = lift_to_b(dim_a_, f.q);
    const RealVector logs = f.g.array().log();
    Matrix k_op = s.adjoint() * log_m_ * s + lift_to_b(dim_a_, from_spectrum(f.g_vectors, logs));
    if (singular_) {
      const Eigen::Index n = log_m_.rows();
      const Eigen::Index dim = dim_a_ * k - (n - rank_m_);
      if (dim <= 0) return -std::numeric_limits<double>::infinity();
      Eigen::JacobiSVD<Matrix> svd(perp_ * s, Eigen::ComputeFullV);
      const Matrix basis = svd.matrixV().rightCols(dim);
      k_op = basis.adjoint() * k_op * basis;
    }
    return lambda_max(k_op);
  }

 private:
  Matrix log_m_;
  Matrix perp_;
  Eigen::Index rank_m_ = 0;
  int dim_a_, dim_b_;
  bool singular_;
};

}  // namespace detail

namespace detail {

/// max over unit psi in ran(basis) of Tr[Psi L] - E(Psi); L is the log on the support.
inline GEvalResult g_direct_on_log(const RestrictedLog& lg, const BipartiteDims& dims, const GOptions& opt) {
  GEvalResult out;
  out.method = GMethod::direct;
  if (lg.support_basis.cols() == 0) {
    out.value = ExtendedReal::minus_infinity();
    out.argmax_tau = DensityMatrix::maximally_mixed({dims.dim_b, 1, 1});
    return out;
  }
  ConjugateOptions co;
  co.restarts = opt.restarts;
  co.seed = opt.seed;
  co.threads = opt.threads;
  co.extra_starts = opt.extra_states;
  const ConjugateResult r = conjugate_on_basis(lg.log_on_support.matrix(), lg.support_basis, dims, co);
  out.value = r.value;
  out.argmax_state = r.argmax_state;
  out.argmax_tau = reduced_b(r.argmax_state);
  out.tau_on_boundary = rank_deficient(out.argmax_tau.matrix());
  return out;
}

/// Grouped restricted log of M1 (x) M2 built from the single-copy logs, so
/// that tiny products of eigenvalues are not lost to the rank cutoff.
inline RestrictedLog product_log(const RestrictedLog& l1, const RestrictedLog& l2) {
  RestrictedLog out;
  const HermitianOperator sum = kron_sum(l1.log_on_support, l2.log_on_support);
  const Matrix p1 = l1.support_projector(), p2 = l2.support_projector();
  const Matrix proj = group_copies(kron(p1, p2), sum.dims());
  const Matrix grouped_sum = group_copies(sum.matrix(), sum.dims());
  const Spectrum s = eigh(proj);
  Eigen::Index rank = 0;
  while (rank < s.eigenvalues.size() && s.eigenvalues(rank) > 0.5) ++rank;
  out.support_basis = s.eigenvectors.leftCols(rank);
  out.complement_dim = static_cast<int>(s.eigenvalues.size() - rank);
  const Matrix pr = out.support_basis * out.support_basis.adjoint();
  out.log_on_support = HermitianOperator(grouped_dims(sum.dims()), pr * grouped_sum * pr);
  return out;
}

}  // namespace detail

/// g(M) = max_psi Tr[Psi log M] - E(Psi), with psi restricted to ran(M).
/// Two-copy operators are evaluated on the grouped split A1A2 | B1B2.
inline GEvalResult g_direct(const HermitianOperator& m_in, const GOptions& opt = {}) {
  const HermitianOperator m = detail::single_copy_view(m_in);
  return detail::g_direct_on_log(detail::checked_log(m), m.dims(), opt);
}

/// g(M) = max_tau lambda_max(log M + log(I_A (x) tau)), searched over tau of
/// every rank so that boundary optima are reached exactly.
inline GEvalResult g_eigen(const HermitianOperator& m_in, const GOptions& opt = {}) {
  const HermitianOperator m = detail::single_copy_view(m_in);
  const RestrictedLog lg = detail::checked_log(m);
  const auto& dims = m.dims();
  GEvalResult out;
  out.method = GMethod::eigen;
  if (lg.support_basis.cols() == 0) {
    out.value = ExtendedReal::minus_infinity();
    out.argmax_tau = DensityMatrix::maximally_mixed({dims.dim_b, 1, 1});
    return out;
  }
  const detail::EigenFormValue value(lg, dims.dim_a, dims.dim_b);
  std::vector<Matrix> seeds;
  for (const auto& t : opt.extra_taus) {
    for (int k : detail::tau_ranks(dims.dim_a, dims.dim_b)) seeds.push_back(detail::w_for_tau(t, k));
  }
  const auto best =
      detail::maximize_over_tau(value, dims.dim_a, dims.dim_b, opt.restarts, opt.seed, opt.threads, seeds);
  out.value = std::isfinite(best.value) ? ExtendedReal(best.value) : ExtendedReal::minus_infinity();
  out.argmax_tau = DensityMatrix({dims.dim_b, 1, 1}, detail::tau_from_w(best.w));
  out.tau_on_boundary = best.w.cols() < dims.dim_b;
  return out;
}

inline GEvalResult g_evaluate(const HermitianOperator& m, GMethod method, const GOptions& opt = {}) {
  return method == GMethod::direct ? g_direct(m, opt) : g_eigen(m, opt);
}

// ---------------------------------------------------------------------------
// duality

/// Tr[rho X] - E*(X): a lower bound on E_F(rho) up to the accuracy of E*.
inline double dual_lower_bound(const DensityMatrix& rho, const HermitianOperator& x,
                               const ConjugateOptions& opt = {}) {
  if (!(rho.dims() == x.dims())) {
    throw ShapeError(detail::concat("dual_lower_bound: dims differ: ", rho.dims(), " vs ", x.dims()));
  }
  return (rho.matrix() * x.matrix()).trace().real() - conjugate_e(x, opt).value;
}

struct DualEstimateOptions {
  double x_norm_cap = 20.0;
  int restarts = 32;
  std::uint64_t seed = 0;
  int threads = 1;
  int rounds = 12;
  int roof_restarts = 4;
  int random_pool = 24;
};

struct DualEstimate {
  double value = 0.0;       // best certified Tr[rho X] - E*(X)
  HermitianOperator x;      // the X achieving it, ||X||_inf <= cap
  double master_value = 0;  // value of the last cutting-plane model (an optimistic estimate)
  int rounds = 0;
  bool converged = false;
};

namespace detail {

inline Matrix hermitian_from_real(const RealVector& x, Eigen::Index n) {
  Matrix h(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) h(i, i) = x(k++);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      h(i, j) = Complex(x(k), x(k + 1));
      h(j, i) = std::conj(h(i, j));
      k += 2;
    }
  return h;
}

inline RealVector real_from_hermitian(const Matrix& h) {
  const auto n = h.rows();
  RealVector x(n * n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) x(k++) = h(i, i).real();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      x(k++) = h(i, j).real();
      x(k++) = h(i, j).imag();
    }
  return x;
}

/// Real gradient of phi(X) given D with d phi = Tr[D dX].
inline RealVector gradient_from_hermitian(const Matrix& d) {
  const auto n = d.rows();
  RealVector g(n * n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) g(k++) = d(i, i).real();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      g(k++) = 2.0 * d(i, j).real();
      g(k++) = 2.0 * d(i, j).imag();
    }
  return g;
}

/// X - c I with its spectrum centred and clipped to [-cap, cap].
inline Matrix center_and_clip(const Matrix& x, double cap) {
  Spectrum s = eigh(x);
  const double c = 0.5 * (s.eigenvalues(0) + s.eigenvalues(s.eigenvalues.size() - 1));
  RealVector v = (s.eigenvalues.array() - c).cwiseMax(-cap).cwiseMin(cap);
  return from_spectrum(s.eigenvectors, v);
}

/// Cutting-plane model of the dual: pool of pure states with their entanglement.
struct DualPool {
  Matrix states;  // columns
  RealVector entanglement;

  void add(const Vector& v, const BipartiteDims& dims) {
    const PureStateVector psi = PureStateVector::normalized(dims, v);
    const auto m = states.cols();
    states.conservativeResize(v.size(), m + 1);
    entanglement.conservativeResize(m + 1);
    states.col(m) = psi.amplitudes();
    entanglement(m) = pure_entanglement(psi);
  }

  [[nodiscard]] RealVector scores(const Matrix& x) const {
    const Matrix xs = x * states;
    RealVector s(states.cols());
    for (Eigen::Index j = 0; j < s.size(); ++j) s(j) = states.col(j).dot(xs.col(j)).real() - entanglement(j);
    return s;
  }
};

/// Smoothed master problem: max_X Tr[rho X] - T log sum_j exp(s_j(X)/T),
/// with a penalty keeping the centred spectral spread of X within the cap.
inline Matrix solve_dual_master(const Matrix& rho, const DualPool& pool, const Matrix& x0, double cap) {
  const auto n = rho.rows();
  constexpr double penalty = 1e4;
  RealVector x = real_from_hermitian(x0);
  LbfgsOptions lo;
  lo.max_iterations = 400;
  lo.gradient_tolerance = 1e-10;
  for (double temp : {1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5}) {
    auto f = [&](const RealVector& v, RealVector& grad) {
      const Matrix h = hermitian_from_real(v, n);
      const RealVector s = pool.scores(h);
      const double top = s.maxCoeff();
      RealVector w = ((s.array() - top) / temp).exp();
      const double z = w.sum();
      w /= z;
      const double lse = top + temp * std::log(z);
      double value = (rho * h).trace().real() - lse;
      Matrix d = rho;
      for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (w(j) > 1e-18) d -= w(j) * pool.states.col(j) * pool.states.col(j).adjoint();
      }
      const Spectrum sp = eigh(h);
      const double half_spread = 0.5 * (sp.eigenvalues(0) - sp.eigenvalues(n - 1));
      const double excess = half_spread - cap;
      if (excess > 0) {
        value -= penalty * excess * excess;
        const Vector top_v = sp.eigenvectors.col(0), bottom_v = sp.eigenvectors.col(n - 1);
        d -= penalty * 2.0 * excess * 0.5 * (top_v * top_v.adjoint() - bottom_v * bottom_v.adjoint());
      }
      grad = -gradient_from_hermitian(d);
      return -value;
    };
    x = minimize_lbfgs(f, x, lo).x;
  }
  return hermitian_from_real(x, n);
}

/// Dual operator read off an ensemble: each member psi_i is made a critical
/// point of <psi|X|psi> - E(psi) with value 0.  Solved in the least-squares
/// sense (minimum norm); X is left zero on the complement of the members' span.
inline Matrix stationary_dual_operator(const Ensemble& ensemble) {
  const auto& members = ensemble.members();
  const auto& dims = members.front().state.dims();
  const auto n = static_cast<Eigen::Index>(dims.total());
  const auto m = static_cast<Eigen::Index>(members.size());
  const Eigen::Index unknowns = n * n + m;  // X, then one multiplier per member
  const Eigen::Index rows = m * (2 * n + 1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, unknowns);
  RealVector b = RealVector::Zero(rows);
  for (Eigen::Index k = 0; k < n * n; ++k) {
    RealVector e = RealVector::Zero(n * n);
    e(k) = 1.0;
    const Matrix basis_x = hermitian_from_real(e, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Vector& psi = members[i].state.amplitudes();
      const Vector xp = basis_x * psi;
      const Eigen::Index r0 = i * (2 * n + 1);
      a.block(r0, k, n, 1) = xp.real();
      a.block(r0 + n, k, n, 1) = xp.imag();
      a(r0 + 2 * n, k) = psi.dot(xp).real();
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector& psi = members[i].state.amplitudes();
    Matrix ge;
    const double e = weighted_entanglement(coefficient_matrix(psi, dims.dim_a, dims.dim_b), &ge);
    const Vector half_grad = 0.5 * from_coefficient_matrix(ge);
    const Eigen::Index r0 = i * (2 * n + 1);
    a.block(r0, n * n + i, n, 1) = -psi.real();
    a.block(r0 + n, n * n + i, n, 1) = -psi.imag();
    b.segment(r0, n) = half_grad.real();
    b.segment(r0 + n, n) = half_grad.imag();
    b(r0 + 2 * n) = e;
  }
  const RealVector sol = a.completeOrthogonalDecomposition().solve(b);
  return hermitian_from_real(sol.head(n * n), n);
}

}  // namespace detail

/// Lower estimate of E_F(rho) = sup_X Tr[rho X] - E*(X) over ||X||_inf <= cap.
///
/// Cutting planes: a pool of pure states defines a model of E*; the smoothed
/// model is maximized over X, E*(X) is then evaluated by multi-restart ascent
/// and its maximizers join the pool.  Every reported value is certified by
/// that evaluation, not by the model.
inline DualEstimate fhat_dual_estimate(const DensityMatrix& rho, const DualEstimateOptions& opt = {}) {
  detail::require_single_copy(rho.dims(), "fhat_dual_estimate");
  const auto& dims = rho.dims();
  const auto n = rho.size();
  detail::DualPool pool;
  Ensemble roof_ensemble;
  {
    RoofOptions ro;
    ro.restarts = opt.roof_restarts;
    ro.seed = derive_seed(opt.seed, 1000001);
    ro.threads = opt.threads;
    roof_ensemble = eof_roof(rho, ro).ensemble;
    for (const auto& m : roof_ensemble.members()) pool.add(m.state.amplitudes(), dims);
    const Spectrum s = eigh(rho.matrix());
    for (Eigen::Index k = 0; k < n; ++k) {
      pool.add(s.eigenvectors.col(k), dims);
      pool.add(Vector(Matrix::Identity(n, n).col(k)), dims);
    }
    Rng rng(derive_seed(opt.seed, 1000002));
    for (int k = 0; k < opt.random_pool; ++k) pool.add(rng.complex_gaussian(n), dims);
  }

  DualEstimate best;
  best.value = -std::numeric_limits<double>::infinity();
  Matrix x = Matrix::Zero(n, n);
  auto certify = [&](const Matrix& candidate, std::uint64_t seed, const std::vector<Vector>& starts) {
    ConjugateOptions co;
    co.restarts = opt.restarts;
    co.seed = seed;
    co.threads = opt.threads;
    co.extra_starts = starts;
    const auto maxima = detail::conjugate_local_maxima(candidate, Matrix::Identity(n, n), dims, co);
    double conj = -std::numeric_limits<double>::infinity();
    for (const auto& m : maxima) {
      conj = std::max(conj, detail::conjugate_score(candidate, PureStateVector::normalized(dims, m.point)));
    }
    return std::make_pair(conj, maxima);
  };
  {
    // warm start: X stationary on the roof ensemble, pushed down off its span
    const Matrix x0 = detail::stationary_dual_operator(roof_ensemble);
    const Matrix span = weighted_eigenvectors(rho);
    Eigen::HouseholderQR<Matrix> qr(span);
    const Matrix q = qr.householderQ() * Matrix::Identity(n, span.cols());
    const Matrix perp = Matrix::Identity(n, n) - q * q.adjoint();
    std::vector<Vector> starts;
    for (const auto& m : roof_ensemble.members()) starts.push_back(m.state.amplitudes());
    std::vector<Matrix> candidates{Matrix::Zero(n, n)};
    for (double push : {0.0, 1.0, 4.0, 16.0}) candidates.push_back(detail::center_and_clip(x0 - push * perp, opt.x_norm_cap));
    int index = 0;
    for (const Matrix& candidate : candidates) {
      const auto [conj, maxima] = certify(candidate, derive_seed(opt.seed, 2000000 + index++), starts);
      const double bound = (rho.matrix() * candidate).trace().real() - conj;
      for (const auto& m : maxima) pool.add(m.point, dims);
      if (bound > best.value) {
        best.value = bound;
        best.x = HermitianOperator(dims, candidate);
        x = candidate;
      }
    }
  }
  for (int round = 0; round < opt.rounds; ++round) {
    best.rounds = round + 1;
    x = detail::solve_dual_master(rho.matrix(), pool, x, opt.x_norm_cap);
    const Matrix xc = detail::center_and_clip(x, opt.x_norm_cap);
    const RealVector scores = pool.scores(xc);
    const double model_max = scores.maxCoeff();
    best.master_value = (rho.matrix() * xc).trace().real() - model_max;

    ConjugateOptions co;
    co.restarts = opt.restarts;
    co.seed = derive_seed(opt.seed, round);
    co.threads = opt.threads;
    std::vector<Eigen::Index> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + std::min<Eigen::Index>(6, scores.size()), order.end(),
                      [&](auto a, auto b) { return scores(a) > scores(b); });
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(6, scores.size()); ++j)
      co.extra_starts.push_back(pool.states.col(order[j]));
    const auto maxima = detail::conjugate_local_maxima(xc, Matrix::Identity(n, n), dims, co);
    double conj = -std::numeric_limits<double>::infinity();
    for (const auto& m : maxima) {
      const double v = detail::conjugate_score(xc, PureStateVector::normalized(dims, m.point));
      conj = std::max(conj, v);
      if (v > model_max + 1e-10) pool.add(m.point, dims);
    }
    const double bound = (rho.matrix() * xc).trace().real() - conj;
    if (bound > best.value) {
      best.value = bound;
      best.x = HermitianOperator(dims, xc);
    }
    if (conj <= model_max + 1e-9) {
      best.converged = true;
      break;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Proposition-style consistency checks

struct Prop1Report {
  double conjugate_value = 0.0;       // E*(X')
  std::vector<double> defects;        // E*(X') - (Tr[Psi_i X'] - E(Psi_i))
  double max_abs_defect = 0.0;
  double closure_residual = 0.0;      // |Tr[tau X'] - E_F estimate - E*(X')|
  double ensemble_entanglement = 0.0;
  bool members_optimal = false;       // all defects within tol
  bool tau_optimal = false;           // closure residual within tol
};

/// If X' is optimal for tau then every member of an optimal ensemble for tau
/// maximizes Tr[Psi X'] - E(Psi), and tau is optimal for X' in the dual pair.
inline Prop1Report check_prop1_ensemble(const DensityMatrix& tau, const HermitianOperator& x_opt,
                                        const Ensemble& ensemble, double tol, const ConjugateOptions& opt = {}) {
  const double err = ensemble.reconstruction_error(tau.matrix());
  if (err > kEnsembleReconstructionTolerance) {
    throw ParameterError(detail::concat("ensemble does not realize tau (error ", err, ")"));
  }
  ConjugateOptions co = opt;
  for (const auto& m : ensemble.members()) co.extra_starts.push_back(m.state.amplitudes());
  const ConjugateResult conj = conjugate_e(x_opt, co);
  Prop1Report r;
  r.conjugate_value = conj.value;
  for (const auto& m : ensemble.members()) {
    const double d = conj.value - detail::conjugate_score(x_opt.matrix(), m.state);
    r.defects.push_back(d);
    r.max_abs_defect = std::max(r.max_abs_defect, std::abs(d));
  }
  r.ensemble_entanglement = ensemble.average_entanglement();
  r.closure_residual =
      std::abs((tau.matrix() * x_opt.matrix()).trace().real() - r.ensemble_entanglement - conj.value);
  r.members_optimal = r.max_abs_defect <= tol;
  r.tau_optimal = r.closure_residual <= tol;
  return r;
}

// ---------------------------------------------------------------------------
// additivity gaps

enum class GapDirection { subadditivity_of_g, strong_superadditivity_of_eof, multiplicativity_of_nu_q };

inline const char* to_string(GapDirection d) {
  switch (d) {
    case GapDirection::subadditivity_of_g:
      return "subadditivity_of_g";
    case GapDirection::strong_superadditivity_of_eof:
      return "strong_superadditivity_of_EoF";
    case GapDirection::multiplicativity_of_nu_q:
      return "multiplicativity_of_nu_q";
  }
  return "?";
}

/// gap is stored as rhs - lhs (in the log domain for nu_q), where lhs is the
/// side the conjectured inequality puts below: g(M1 (x) M2), the EoF of the
/// two reductions, or nu_q of the product channel.  In every direction a
/// negative gap beyond tolerance disproves the conjecture.
struct AdditivityGap {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
  GapDirection direction = GapDirection::subadditivity_of_g;
  std::string mode;  // how each side was obtained

  [[nodiscard]] bool violated(double tol) const { return gap < -tol; }
  /// The same comparison read in the opposite direction (lhs <= rhs reversed).
  [[nodiscard]] double reverse_gap() const { return -gap; }
};

inline const char* reverse_direction_name(GapDirection d) {
  switch (d) {
    case GapDirection::subadditivity_of_g:
      return "superadditivity_of_g";
    case GapDirection::strong_superadditivity_of_eof:
      return "strong_subadditivity_of_EoF";
    case GapDirection::multiplicativity_of_nu_q:
      return "supermultiplicativity_of_nu_q";
  }
  return "?";
}

struct GapOptions {
  int restarts = 16;
  std::uint64_t seed = 0;
  int threads = 1;
  int roof_restarts = 8;
};

/// lhs = g(M1 (x) M2) over the two copies, rhs = g(M1) + g(M2), gap = rhs - lhs.
/// The product of the single-copy maximizers seeds the two-copy search, so
/// lhs >= rhs up to round-off (superadditivity is witnessed).
inline AdditivityGap g_subadditivity_gap(const HermitianOperator& m1, const HermitianOperator& m2,
                                         const GapOptions& opt = {}) {
  if (m1.dims().copies != 1 || !(m1.dims() == m2.dims())) {
    throw ShapeError("g_subadditivity_gap needs two single-copy operators of equal dims");
  }
  GOptions go;
  go.restarts = opt.restarts;
  go.threads = opt.threads;
  go.seed = derive_seed(opt.seed, 1);
  const GEvalResult g1 = g_direct(m1, go);
  go.seed = derive_seed(opt.seed, 2);
  const GEvalResult g2 = g_direct(m2, go);
  const HermitianOperator joint = kron_copies(m1, m2);
  go.seed = derive_seed(opt.seed, 3);
  if (g1.argmax_state && g2.argmax_state) {
    const PureStateVector prod(joint.dims(), kron(g1.argmax_state->amplitudes(), g2.argmax_state->amplitudes()));
    go.extra_states.push_back(group_copies(prod).amplitudes());
  }
  const GEvalResult g12 = detail::g_direct_on_log(
      detail::product_log(detail::checked_log(m1), detail::checked_log(m2)), grouped_dims(joint.dims()), go);
  if (g1.value.is_minus_infinity() || g2.value.is_minus_infinity() || g12.value.is_minus_infinity()) {
    throw DomainError("g_subadditivity_gap: g is minus infinity (zero operator)");
  }
  AdditivityGap gap;
  gap.lhs = g12.value.value();
  gap.rhs = g1.value.value() + g2.value.value();
  gap.gap = gap.rhs - gap.lhs;
  gap.direction = GapDirection::subadditivity_of_g;
  gap.mode = "g_direct on both sides";
  return gap;
}

/// rhs = E_F(rho) on the grouped split A1A2 | B1B2 (roof upper bound),
/// lhs = E_F(rho_I) + E_F(rho_II), gap = rhs - lhs.  For 2x2 copies the lhs is
/// the closed form; otherwise both sides are roof estimates and the mode says so.
inline AdditivityGap strong_superadditivity_gap(const DensityMatrix& rho, const GapOptions& opt = {}) {
  if (rho.dims().copies != 2) throw ShapeError("strong_superadditivity_gap needs a two-copy state");
  RoofOptions ro;
  ro.restarts = opt.roof_restarts;
  ro.threads = opt.threads;
  ro.seed = derive_seed(opt.seed, 10);
  AdditivityGap gap;
  gap.direction = GapDirection::strong_superadditivity_of_eof;
  gap.rhs = eof_roof(group_copies(rho), ro).value;
  const DensityMatrix r1 = reduce_to_copy(rho, 0), r2 = reduce_to_copy(rho, 1);
  if (rho.dims().dim_a == 2 && rho.dims().dim_b == 2) {
    gap.lhs = wootters_eof(r1) + wootters_eof(r2);
    gap.mode = "whole state roof, reductions closed form";
  } else {
    ro.seed = derive_seed(opt.seed, 11);
    gap.lhs = eof_roof(r1, ro).value;
    ro.seed = derive_seed(opt.seed, 12);
    gap.lhs += eof_roof(r2, ro).value;
    gap.mode = "both sides estimated";
  }
  gap.gap = gap.rhs - gap.lhs;
  return gap;
}

inline constexpr double kEstimatedSidesTolerance = 5e-3;

struct Prop2Report {
  AdditivityGap eof_gap;  // strong superadditivity of E_F for rho
  AdditivityGap g_gap;    // subadditivity of g for M1 (x) M2
  bool eof_violated = false;
  bool g_violated = false;
  bool transport_holds = false;  // eof violated => g violated (beyond tol/2)
  bool signs_agree = false;
};

/// Compares the strong-superadditivity gap of rho with the g-subadditivity gap
/// of M1 (x) M2, for M1, M2 candidate optimal dual operators of the reductions.
inline Prop2Report check_prop2_transport(const DensityMatrix& rho, const HermitianOperator& m1,
                                         const HermitianOperator& m2, double tol, const GapOptions& opt = {}) {
  if (rho.dims().copies != 2) throw ShapeError("check_prop2_transport needs a two-copy state");
  if (!(m1.dims() == rho.dims().single_copy()) || !(m2.dims() == rho.dims().single_copy())) {
    throw ShapeError("check_prop2_transport: M1, M2 must match the single-copy dims of rho");
  }
  Prop2Report r;
  r.eof_gap = strong_superadditivity_gap(rho, opt);
  r.g_gap = g_subadditivity_gap(m1, m2, opt);
  const double eof_tol = r.eof_gap.mode == "both sides estimated" ? std::max(tol, kEstimatedSidesTolerance) : tol;
  r.eof_violated = r.eof_gap.violated(eof_tol);
  r.g_violated = r.g_gap.violated(tol / 2);
  r.transport_holds = !r.eof_violated || r.g_violated;
  r.signs_agree = r.eof_violated == r.g_violated;
  return r;
}

/// M-form of a dual operator: M = exp(X - lambda_max(X)), so 0 < M <= I and
/// Tr[rho log M] - g(M) = Tr[rho X] - E*(X).
inline HermitianOperator m_form(const HermitianOperator& x) {
  const Spectrum s = eigh(x);
  return {x.dims(), from_spectrum(s.eigenvectors, (s.eigenvalues.array() - s.eigenvalues(0)).exp().matrix())};
}

}  // namespace eofdual
