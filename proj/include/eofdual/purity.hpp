#pragma once

#include "eofdual/conjugate.hpp"

#include <variant>

namespace eofdual {

inline constexpr double kChannelTolerance = 1e-9;

// ---------------------------------------------------------------------------
// channels

class KrausChannel {
 public:
  KrausChannel(std::vector<Matrix> elements, bool trace_preserving) : elements_(std::move(elements)) {
    if (elements_.empty()) throw ShapeError("KrausChannel needs at least one Kraus element");
    in_dim_ = elements_.front().cols();
    out_dim_ = elements_.front().rows();
    for (const auto& a : elements_) {
      if (a.cols() != in_dim_ || a.rows() != out_dim_) {
        throw ShapeError(detail::concat("KrausChannel: element of shape ", a.rows(), "x", a.cols(), ", expected ",
                                        out_dim_, "x", in_dim_));
      }
    }
    const Matrix s = completeness();
    const double top = lambda_max(s);
    if (top > 1.0 + kChannelTolerance) {
      throw DomainError(detail::concat("KrausChannel: sum A^dagger A exceeds identity (lambda_max ", top, ")"));
    }
    const double tp_defect = (s - Matrix::Identity(in_dim_, in_dim_)).cwiseAbs().maxCoeff();
    if (trace_preserving && tp_defect > kChannelTolerance) {
      throw DomainError(detail::concat("KrausChannel: not trace preserving (defect ", tp_defect, ")"));
    }
    trace_preserving_ = tp_defect <= kChannelTolerance;
  }

  /// Builds the channel and records whether it happens to be trace preserving.
  static KrausChannel detect(std::vector<Matrix> elements) { return KrausChannel(std::move(elements), false); }

  [[nodiscard]] const std::vector<Matrix>& elements() const { return elements_; }
  [[nodiscard]] Eigen::Index in_dim() const { return in_dim_; }
  [[nodiscard]] Eigen::Index out_dim() const { return out_dim_; }
  [[nodiscard]] bool trace_preserving() const { return trace_preserving_; }

  [[nodiscard]] Matrix completeness() const {
    Matrix s = Matrix::Zero(in_dim_, in_dim_);
    for (const auto& a : elements_) s.noalias() += a.adjoint() * a;
    return s;
  }

  [[nodiscard]] Matrix apply(const Matrix& rho) const {
    if (rho.rows() != in_dim_ || rho.cols() != in_dim_) {
      throw ShapeError(detail::concat("KrausChannel::apply: input is ", rho.rows(), "x", rho.cols(), ", expected ",
                                      in_dim_, "x", in_dim_));
    }
    Matrix out = Matrix::Zero(out_dim_, out_dim_);
    for (const auto& a : elements_) out.noalias() += a * rho * a.adjoint();
    return out;
  }

  /// Output for the pure input psi.
  [[nodiscard]] Matrix apply_pure(const Vector& psi) const {
    Matrix out = Matrix::Zero(out_dim_, out_dim_);
    for (const auto& a : elements_) {
      const Vector v = a * psi;
      out.noalias() += v * v.adjoint();
    }
    return out;
  }

 private:
  std::vector<Matrix> elements_;
  Eigen::Index in_dim_ = 0, out_dim_ = 0;
  bool trace_preserving_ = false;
};

/// Lambda1 (x) Lambda2 acting on the two-copy input, copy I first.
inline KrausChannel product_channel(const KrausChannel& l1, const KrausChannel& l2) {
  std::vector<Matrix> elems;
  for (const auto& a : l1.elements())
    for (const auto& b : l2.elements()) elems.push_back(kron(a, b));
  return KrausChannel::detect(std::move(elems));
}

/// rho -> (Tr[rho] I - rho^T)/(d-1), Kraus elements (|i><j| - |j><i|)/sqrt(d-1).
inline KrausChannel werner_holevo_channel(int d) {
  if (d < 2) throw ParameterError(detail::concat("werner_holevo_channel needs d >= 2, got ", d));
  std::vector<Matrix> elems;
  const double s = 1.0 / std::sqrt(static_cast<double>(d - 1));
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      Matrix a = Matrix::Zero(d, d);
      a(i, j) = s;
      a(j, i) = -s;
      elems.push_back(a);
    }
  return KrausChannel(std::move(elems), true);
}

/// rho -> Tr_A[M^{p/2} rho M^{p/2}] with 0 <= M <= I.
class FilterOp {
 public:
  FilterOp(HermitianOperator m, double p) : m_(std::move(m)), p_(p) {
    if (!(p > 0.0 && p <= 1.0)) throw DomainError(detail::concat("FilterOp: p must lie in (0, 1], got ", p));
    if (m_.dims().copies != 1) throw ShapeError("FilterOp expects a single-copy operator");
    const Spectrum s = eigh(m_);
    const double lo = s.eigenvalues.minCoeff(), hi = s.eigenvalues.maxCoeff();
    if (lo < -kStateEigenvalueTolerance || hi > 1.0 + kStateEigenvalueTolerance) {
      throw DomainError(detail::concat("FilterOp: spectrum of M must lie in [0, 1], got [", lo, ", ", hi, "]"));
    }
  }

  [[nodiscard]] const HermitianOperator& m() const { return m_; }
  [[nodiscard]] double exponent_p() const { return p_; }

 private:
  HermitianOperator m_;
  double p_;
};

namespace detail {

/// Kraus elements (<i| (x) I_B) X for i over H_A.
inline std::vector<Matrix> block_rows(const Matrix& x, int dim_a, int dim_b) {
  std::vector<Matrix> rows;
  for (int i = 0; i < dim_a; ++i) rows.push_back(x.middleRows(static_cast<Eigen::Index>(i) * dim_b, dim_b));
  return rows;
}

inline void require_filter_spectrum(const HermitianOperator& x, const char* what) {
  const Spectrum s = eigh(x);
  const double lo = s.eigenvalues.minCoeff(), hi = s.eigenvalues.maxCoeff();
  if (lo < -kStateEigenvalueTolerance || hi > 1.0 + kStateEigenvalueTolerance) {
    throw DomainError(detail::concat(what, ": spectrum must lie in [0, 1], got [", lo, ", ", hi, "]"));
  }
}

}  // namespace detail

/// Kraus form of the filter: the dA block rows of M^{p/2}.  Zero blocks are kept.
inline KrausChannel filter_channel(const FilterOp& f) {
  const auto& d = f.m().dims();
  const Matrix root = matrix_fn(f.m(), MatrixFunction::power(f.exponent_p() / 2)).matrix();
  return KrausChannel::detect(detail::block_rows(root, d.dim_a, d.dim_b));
}

inline KrausChannel filter_channel(const HermitianOperator& m, double p) { return filter_channel(FilterOp(m, p)); }

// ---------------------------------------------------------------------------
// maximal output purity

struct PurityOptions {
  int restarts = 32;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<Vector> extra_starts;
};

struct PurityResult {
  double value = 0.0;
  Vector argmax_input;
  Matrix output;
};

namespace detail {

class OutputNormObjective {
 public:
  OutputNormObjective(const KrausChannel& ch, double q) : ch_(&ch), q_(q) {}

  double operator()(const Vector& psi, Vector& grad) const {
    const Matrix y = ch_->apply_pure(psi);
    const Spectrum s = eigh(y);
    const RealVector ev = s.eigenvalues.cwiseMax(0.0);
    const double norm = schatten_from_values(ev, q_);
    Matrix weight;
    if (std::isinf(q_)) {
      weight = s.eigenvectors.col(0) * s.eigenvectors.col(0).adjoint();
    } else if (norm > 0.0) {
      const RealVector w = (ev / norm).array().pow(q_ - 1.0);
      weight = from_spectrum(s.eigenvectors, w);
    } else {
      weight = Matrix::Zero(y.rows(), y.cols());
    }
    grad = Vector::Zero(psi.size());
    for (const auto& a : ch_->elements()) grad.noalias() += a.adjoint() * (weight * (a * psi));
    grad *= 2.0;
    return norm;
  }

 private:
  const KrausChannel* ch_;
  double q_;
};

inline double output_norm(const KrausChannel& ch, const Vector& psi, double q) {
  return schatten_from_values(eigh(ch.apply_pure(psi)).eigenvalues.cwiseMax(0.0), q);
}

}  // namespace detail

/// nu_q = max over pure inputs of the Schatten q-norm of the output.
inline PurityResult nu_q(const KrausChannel& ch, double q, const PurityOptions& opt = {}) {
  if (!(q >= 1.0)) throw DomainError(detail::concat("nu_q needs q >= 1, got ", q));
  const detail::OutputNormObjective objective(ch, q);
  const auto n = ch.in_dim();
  std::vector<Vector> starts = opt.extra_starts;
  {
    // top eigenvector of sum_i A_i^dagger A_i: the input with the most surviving weight
    starts.push_back(eigh(ch.completeness()).eigenvectors.col(0));
  }
  LbfgsOptions lo;
  lo.gradient_tolerance = 1e-11;
  auto run = [&](int i, std::uint64_t sub) {
    Vector start;
    if (i < static_cast<int>(starts.size())) {
      start = starts[i];
    } else {
      Rng rng(sub);
      start = rng.complex_gaussian(n);
    }
    auto obj = objective;
    SphereMaximum m = maximize_on_sphere(obj, start, lo);
    m.value = detail::output_norm(ch, m.point, q);
    return m;
  };
  const int total = std::max<int>(opt.restarts, static_cast<int>(starts.size()));
  const SphereMaximum best = best_of_restarts(RestartOptions{total, opt.seed, opt.threads}, run,
                                              [](const SphereMaximum& a, const SphereMaximum& b) {
                                                return a.value > b.value;
                                              });
  PurityResult r;
  r.value = best.value;
  r.argmax_input = best.point;
  r.output = ch.apply_pure(best.point);
  return r;
}

/// max over pure phi of ||Tr_A[X Phi X]||_q for 0 <= X <= I, with p and q decoupled.
inline PurityResult general_filter_purity(const HermitianOperator& x, double q, const PurityOptions& opt = {}) {
  if (x.dims().copies != 1) throw ShapeError("general_filter_purity expects a single-copy operator");
  detail::require_filter_spectrum(x, "general_filter_purity");
  const auto& d = x.dims();
  return nu_q(KrausChannel::detect(detail::block_rows(x.matrix(), d.dim_a, d.dim_b)), q, opt);
}

// ---------------------------------------------------------------------------
// h_p and the Lie-Trotter sweep

struct HpOptions {
  int restarts = 16;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<Matrix> extra_w;  // starting factors W (tau = W W^dagger / Tr)
};

struct HpResult {
  double value = 0.0;  // h_p
  double root = 0.0;   // h_p^{1/p}
  Matrix argmax_w;
  DensityMatrix argmax_tau;
};

namespace detail {

/// lambda_max of (I (x) tau)^{p/2} M^p (I (x) tau)^{p/2}, evaluated on H_A (x) ran(tau).
class HpValue {
 public:
  HpValue(const HermitianOperator& m, double p)
      : m_pow_(matrix_fn(m, MatrixFunction::power(p)).matrix()), p_(p), dim_a_(m.dims().dim_a) {}

  double operator()(const Matrix& w) const {
    const TauFrame f = tau_frame(w);
    const Matrix s = lift_to_b(dim_a_, f.q);
    const Matrix g_half = lift_to_b(dim_a_, from_spectrum(f.g_vectors, f.g.array().pow(p_ / 2).matrix()));
    return lambda_max(g_half * (s.adjoint() * m_pow_ * s) * g_half);
  }

 private:
  Matrix m_pow_;
  double p_;
  int dim_a_;
};

}  // namespace detail

inline HpResult h_p(const HermitianOperator& m, double p, const HpOptions& opt = {}) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError(detail::concat("h_p needs p in (0, 1], got ", p));
  const FilterOp filter(m, p);  // validates 0 <= M <= I
  const auto& d = m.dims();
  const detail::HpValue value(m, p);
  // maximize (1/p) log h so the objective stays well scaled as p -> 0
  auto log_root = [&](const Matrix& w) {
    const double v = value(w);
    return v > 0.0 ? std::log(v) / p : -std::numeric_limits<double>::infinity();
  };
  std::vector<Matrix> seeds = opt.extra_w;
  seeds.push_back(Matrix::Identity(d.dim_b, d.dim_b) / std::sqrt(static_cast<double>(d.dim_b)));
  const auto best = detail::maximize_over_tau(log_root, d.dim_a, d.dim_b, opt.restarts, opt.seed, opt.threads, seeds);
  HpResult r;
  r.argmax_w = best.w;
  r.argmax_tau = DensityMatrix({d.dim_b, 1, 1}, detail::tau_from_w(best.w));
  r.value = value(best.w);
  r.root = std::isfinite(best.value) ? std::exp(best.value) : 0.0;
  return r;
}

inline const std::vector<double>& default_p_grid() {
  static const std::vector<double> grid{1, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001};
  return grid;
}

struct PuritySweepRow {
  double p = 0.0;
  double h_p = 0.0;
  double h_p_pow_inv = 0.0;
  double exp_g = 0.0;
  double gap = 0.0;
};

struct PuritySweep {
  std::vector<PuritySweepRow> rows;
  double max_increase = 0.0;  // largest rise of the gap from one row to the next
  bool monotone = true;       // gap non-increasing within 1e-8
  bool nonnegative = true;    // gap >= -1e-8 in every row
};

inline constexpr double kSweepTolerance = 1e-8;

/// h_p and h_p^{1/p} down a descending p grid, against exp g(M) from g_eigen.
/// Each h_p search is warm-started from the g-optimal tau and the previous row.
inline PuritySweep trotter_sweep(const HermitianOperator& m, const std::vector<double>& p_grid,
                                 const HpOptions& opt = {}) {
  if (p_grid.empty()) throw ParameterError("trotter_sweep: empty p grid");
  for (std::size_t i = 0; i < p_grid.size(); ++i) {
    if (!(p_grid[i] > 0.0 && p_grid[i] <= 1.0)) {
      throw ParameterError(detail::concat("trotter_sweep: p = ", p_grid[i], " outside (0, 1]"));
    }
    if (i > 0 && p_grid[i] >= p_grid[i - 1]) throw ParameterError("trotter_sweep: p grid must be strictly descending");
  }
  GOptions go;
  go.restarts = std::max(opt.restarts, 16);
  go.seed = derive_seed(opt.seed, 0);
  go.threads = opt.threads;
  const GEvalResult g = g_eigen(m, go);
  const double exp_g = g.value.is_minus_infinity() ? 0.0 : std::exp(g.value.value());
  const auto& d = m.dims();
  std::vector<Matrix> g_seeds;
  for (int k : detail::tau_ranks(d.dim_a, d.dim_b)) g_seeds.push_back(detail::w_for_tau(g.argmax_tau.matrix(), k));

  PuritySweep sweep;
  Matrix previous;
  for (std::size_t i = 0; i < p_grid.size(); ++i) {
    HpOptions ho = opt;
    ho.seed = derive_seed(opt.seed, i + 1);
    ho.extra_w = g_seeds;
    if (previous.size()) ho.extra_w.push_back(previous);
    const HpResult h = h_p(m, p_grid[i], ho);
    previous = h.argmax_w;
    PuritySweepRow row{p_grid[i], h.value, h.root, exp_g, h.root - exp_g};
    if (!sweep.rows.empty()) {
      const double rise = row.gap - sweep.rows.back().gap;
      sweep.max_increase = std::max(sweep.max_increase, rise);
      if (rise > kSweepTolerance) sweep.monotone = false;
    }
    if (row.gap < -kSweepTolerance) sweep.nonnegative = false;
    sweep.rows.push_back(row);
  }
  return sweep;
}

struct PurityDualityReport {
  double h_p = 0.0;
  double nu_q = 0.0;
  double q = 0.0;
  double difference = 0.0;
  bool agrees = false;
};

inline constexpr double kPurityDualityTolerance = 1e-6;

/// h_p(M) against nu_q of the filter channel at q = 1/(1-p).
inline PurityDualityReport purity_duality_check(const HermitianOperator& m, double p, int restarts,
                                                std::uint64_t seed) {
  HpOptions ho;
  ho.restarts = restarts;
  ho.seed = derive_seed(seed, 1);
  PurityOptions po;
  po.restarts = restarts;
  po.seed = derive_seed(seed, 2);
  PurityDualityReport r;
  r.q = p >= 1.0 ? std::numeric_limits<double>::infinity() : 1.0 / (1.0 - p);
  r.h_p = h_p(m, p, ho).value;
  r.nu_q = nu_q(filter_channel(m, p), r.q, po).value;
  r.difference = r.h_p - r.nu_q;
  r.agrees = std::abs(r.difference) <= kPurityDualityTolerance;
  return r;
}

// ---------------------------------------------------------------------------
// channel embedding

struct FilterEmbedding {
  FilterOp filter;  // M = U Sigma U^dagger, a projector; any p gives the same filter
  Matrix unitary;   // U; its first out_dim columns are the Stinespring isometry
  int padded_elements = 0;
};

/// Writes a square channel as a filter on H_K (x) H_out, K = number of Kraus
/// elements (padded with zeros to at least 2).  The Stinespring isometry
/// V phi = sum_i |i> (x) A_i phi is completed to a unitary U and M = V V^dagger.
inline FilterEmbedding embed_channel_as_filter(const KrausChannel& ch) {
  if (ch.in_dim() != ch.out_dim()) {
    throw ShapeError(detail::concat("embed_channel_as_filter: unsupported non-square channel ", ch.out_dim(), "x",
                                    ch.in_dim()));
  }
  if (!ch.trace_preserving()) throw DomainError("embed_channel_as_filter: channel must be trace preserving");
  const auto d = ch.in_dim();
  std::vector<Matrix> elems = ch.elements();
  int padded = 0;
  while (elems.size() < 2) {
    elems.push_back(Matrix::Zero(d, d));
    ++padded;
  }
  const auto k = static_cast<Eigen::Index>(elems.size());
  Matrix v(k * d, d);
  for (Eigen::Index i = 0; i < k; ++i) v.middleRows(i * d, d) = elems[i];
  // complete V to a unitary: orthonormal basis of the complement of ran(V)
  const Matrix proj = Matrix::Identity(k * d, k * d) - v * v.adjoint();
  const Spectrum s = eigh(proj);
  Matrix u(k * d, k * d);
  u.leftCols(d) = v;
  u.rightCols(k * d - d) = s.eigenvectors.leftCols(k * d - d);
  const BipartiteDims dims(static_cast<int>(k), static_cast<int>(d), 1);
  return {FilterOp(HermitianOperator(dims, v * v.adjoint()), 0.5), u, padded};
}

// ---------------------------------------------------------------------------
// multiplicativity

using ChannelLike = std::variant<KrausChannel, FilterOp>;

namespace detail {
inline KrausChannel as_channel(const ChannelLike& c) {
  if (const auto* k = std::get_if<KrausChannel>(&c)) return *k;
  return filter_channel(std::get<FilterOp>(c));
}
}  // namespace detail

struct MultiplicativityResult {
  AdditivityGap gap;
  Vector witness;  // best two-copy input found
  double nu_single_1 = 0.0, nu_single_2 = 0.0, nu_joint = 0.0;
};

/// Maximally entangled vector sum_i |i>|i>/sqrt(d) on two copies of dimension d.
inline Vector maximally_entangled(Eigen::Index d) {
  Vector v = Vector::Zero(d * d);
  for (Eigen::Index i = 0; i < d; ++i) v(i * d + i) = 1.0 / std::sqrt(static_cast<double>(d));
  return v;
}

/// lhs = nu_q(L1 (x) L2), rhs = nu_q(L1) nu_q(L2), gap = ln rhs - ln lhs.
/// The joint search starts from the maximally entangled input (equal input
/// dims) and from the product of the single-copy maximizers.
inline MultiplicativityResult multiplicativity_gap(const ChannelLike& c1, const ChannelLike& c2, double q,
                                                   const PurityOptions& opt = {}) {
  const KrausChannel l1 = detail::as_channel(c1), l2 = detail::as_channel(c2);
  PurityOptions po = opt;
  po.extra_starts.clear();
  po.seed = derive_seed(opt.seed, 1);
  const PurityResult n1 = nu_q(l1, q, po);
  po.seed = derive_seed(opt.seed, 2);
  const PurityResult n2 = nu_q(l2, q, po);
  const KrausChannel joint = product_channel(l1, l2);
  po.seed = derive_seed(opt.seed, 3);
  po.extra_starts = opt.extra_starts;
  if (l1.in_dim() == l2.in_dim()) po.extra_starts.push_back(maximally_entangled(l1.in_dim()));
  po.extra_starts.push_back(kron(n1.argmax_input, n2.argmax_input));
  const PurityResult n12 = nu_q(joint, q, po);
  MultiplicativityResult r;
  r.nu_single_1 = n1.value;
  r.nu_single_2 = n2.value;
  r.nu_joint = n12.value;
  r.witness = n12.argmax_input;
  r.gap.lhs = n12.value;
  r.gap.rhs = n1.value * n2.value;
  r.gap.gap = std::log(r.gap.rhs) - std::log(r.gap.lhs);
  r.gap.direction = GapDirection::multiplicativity_of_nu_q;
  r.gap.mode = "nu_q search on both sides";
  return r;
}

}  // namespace eofdual
