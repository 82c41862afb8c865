#include "support.hpp"

#include <gtest/gtest.h>

using namespace eofdual;

namespace {

constexpr double kWernerLike08 = 0.41024429307387456;
const BipartiteDims k22(2, 2);

ConjugateOptions conj_opts(int restarts, std::uint64_t seed = 0) {
  ConjugateOptions o;
  o.restarts = restarts;
  o.seed = seed;
  return o;
}

GOptions g_opts(int restarts, std::uint64_t seed = 0) {
  GOptions o;
  o.restarts = restarts;
  o.seed = seed;
  return o;
}

// <psi|X|psi> - S(Tr_B psi) through the oracle entropy
double oracle_score(const Matrix& x, const Vector& psi, int da, int db) {
  const Vector v = psi.normalized();
  return (v.adjoint() * x * v)(0, 0).real() - oracle::entropy(oracle::trace_out_b(v * v.adjoint(), da, db));
}

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST(Conjugate, Examples) {
  EXPECT_NEAR(conjugate_e(HermitianOperator::zero(k22)).value, 0.0, 1e-10);
  EXPECT_NEAR(conjugate_e(HermitianOperator::identity(k22) * 2.5).value, 2.5, 1e-10);
  const HermitianOperator x = sample_hermitian(k22, 4);
  const double base = conjugate_e(x, conj_opts(16)).value;
  EXPECT_NEAR(conjugate_e(x.shifted(0.7), conj_opts(16)).value, base + 0.7, 1e-8);
}

TEST(Conjugate, LocalOperatorsGiveSumOfTopEigenvalues) {
  for (int t = 0; t < 5; ++t) {
    const Matrix xa = sample_hermitian(BipartiteDims(2, 1), 2 * t).matrix();
    const Matrix xb = sample_hermitian(BipartiteDims(3, 1), 2 * t + 1).matrix();
    const BipartiteDims d(2, 3);
    const HermitianOperator x(d, kron_ab(xa, Matrix::Identity(3, 3)).matrix + kron_ab(Matrix::Identity(2, 2), xb).matrix);
    EXPECT_NEAR(conjugate_e(x, conj_opts(8)).value, lambda_max(xa) + lambda_max(xb), 1e-8);
  }
}

TEST(Conjugate, RejectsTwoCopyOperators) {
  const HermitianOperator x = sample_hermitian(k22, 1);
  EXPECT_THROW(conjugate_e(kron_copies(x, x)), ShapeError);
}

TEST(Conjugate, MonteCarloOracle) {
  // sample the sphere, then polish the best samples by random-step hill
  // climbing on the oracle score; the library value must match within 1e-3
  // and be achieved by its own argmax when rescored independently
  for (int t = 0; t < 3; ++t) {
    const HermitianOperator x = sample_hermitian(k22, 50 + t);
    const ConjugateResult r = conjugate_e(x, conj_opts(32, t));
    EXPECT_NEAR(oracle_score(x.matrix(), r.argmax_state.amplitudes(), 2, 2), r.value, 1e-10);
    Rng rng(900 + t);
    std::vector<std::pair<double, Vector>> top;
    for (int s = 0; s < 200000; ++s) {
      Vector v = rng.complex_gaussian(4).normalized();
      const double f = oracle_score(x.matrix(), v, 2, 2);
      top.emplace_back(f, v);
      if (top.size() > 64) {
        std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        top.resize(8);
      }
    }
    std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    top.resize(8);
    double best = -1e300;
    for (auto [f, v] : top) {
      EXPECT_GE(r.value, f - 1e-12);
      for (double step = 0.1; step > 1e-6; step *= 0.7) {
        for (int k = 0; k < 60; ++k) {
          const Vector w = (v + step * rng.complex_gaussian(4)).normalized();
          const double fw = oracle_score(x.matrix(), w, 2, 2);
          if (fw > f) f = fw, v = w;
        }
      }
      best = std::max(best, f);
    }
    EXPECT_GE(r.value, best - 1e-12);
    EXPECT_NEAR(r.value, best, 1e-3);
  }
}

TEST(Conjugate, Convex) {
  for (int t = 0; t < 5; ++t) {
    const HermitianOperator x = sample_hermitian(k22, 10 + t), y = sample_hermitian(k22, 20 + t);
    const double fx = conjugate_e(x, conj_opts(16)).value, fy = conjugate_e(y, conj_opts(16)).value;
    const double mid = conjugate_e((x + y) * 0.5, conj_opts(16)).value;
    EXPECT_LE(mid, 0.5 * (fx + fy) + 1e-9);
  }
}

TEST(Conjugate, DeterministicForFixedSeed) {
  const HermitianOperator x = sample_hermitian(BipartiteDims(2, 3), 3);
  EXPECT_EQ(conjugate_e(x, conj_opts(4, 7)).value, conjugate_e(x, conj_opts(4, 7)).value);
}

TEST(GFunction, Examples) {
  for (GMethod m : {GMethod::direct, GMethod::eigen}) {
    SCOPED_TRACE(to_string(m));
    EXPECT_NEAR(g_evaluate(HermitianOperator::identity(k22), m, g_opts(8)).value.value(), 0.0, 1e-9);
    const Matrix sigma = diag2(0.7, 0.3);
    const HermitianOperator m_op(k22, lift_to_b(2, sigma));
    EXPECT_NEAR(g_evaluate(m_op, m, g_opts(8)).value.value(), std::log(0.7), 1e-8);
  }
}

TEST(GFunction, ProjectorOntoBellState) {
  // only the Bell state is in the range, so g = 0 - ln 2
  const HermitianOperator p(k22, oracle::bell_projector());
  EXPECT_NEAR(g_direct(p, g_opts(4)).value.value(), -std::log(2.0), 1e-9);
  EXPECT_NEAR(g_eigen(p, g_opts(16)).value.value(), -std::log(2.0), 1e-6);
}

TEST(GFunction, RejectsNonPositive) {
  Matrix m = Matrix::Identity(4, 4);
  m(0, 0) = -0.1;
  EXPECT_THROW(g_direct(HermitianOperator(k22, m)), DomainError);
  EXPECT_THROW(g_eigen(HermitianOperator(k22, m)), DomainError);
}

TEST(GFunction, DirectAndEigenAgree) {
  for (int t = 0; t < 6; ++t) {
    const BipartiteDims d(2, 2 + t % 2);
    const HermitianOperator m = sample_filter_m(d, 300 + t);
    const double a = g_direct(m, g_opts(32, t)).value.value();
    const double b = g_eigen(m, g_opts(32, t)).value.value();
    EXPECT_NEAR(a, b, 1e-6) << "t=" << t;
  }
}

TEST(GFunction, SingularFilterAgrees) {
  // rank-3 M on 2x2
  const Matrix u = sample_unitary(4, 8);
  RealVector ev(4);
  ev << 0.9, 0.5, 0.2, 0.0;
  const HermitianOperator m(k22, from_spectrum(u, ev));
  EXPECT_NEAR(g_direct(m, g_opts(32)).value.value(), g_eigen(m, g_opts(32)).value.value(), 1e-6);
}

TEST(GFunction, LoewnerMonotone) {
  for (int t = 0; t < 4; ++t) {
    const HermitianOperator m1 = sample_filter_m(k22, 40 + t);
    const Vector v = sample_haar_pure(k22, 60 + t).amplitudes();
    const HermitianOperator m2(k22, m1.matrix() + 0.3 * v * v.adjoint());
    EXPECT_LE(g_direct(m1, g_opts(16)).value.value(), g_direct(m2, g_opts(16)).value.value() + 1e-9);
  }
}

TEST(GFunction, ConjugateOfLog) {
  const HermitianOperator m = sample_filter_m(k22, 5);
  const HermitianOperator x = matrix_fn(m, MatrixFunction::log());
  EXPECT_NEAR(g_direct(m, g_opts(16)).value.value(), conjugate_e(x, conj_opts(16)).value, 1e-9);
}

TEST(GFunction, TwoCopyOperatorsAreGrouped) {
  const Matrix sigma = diag2(0.6, 0.4);
  const HermitianOperator m1(k22, lift_to_b(2, sigma));
  const HermitianOperator joint = kron_copies(m1, m1);
  EXPECT_NEAR(g_direct(joint, g_opts(8)).value.value(), 2 * std::log(0.6), 1e-8);
}

TEST(Dual, ZeroOperator) {
  EXPECT_NEAR(dual_lower_bound(sample_ginibre_density(k22, 1), HermitianOperator::zero(k22)), 0.0, 1e-10);
}

TEST(Dual, BellWithLogOfRegularizedProjector) {
  const DensityMatrix bell(k22, oracle::bell_projector());
  const HermitianOperator x =
      matrix_fn(HermitianOperator(k22, oracle::bell_projector() + 1e-6 * Matrix::Identity(4, 4)), MatrixFunction::log());
  const double b = dual_lower_bound(bell, x, conj_opts(16));
  EXPECT_LE(b, std::log(2.0) + 1e-4);
  EXPECT_GE(b, 0.0);
}

TEST(Dual, NeverExceedsWootters) {
  for (int t = 0; t < 40; ++t) {
    const DensityMatrix rho = sample_ginibre_density(k22, 500 + t, 1 + t % 4);
    const HermitianOperator x = sample_hermitian(k22, 600 + t) * (1 + t % 5);
    EXPECT_LE(dual_lower_bound(rho, x, conj_opts(16, t)), oracle::wootters(rho.matrix()) + 1e-6);
  }
}

TEST(Dual, ShapeMismatch) {
  EXPECT_THROW(dual_lower_bound(sample_ginibre_density(k22, 1), HermitianOperator::zero(BipartiteDims(2, 3))),
               ShapeError);
}

TEST(FhatEstimate, Examples) {
  DualEstimateOptions o;
  o.restarts = 8;
  const PureStateVector psi = sample_haar_pure(k22, 3);
  EXPECT_NEAR(fhat_dual_estimate(psi.density(), o).value, pure_entanglement(psi), 5e-3);
  EXPECT_NEAR(fhat_dual_estimate(DensityMatrix::maximally_mixed(k22), o).value, 0.0, 1e-6);
  const DualEstimate w = fhat_dual_estimate(DensityMatrix(k22, oracle::werner_like(0.8)), o);
  EXPECT_NEAR(w.value, kWernerLike08, 5e-3);
  EXPECT_LE(w.value, kWernerLike08 + 1e-6);
  const Spectrum s = eigh(w.x);
  EXPECT_LE(0.5 * (s.eigenvalues(0) - s.eigenvalues(3)), o.x_norm_cap + 1e-9);
}

TEST(FhatEstimate, BellReachesLog2) {
  DualEstimateOptions o;
  o.restarts = 8;
  EXPECT_NEAR(fhat_dual_estimate(DensityMatrix(k22, oracle::bell_projector()), o).value, std::log(2.0), 1e-6);
}

TEST(Prop1, BellState) {
  const DensityMatrix bell(k22, oracle::bell_projector());
  DualEstimateOptions o;
  o.restarts = 8;
  const DualEstimate est = fhat_dual_estimate(bell, o);
  const Ensemble ens({EnsembleMember{1.0, PureStateVector(k22, oracle::bell_vector())}});
  const Prop1Report r = check_prop1_ensemble(bell, est.x, ens, 1e-3, conj_opts(16));
  EXPECT_TRUE(r.members_optimal);
  EXPECT_TRUE(r.tau_optimal);
  EXPECT_LE(r.max_abs_defect, 1e-3);
}

TEST(Prop1, WernerLikeWithRoofEnsemble) {
  const DensityMatrix w(k22, oracle::werner_like(0.8));
  DualEstimateOptions o;
  o.restarts = 8;
  const DualEstimate est = fhat_dual_estimate(w, o);
  RoofOptions ro;
  ro.restarts = 16;
  const RoofResult roof = eof_roof(w, ro);
  const Prop1Report r = check_prop1_ensemble(w, est.x, roof.ensemble, 1e-3, conj_opts(16));
  EXPECT_LE(r.max_abs_defect, 1e-3);
  EXPECT_LE(r.closure_residual, 1e-3);
}

TEST(Prop1, NegativeControlDetectsSuboptimalEnsemble) {
  // Bell basis ensemble of I/4 against X = 0: each member misses by ln 2
  const DensityMatrix mixed = DensityMatrix::maximally_mixed(k22);
  Matrix b(4, 4);
  b << 1, 0, 0, 1, 1, 0, 0, -1, 0, 1, 1, 0, 0, 1, -1, 0;
  b /= std::sqrt(2.0);
  std::vector<EnsembleMember> members;
  for (int i = 0; i < 4; ++i) members.push_back({0.25, PureStateVector(k22, b.row(i).transpose())});
  const Prop1Report r = check_prop1_ensemble(mixed, HermitianOperator::zero(k22), Ensemble(members), 1e-3);
  EXPECT_NEAR(r.max_abs_defect, std::log(2.0), 1e-9);
  EXPECT_FALSE(r.members_optimal);
  EXPECT_FALSE(r.tau_optimal);
}

TEST(Prop1, RejectsForeignEnsemble) {
  const Ensemble ens({EnsembleMember{1.0, PureStateVector::basis(k22, 0)}});
  EXPECT_THROW(check_prop1_ensemble(DensityMatrix::maximally_mixed(k22), HermitianOperator::zero(k22), ens, 1e-3),
               ParameterError);
}

TEST(Gaps, GIsAdditiveOnLocalFilters) {
  const HermitianOperator m1 = HermitianOperator::identity(k22);
  const HermitianOperator m2(k22, lift_to_b(2, diag2(0.8, 0.2)));
  GapOptions o;
  o.restarts = 8;
  const AdditivityGap g = g_subadditivity_gap(m1, m2, o);
  EXPECT_EQ(g.direction, GapDirection::subadditivity_of_g);
  EXPECT_NEAR(g.gap, 0.0, 1e-8);
  EXPECT_NEAR(g.rhs, std::log(0.8), 1e-8);
  EXPECT_DOUBLE_EQ(g.gap, g.rhs - g.lhs);
  EXPECT_DOUBLE_EQ(g.reverse_gap(), -g.gap);
}

TEST(Gaps, GSubadditivityHoldsOnRandomFilters) {
  GapOptions o;
  o.restarts = 8;
  for (int t = 0; t < 4; ++t) {
    o.seed = t;
    const AdditivityGap g = g_subadditivity_gap(sample_filter_m(k22, 70 + 2 * t), sample_filter_m(k22, 71 + 2 * t), o);
    EXPECT_FALSE(g.violated(1e-4)) << g.gap;
    // the product of the single argmaxes is always available, so lhs >= rhs
    EXPECT_LE(g.gap, 1e-9);
  }
}

TEST(Gaps, StrongSuperadditivityOnProductOfPureStates) {
  const PureStateVector p1 = sample_haar_pure(k22, 1), p2 = sample_haar_pure(k22, 2);
  const DensityMatrix rho = kron_copies(p1.density(), p2.density());
  const AdditivityGap g = strong_superadditivity_gap(rho);
  EXPECT_EQ(g.direction, GapDirection::strong_superadditivity_of_eof);
  EXPECT_NEAR(g.lhs, pure_entanglement(p1) + pure_entanglement(p2), 1e-9);
  EXPECT_NEAR(g.gap, 0.0, 1e-9);
  EXPECT_THROW(strong_superadditivity_gap(p1.density()), ShapeError);
}

TEST(Prop2, ProductAndGhzLikeStates) {
  GapOptions go;
  go.restarts = 8;
  go.roof_restarts = 4;
  DualEstimateOptions od;
  od.restarts = 8;
  const PureStateVector p1 = sample_haar_pure(k22, 11), p2 = sample_haar_pure(k22, 12);
  const std::vector<DensityMatrix> states = {
      kron_copies(p1.density(), p2.density()),
      // (|0000> + |1111>)/sqrt2 across the two copies
      DensityMatrix(BipartiteDims(2, 2, 2),
                    [] {
                      Vector v = Vector::Zero(16);
                      v(0) = v(15) = M_SQRT1_2;
                      return Matrix(v * v.adjoint());
                    }())};
  for (const auto& rho : states) {
    const HermitianOperator m1 = m_form(fhat_dual_estimate(reduce_to_copy(rho, 0), od).x);
    const HermitianOperator m2 = m_form(fhat_dual_estimate(reduce_to_copy(rho, 1), od).x);
    const Prop2Report r = check_prop2_transport(rho, m1, m2, 1e-4, go);
    EXPECT_TRUE(r.transport_holds);
    EXPECT_TRUE(r.signs_agree);
    EXPECT_FALSE(r.eof_violated);
  }
}

TEST(Prop2, ShapeErrors) {
  const DensityMatrix one = sample_ginibre_density(k22, 0);
  const HermitianOperator id = HermitianOperator::identity(k22);
  EXPECT_THROW(check_prop2_transport(one, id, id, 1e-4), ShapeError);
  const DensityMatrix two = kron_copies(one, one);
  EXPECT_THROW(check_prop2_transport(two, HermitianOperator::identity(BipartiteDims(2, 3)), id, 1e-4), ShapeError);
}

TEST(MForm, PreservesDualValue) {
  const HermitianOperator x = sample_hermitian(k22, 8);
  const HermitianOperator m = m_form(x);
  EXPECT_NEAR(lambda_max(m.matrix()), 1.0, 1e-12);
  const DensityMatrix rho = sample_ginibre_density(k22, 9);
  const double via_x = dual_lower_bound(rho, x, conj_opts(16));
  const double via_m = (rho.matrix() * matrix_fn(m.matrix(), MatrixFunction::log())).trace().real() -
                       g_direct(m, g_opts(16)).value.value();
  EXPECT_NEAR(via_x, via_m, 1e-8);
}
