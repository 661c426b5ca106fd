#include <gtest/gtest.h>

#include <random>

#include "fml/magnus.hpp"
#include "test_util.hpp"

using namespace fml;

namespace {

DrivenSystem linear_toy(double T) {
  // H = A + t B with A = X0 + 0.5 Z0 Z1, B = Z0 + Y1
  DrivenSystem s(2, T);
  s.add_static(pauli("X", {0}));
  s.add_static(pauli("ZZ", {0, 1}, 0.5));
  s.add_driving(pauli("Z", {0}), Profile::polynomial({0.0, 1.0}));
  s.add_driving(pauli("Y", {1}), Profile::polynomial({0.0, 1.0}));
  return s;
}

}  // namespace

TEST(Magnus, BernoulliCoefficients) {
  EXPECT_DOUBLE_EQ(bernoulli_over_factorial(0), 1.0);
  EXPECT_DOUBLE_EQ(bernoulli_over_factorial(1), -0.5);
  EXPECT_NEAR(bernoulli_over_factorial(2) * 12, 1.0, 1e-14);
  EXPECT_NEAR(bernoulli_over_factorial(4) * 720, -1.0, 1e-14);
  EXPECT_NEAR(bernoulli_over_factorial(6) * 30240, 1.0, 1e-12);
  EXPECT_NEAR(bernoulli_over_factorial(8) * 1209600, -1.0, 1e-12);
  EXPECT_NEAR(bernoulli_over_factorial(10) * 47900160.0, 1.0, 1e-12);
  EXPECT_EQ(bernoulli_over_factorial(7), 0.0);
}

TEST(Magnus, LinearToyClosedForm) {
  for (double T : {0.1, 0.7, 2.0}) {
    const auto s = linear_toy(T);
    const PauliOperator a = s.h0();
    PauliOperator b(2);
    b.add(pauli("Z", {0}));
    b.add(pauli("Y", {1}));
    MagnusOptions opt;
    opt.backend = MagnusBackend::Pauli;
    const auto series = omega_series(s, 3, opt);
    PauliOperator o0 = a;
    add_scaled(o0, b, T / 2);
    EXPECT_LT(series.omega_pauli(0).distance(o0), 1e-14);
    PauliOperator o1(2);
    add_commutator(o1, a, b, cplx(0, T / 12));
    EXPECT_LT(series.omega_pauli(1).distance(o1), 1e-14 * std::max(1.0, T));
    EXPECT_LT(omega_direct(s, 1).distance(o1), 1e-14 * std::max(1.0, T));
  }
}

TEST(Magnus, StaticHamiltonianHasOnlyZerothOrder) {
  std::mt19937_64 rng(5);
  DrivenSystem s(3, 0.8);
  add_chain_bonds(s, false);
  add_heisenberg(s, 1.0, 0.4, -0.3);
  s.add_static(pauli("X", {1}, 0.7));
  const auto series = omega_series(s, 5);
  EXPECT_LT((series.omega_full(0) - to_dense(s.h0())).norm(), 1e-13);
  for (int n = 1; n <= 5; ++n) EXPECT_EQ(series.omega(n).max_abs(), 0.0);
}

TEST(Magnus, RecursionMatchesDirectFormulas) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    RandomSystemOptions ro;
    ro.n_sites = 4;
    const double T = 0.3 + 0.1 * static_cast<double>(seed % 4);
    const auto s = random_system(seed, T, ro);
    MagnusOptions po;
    po.backend = MagnusBackend::Pauli;
    const auto series = omega_series(s, 2, po);
    for (int n = 0; n <= 2; ++n) {
      const auto direct = omega_direct(s, n);
      const double scale = std::max(1.0, direct.max_abs_coefficient());
      EXPECT_LT(series.omega_pauli(n).distance(direct), 1e-12 * scale) << "seed " << seed << " n " << n;
    }
  }
}

TEST(Magnus, RecursionMatchesDirectFormulasPiecewise) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    RandomSystemOptions ro;
    ro.n_sites = 3;
    ro.degree = 1 + static_cast<int>(seed % 3);
    ro.pieces = 1 + static_cast<int>(seed % 3);
    const double T = 0.3 + 0.1 * static_cast<double>(seed % 4);
    const auto s = random_system(seed, T, ro);
    MagnusOptions po;
    po.backend = MagnusBackend::Pauli;
    const auto pauli_series = omega_series(s, 2, po);
    MagnusOptions dopt;
    dopt.backend = MagnusBackend::Dense;
    const auto dense_series = omega_series(s, 2, dopt);
    for (int n = 0; n <= 2; ++n) {
      const auto direct = omega_direct(s, n);
      const double scale = std::max(1.0, direct.max_abs_coefficient());
      EXPECT_LT(pauli_series.omega_pauli(n).distance(direct), 1e-12 * scale) << "seed " << seed << " n " << n;
      EXPECT_LT((dense_series.omega_full(n) - to_dense(direct, 3)).norm(), 1e-11 * scale) << "seed " << seed;
    }
  }
}

TEST(Magnus, DirectFirstOrderMatchesQuadrature) {
  // (1/(2i T^2)) int_0^T dt1 int_0^t1 dt2 [H(t1), H(t2)] by nested Gauss quadrature
  const double T = 0.7;
  const auto s = linear_toy(T);
  const Matrix expect = integrate_gauss(
      [&](double t1) {
        const Matrix h1 = to_dense(s.hamiltonian_at(t1), 2);
        return Matrix(integrate_gauss(
            [&](double t2) {
              const Matrix h2 = to_dense(s.hamiltonian_at(t2), 2);
              return Matrix(h1 * h2 - h2 * h1);
            },
            0.0, t1, 4, 8));
      },
      0.0, T, 4, 8) / cplx(0.0, 2.0 * T * T);
  EXPECT_LT((to_dense(omega_direct(s, 1), 2) - expect).norm(), 1e-12);
}

TEST(Magnus, ZeroMeanDrivingGivesStaticAverage) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RandomSystemOptions ro;
    ro.zero_mean = true;
    ro.degree = 3;
    const auto s = random_system(seed, 0.6, ro);
    const auto series = omega_series(s, 1);
    EXPECT_LT(series.omega_pauli(0).distance(s.h0()), 1e-13);
  }
}

TEST(Magnus, TermsInvariantUnderStretchingThePeriod) {
  // T -> 2T, H(t) -> H(t/2) leaves every Omega_n unchanged
  const double T = 0.5;
  const auto s = linear_toy(T);
  DrivenSystem r(2, 2 * T);
  r.add_static(pauli("X", {0}));
  r.add_static(pauli("ZZ", {0, 1}, 0.5));
  r.add_driving(pauli("Z", {0}), Profile::polynomial({0.0, 0.5}));
  r.add_driving(pauli("Y", {1}), Profile::polynomial({0.0, 0.5}));
  MagnusOptions opt;
  opt.backend = MagnusBackend::Dense;
  const auto a = omega_series(s, 8, opt);
  const auto b = omega_series(r, 8, opt);
  for (int n = 0; n <= 8; ++n)
    EXPECT_LT((a.omega_full(n) - b.omega_full(n)).norm(), 1e-11 * std::max(1.0, a.norm(n))) << n;
}

TEST(Magnus, BackendsAgreeAndTermsAreHermitian) {
  RandomSystemOptions ro;
  ro.n_sites = 4;
  ro.degree = 2;
  ro.pieces = 2;
  const auto s = random_system(9, 0.25, ro);
  MagnusOptions po;
  po.backend = MagnusBackend::Pauli;
  const auto a = omega_series(s, 6, po);
  MagnusOptions dopt;
  dopt.backend = MagnusBackend::Dense;
  const auto b = omega_series(s, 6, dopt);
  for (int n = 0; n <= 6; ++n) {
    EXPECT_TRUE(a.omega_pauli(n).is_hermitian(1e-12 * std::max(1.0, a.omega_pauli(n).max_abs_coefficient())));
    const double scale = std::max(1.0, b.norm(n));
    EXPECT_LT(b.omega(n).hermiticity_defect(), 1e-12 * scale);
    EXPECT_LT((a.omega_full(n) - b.omega_full(n)).norm(), 1e-10 * scale) << n;
  }
}

TEST(Magnus, SymmetryBlocksDoNotChangeTerms) {
  const auto s = anisotropic_heisenberg_ring(6, 0.3);
  MagnusOptions with;
  with.backend = MagnusBackend::Dense;
  MagnusOptions without = with;
  without.use_symmetry = false;
  const auto a = omega_series(s, 4, with);
  const auto b = omega_series(s, 4, without);
  EXPECT_GT(a.basis()->num_blocks(), 1u);
  for (int n = 0; n <= 4; ++n)
    EXPECT_LT((a.omega_full(n) - b.omega_full(n)).norm(), 1e-11 * std::max(1.0, b.norm(n)));
}

TEST(Magnus, ScalingOfTheHamiltonian) {
  // Omega_n(c H) = c^(n+1) Omega_n(H)
  const double c = 1.7;
  const auto s = linear_toy(0.5);
  DrivenSystem r(2, 0.5);
  r.add_static(pauli("X", {0}, c));
  r.add_static(pauli("ZZ", {0, 1}, 0.5 * c));
  r.add_driving(pauli("Z", {0}), Profile::polynomial({0.0, c}));
  r.add_driving(pauli("Y", {1}), Profile::polynomial({0.0, c}));
  MagnusOptions po;
  po.backend = MagnusBackend::Pauli;
  const auto a = omega_series(s, 5, po);
  const auto b = omega_series(r, 5, po);
  for (int n = 0; n <= 5; ++n) {
    PauliOperator scaled = a.omega_pauli(n);
    scaled *= std::pow(c, n + 1);
    EXPECT_LT(b.omega_pauli(n).distance(scaled), 1e-13 * std::max(1.0, scaled.max_abs_coefficient()));
  }
}

TEST(Magnus, Lemma1HoldsOnRandomInstances) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    RandomSystemOptions ro;
    ro.degree = 1 + static_cast<int>(seed % 2);
    ro.n_sites = 4 + static_cast<int>(seed % 3);
    const double T = 0.05 + 0.05 * static_cast<double>(seed);
    const auto s = random_system(seed, T, ro);
    const auto m = locality_metrics(s);
    MagnusOptions opt;
    opt.backend = MagnusBackend::Dense;
    opt.use_symmetry = false;
    const auto series = omega_series(s, 12, opt);
    for (int n = 1; n <= 12; ++n) EXPECT_LE(series.norm(n), lemma1_bound(n, m)) << "seed " << seed << " n " << n;
  }
}

TEST(Magnus, TruncationAndOrderCeiling) {
  const auto s = linear_toy(0.4);
  const auto series = omega_series(s, 3);
  EXPECT_EQ(series.backend(), MagnusBackend::Pauli);
  const auto h2 = truncate(series, 2);
  Matrix expect = series.omega_full(0) + 0.4 * series.omega_full(1) + 0.16 * series.omega_full(2);
  EXPECT_LT((h2.full() - expect).norm(), 1e-14);
  EXPECT_THROW(truncate(series, 4), DomainError);
  EXPECT_THROW(series.omega(4), DomainError);
  EXPECT_THROW(omega_series(s, 41), DomainError);
  EXPECT_THROW(omega_direct(s, 3), DomainError);
  EXPECT_EQ(omega_series(s, 7).backend(), MagnusBackend::Dense);
}

TEST(Magnus, BoundHelpers) {
  LocalityMetrics m;
  m.V0 = 3.0;
  m.lambda = 2.0;
  EXPECT_NEAR(lemma1_bound(1, m), 2 * 3.0 * 2.0 / 4, 1e-14);
  EXPECT_NEAR(lemma1_bound(3, m), 2 * 3.0 * 8 * 6 / 16.0, 1e-12);
  EXPECT_NEAR(lemma1_bound_log10(200, m), std::log10(6.0) + 200 * std::log10(2.0) + std::lgamma(201.0) / std::log(10.0) -
                                              2 * std::log10(201.0),
              1e-9);
  EXPECT_TRUE(std::isinf(lemma1_bound(400, m)));
  EXPECT_EQ(optimal_order_n0(m, 1.0 / 64), 2);
  EXPECT_EQ(optimal_order_n0(m, 1.0), 0);
  EXPECT_NEAR(w_tilde(2, m), 2 * std::pow(8.0 / 3, 2) * 2 / 9, 1e-13);
  m.lambda = 0;
  EXPECT_GT(optimal_order_n0(m, 1.0), 1000);
}
