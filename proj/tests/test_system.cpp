#include <gtest/gtest.h>

#include <random>

#include "fml/system.hpp"

using namespace fml;

TEST(LocalityMetrics, StaticFieldOnly) {
  DrivenSystem s(5, 1.0);
  for (int i = 0; i < 5; ++i) s.add_static(pauli("Z", {i}));
  const auto m = locality_metrics(s);
  EXPECT_EQ(m.k, 1);
  EXPECT_DOUBLE_EQ(m.J, 1.0);
  EXPECT_DOUBLE_EQ(m.lambda, 2.0);
  EXPECT_DOUBLE_EQ(m.V0, 0.0);
}

TEST(LocalityMetrics, PaperModelClosedForms) {
  for (double T : {0.2, 0.3, 0.5}) {
    const auto s = anisotropic_heisenberg_ring(8, T);
    const auto m = locality_metrics(s);
    EXPECT_EQ(m.k, 2);
    EXPECT_NEAR(m.J, 6.0 + T, 1e-12);
    EXPECT_NEAR(m.V0, 8 * T / 2, 1e-12);
    EXPECT_DOUBLE_EQ(m.lambda, 2 * 2 * m.J);
    EXPECT_DOUBLE_EQ(m.lambda_tilde, 6 * 4 * m.J);
    double sum = 0;
    for (double v : m.Vi) sum += v;
    EXPECT_NEAR(sum, m.V0, 1e-12 * m.V0);
  }
}

TEST(LocalityMetrics, EnvelopeUsesSupOfSum) {
  // f1 = t on {0}, f2 = 1 - t on {0,1}: |f1| + |f2| = 1 at site 0, sup of each is 1
  DrivenSystem s(2, 1.0);
  s.add_driving(pauli("X", {0}), Profile::polynomial({0.0, 1.0}));
  s.add_driving(pauli("ZZ", {0, 1}), Profile::polynomial({1.0, -1.0}));
  auto m = locality_metrics(s);
  EXPECT_NEAR(m.J, 1.0, 1e-14);
  EXPECT_NEAR(m.V0, 1.0, 1e-14);
  // same support: ||t X + (1-t) Z|| = sqrt(t^2 + (1-t)^2)
  DrivenSystem s1(1, 1.0);
  s1.add_driving(pauli("X", {0}), Profile::polynomial({0.0, 1.0}));
  s1.add_driving(pauli("Z", {0}), Profile::polynomial({1.0, -1.0}));
  m = locality_metrics(s1);
  EXPECT_NEAR(m.J, 1.0, 1e-14);
  const double exact = 0.5 + std::asinh(1.0) / 2.0 / std::sqrt(2.0) * 1.0;  // int_0^1 sqrt(2t^2-2t+1)
  EXPECT_NEAR(m.V0, exact, 1e-10);
  // sign change inside the period: |2t - 1| has sup 1 and mean 1/2
  DrivenSystem s2(1, 1.0);
  s2.add_driving(pauli("Z", {0}), Profile::polynomial({-1.0, 2.0}));
  m = locality_metrics(s2);
  EXPECT_NEAR(m.J, 1.0, 1e-14);
  EXPECT_NEAR(m.V0, 0.5, 1e-14);
}

TEST(LocalityMetrics, CompositeDrivenSupportUsesDenseNorm) {
  // v(t) = t (X0X1 + Y0Y1): norm 2t, sampled sup 2T, mean T
  DrivenSystem s(2, 0.5);
  s.add_driving(pauli("XX", {0, 1}), Profile::polynomial({0.0, 1.0}));
  s.add_driving(pauli("YY", {0, 1}), Profile::polynomial({0.0, 1.0}));
  const auto m = locality_metrics(s);
  EXPECT_NEAR(m.J, 1.0, 1e-12);
  EXPECT_NEAR(m.V0, 0.5, 1e-12);
  EXPECT_NEAR(m.Vi[0], 0.5, 1e-12);
  EXPECT_EQ(m.Vi[1], 0.0);
}

TEST(LocalityMetrics, ViPartitionRandom) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RandomSystemOptions opt;
    opt.n_sites = 5;
    opt.degree = 1 + static_cast<int>(seed % 3);
    opt.pieces = 1 + static_cast<int>(seed % 2);
    auto s = random_system(seed, 0.4, opt);
    std::vector<int> order{3, 1, 4, 0, 2};
    s.set_order(order);
    const auto m = locality_metrics(s);
    double sum = 0;
    for (double v : m.Vi) sum += v;
    EXPECT_NEAR(sum, m.V0, 1e-12 * m.V0);
    // J dominates a fine sampling of the per-site sum
    const auto h0_groups = group_by_support(s.h0());
    for (int i = 0; i < 5; ++i)
      for (int k = 1; k <= 200; ++k) {
        const double t = 0.4 * k / 200;
        double g = 0;
        for (const auto& [mask, op] : h0_groups)
          if ((mask >> i) & 1u) g += local_norm(op);
        for (const auto& [mask, op] : group_by_support(s.driving_at(t)))
          if ((mask >> i) & 1u) g += local_norm(op);
        EXPECT_LE(g, m.J * (1 + 1e-12));
      }
  }
}

TEST(DrivenSystem, BreakpointsAndPolynomial) {
  DrivenSystem s(2, 2.0);
  Profile step{{0.5, 1.0}, {{1.0}, {-1.0}}};
  s.add_driving(pauli("X", {0}), step);
  s.add_driving(pauli("Z", {1}), Profile::polynomial({0.0, 1.0}));
  const auto br = s.breakpoints();
  ASSERT_EQ(br.size(), 3u);
  EXPECT_DOUBLE_EQ(br[1], 1.0);
  const auto v = s.driving_poly();
  for (double t : {0.3, 1.0, 1.2, 2.0}) EXPECT_LT(v.evaluate(t).distance(s.driving_at(t)), 1e-15);
  EXPECT_THROW(s.driving_at(0.0), DomainError);
  EXPECT_THROW(s.add_driving(PauliString({}, ""), Profile::polynomial({1.0})), ConfigError);
  EXPECT_THROW(s.add_static(pauli("X", {2})), ConfigError);
}

TEST(DrivenSystem, Distances) {
  DrivenSystem s(6, 1.0);
  add_chain_bonds(s, true);
  EXPECT_EQ(s.distance(1u << 0, 1u << 3), 3);
  EXPECT_EQ(s.distance(1u << 0, 1u << 5), 1);
  EXPECT_EQ(s.distance(0b11u, 0b110u), 0);
}

TEST(ScalarPoly, Roots) {
  const auto r = poly_real_roots({-0.06, 0.5, -1.0}, 0.0, 1.0);  // -(t-0.2)(t-0.3)
  ASSERT_EQ(r.size(), 2u);
  EXPECT_NEAR(r[0], 0.2, 1e-14);
  EXPECT_NEAR(r[1], 0.3, 1e-14);
  EXPECT_NEAR(poly_abs_integral({-1.0, 2.0}, 0.0, 1.0), 0.5, 1e-15);
}
