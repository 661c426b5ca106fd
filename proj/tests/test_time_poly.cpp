#include <gtest/gtest.h>

#include <random>

#include "fml/system.hpp"
#include "fml/time_poly.hpp"
#include "test_util.hpp"

using namespace fml;

namespace {

TimePoly<PauliOperator> random_poly(std::mt19937_64& rng, int n, int degree, double T) {
  std::vector<PauliOperator> cs;
  for (int j = 0; j <= degree; ++j) cs.push_back(test::random_operator(rng, n, 4, false));
  return TimePoly<PauliOperator>(std::move(cs), 0, 0.0, T);
}

}  // namespace

TEST(TimePoly, EvaluateExamples) {
  const PauliOperator a(2, pauli("X", {0})), b(2, pauli("ZZ", {0, 1}));
  const auto ca = TimePoly<PauliOperator>::constant(a, 0.0, 1.0);
  EXPECT_LT(ca.evaluate(0.37).distance(a), 1e-16);
  const TimePoly<PauliOperator> tb({PauliOperator(2), b}, 0, 0.0, 1.0);
  EXPECT_LT(tb.evaluate(0.5).distance(0.5 * b), 1e-16);
  const TimePoly<PauliOperator> ab({a, b}, 0, 0.0, 1.0);
  EXPECT_LT(ab.evaluate(1.0).distance(a + b), 1e-16);
  EXPECT_THROW(ab.evaluate(0.0), DomainError);
  EXPECT_THROW(ab.evaluate(1.5), DomainError);
}

TEST(TimePoly, TrimAndOffset) {
  const PauliOperator a(1, pauli("X", {0}));
  const TimePoly<PauliOperator> p({PauliOperator(1), PauliOperator(1), a, PauliOperator(1)}, 0, 0.0, 1.0);
  EXPECT_EQ(p.offset(), 2);
  EXPECT_EQ(p.coeffs().size(), 1u);
  EXPECT_EQ(p.degree(), 2);
}

TEST(TimePoly, CommutatorExamples) {
  const PauliOperator a(2, pauli("X", {0})), b(2, pauli("Y", {0}));
  const auto ca = TimePoly<PauliOperator>::constant(a, 0.0, 1.0);
  EXPECT_TRUE(poly_commutator(ca, ca).is_zero());
  const TimePoly<PauliOperator> tb({PauliOperator(2), b}, 0, 0.0, 1.0);
  const auto c = poly_commutator(ca, tb);
  EXPECT_EQ(c.degree(), 1);
  EXPECT_EQ(c.offset(), 1);
  EXPECT_LT(c.coefficient(1).distance(commutator(a, b)), 1e-15);
  const TimePoly<PauliOperator> ab({a, b}, 0, 0.0, 1.0);
  EXPECT_TRUE(poly_commutator(ab, ab).is_zero());
}

TEST(TimePoly, IntegrateExamples) {
  const PauliOperator b(1, pauli("Z", {0}));
  const auto cb = TimePoly<PauliOperator>::constant(b, 0.0, 2.0);
  const auto ib = integrate(cb);
  EXPECT_EQ(ib.offset(), 1);
  EXPECT_LT(ib.evaluate(1.3).distance(1.3 * b), 1e-15);
  const TimePoly<PauliOperator> tb({PauliOperator(1), b}, 0, 0.0, 2.0);
  EXPECT_LT(definite_integral(tb, 0.0, 2.0).distance(2.0 * b), 1e-15);  // T^2/2 with T = 2
  EXPECT_TRUE(integrate(TimePoly<PauliOperator>(b, 0.0, 1.0)).is_zero());
}

TEST(TimePoly, IntegralMatchesQuadrature) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int deg = trial % 7;
    const double T = 0.3 + uniform(rng, 0, 1.5);
    const auto p = random_poly(rng, 3, deg, T);
    const auto ip = integrate(p);
    EXPECT_EQ(ip.degree(), p.degree() + 1);
    const double t = T * uniform(rng, 0.1, 1.0);
    const Matrix exact = to_dense(ip.evaluate(t));
    Matrix quad = Matrix::Zero(8, 8);
    // entry-wise adaptive-free check: composite Gauss on a fine grid
    for (Eigen::Index r = 0; r < 8; ++r)
      for (Eigen::Index c = 0; c < 8; ++c) {
        auto re = [&](double s) { return to_dense(p.evaluate(s))(r, c).real(); };
        auto im = [&](double s) { return to_dense(p.evaluate(s))(r, c).imag(); };
        quad(r, c) = cplx(integrate_gauss(re, 0.0, t, 2, 8), integrate_gauss(im, 0.0, t, 2, 8));
      }
    EXPECT_LT((exact - quad).cwiseAbs().maxCoeff(), 1e-12) << "degree " << deg;
  }
}

TEST(TimePoly, CommutatorMatchesDenseAtRandomTimes) {
  std::mt19937_64 rng(33);
  const double T = 0.8;
  const auto a = random_poly(rng, 3, 3, T);
  const auto b = random_poly(rng, 3, 2, T);
  const auto c = poly_commutator(a, b);
  EXPECT_LE(c.degree(), a.degree() + b.degree());
  for (int k = 0; k < 5; ++k) {
    const double t = T * uniform(rng, 0.01, 1.0);
    const Matrix da = to_dense(a.evaluate(t)), db = to_dense(b.evaluate(t));
    EXPECT_LT((to_dense(c.evaluate(t)) - (da * db - db * da)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TimePoly, DenseBackendAgrees) {
  std::mt19937_64 rng(4);
  const auto a = random_poly(rng, 2, 2, 1.0);
  const auto b = random_poly(rng, 2, 3, 1.0);
  PiecewisePoly<PauliOperator> pa({0.0, 1.0}, {a}), pb({0.0, 1.0}, {b});
  auto to_mat = [](const PauliOperator& o) { return to_dense(o); };
  const auto da = pa.map(to_mat), db = pb.map(to_mat);
  const auto c = integrate(poly_commutator(pa, pb));
  const auto dc = integrate(poly_commutator(da, db));
  EXPECT_LT((to_dense(c.evaluate(0.7)) - dc.evaluate(0.7)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(PiecewisePoly, CumulativeIntegralAcrossBreakpoints) {
  // f = 1 on (0, 0.5], t on (0.5, 1]
  const PauliOperator z(1, pauli("Z", {0}));
  std::vector<TimePoly<PauliOperator>> segs;
  segs.push_back(TimePoly<PauliOperator>::constant(z, 0.0, 0.5));
  segs.push_back(TimePoly<PauliOperator>({PauliOperator(1), z}, 0, 0.5, 1.0));
  PiecewisePoly<PauliOperator> f({0.0, 0.5, 1.0}, std::move(segs));
  const auto F = integrate(f);
  EXPECT_LT(F.evaluate(0.25).distance(0.25 * z), 1e-15);
  EXPECT_LT(F.evaluate(0.5).distance(0.5 * z), 1e-15);
  // 0.5 + (t^2 - 0.25)/2 at t = 1
  EXPECT_LT(F.end_value().distance(0.875 * z), 1e-15);
  EXPECT_LT(definite_integral(f).distance(0.875 * z), 1e-15);
  EXPECT_EQ(f.segment_index(0.5), 0u);
  EXPECT_EQ(f.segment_index(0.50001), 1u);
  EXPECT_THROW(f.evaluate(0.0), DomainError);
}
