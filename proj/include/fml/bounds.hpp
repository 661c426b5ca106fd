#ifndef FML_BOUNDS_HPP
#define FML_BOUNDS_HPP

// Both sides of the rigorous inequalities, evaluated numerically.

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fml/decomposition.hpp"
#include "fml/errors.hpp"
#include "fml/linalg.hpp"
#include "fml/magnus.hpp"
#include "fml/parallel.hpp"
#include "fml/propagator.hpp"
#include "fml/report.hpp"
#include "fml/system.hpp"

namespace fml {

inline bool theorem1_hypothesis(const LocalityMetrics& m, double T) { return T <= 1.0 / (4.0 * m.lambda); }
inline double theorem3_tau(const LocalityMetrics& m) { return 1.0 / (8.0 * m.lambda_tilde); }

namespace detail {

inline void add_common(BoundReport& b, const LocalityMetrics& m, double T) {
  b.set("T", T);
  b.set("lambda", m.lambda);
  b.set("V0", m.V0);
  b.set("J", m.J);
  b.set("k", m.k);
}

/// n0, clamped to the available order when the system is undriven (every term beyond Omega_0 vanishes).
inline int usable_n0(const LocalityMetrics& m, double T, const MagnusSeries& series) {
  const int n0 = optimal_order_n0(m, T);
  if (n0 <= series.max_order()) return n0;
  if (m.V0 == 0.0) return series.max_order();
  throw DomainError("bounds: the series stops at order " + std::to_string(series.max_order()) + " but n0 = " +
                    std::to_string(n0));
}

}  // namespace detail

// ---- Lemma 1

inline std::vector<BoundReport> check_lemma1(const MagnusSeries& series, const LocalityMetrics& m, int n_max) {
  std::vector<BoundReport> out;
  for (int n = 1; n <= std::min(n_max, series.max_order()); ++n) {
    BoundReport b;
    b.name = "lemma1";
    b.lhs = series.norm(n);
    b.rhs = lemma1_bound(n, m);
    b.budget = 1e-12 * std::max(1.0, b.lhs);
    b.set("n", n);
    detail::add_common(b, m, series.period());
    out.push_back(std::move(b.judge()));
  }
  return out;
}

// ---- Theorem 1 and Corollary 1

/// ||U_F^m - exp(-i H_F^(n0) T)^m|| <= 6 V0 m T 2^-n0 for m = 1..m_max.
inline std::vector<BoundReport> check_theorem1(const DrivenSystem& sys, const UnitaryResult& uf, const MagnusSeries& series,
                                               int m_max, const LocalityMetrics& m) {
  const double T = sys.period();
  const bool ok = theorem1_hypothesis(m, T);
  const int n0 = detail::usable_n0(m, T, series);
  const BlockOp v = expm_hermitian(truncate(series, n0).op, T);
  const BlockOp u = uf.blocks.basis() == v.basis() ? uf.blocks : BlockOp::from_full(v.basis(), uf.matrix);
  std::vector<BoundReport> out;
  BlockOp um = u, vm = v;
  for (int k = 1; k <= m_max; ++k) {
    if (k > 1) {
      um = u * um;
      vm = v * vm;
    }
    BoundReport b;
    b.name = "theorem1";
    b.lhs = (um - vm).norm();
    b.rhs = 6.0 * m.V0 * k * T * std::pow(2.0, -n0);
    b.budget = k * (10.0 * uf.tol + 1e-12);
    b.set("m", k);
    b.set("n0", n0);
    detail::add_common(b, m, T);
    out.push_back(ok ? std::move(b.judge()) : std::move(b.not_applicable()));
  }
  return out;
}

inline std::vector<BoundReport> check_theorem1(const DrivenSystem& sys, const UnitaryResult& uf, const MagnusSeries& series,
                                               int m_max) {
  return check_theorem1(sys, uf, series, m_max, locality_metrics(sys));
}

/// ||U_F - exp(-i H_F^(n) T)|| <= 6 V0 T 2^-n0 + Omega-bar_{n+1} T^{n+2}.
inline BoundReport check_corollary1(const DrivenSystem& sys, const UnitaryResult& uf, const MagnusSeries& series, int n,
                                    const LocalityMetrics& m) {
  const double T = sys.period();
  const int n0 = optimal_order_n0(m, T);
  BoundReport b;
  b.name = "corollary1";
  const BlockOp v = expm_hermitian(truncate(series, n).op, T);
  const BlockOp u = uf.blocks.basis() == v.basis() ? uf.blocks : BlockOp::from_full(v.basis(), uf.matrix);
  b.lhs = (u - v).norm();
  b.rhs = 6.0 * m.V0 * T * std::pow(2.0, -n0) + lemma1_bound(n + 1, m) * std::pow(T, n + 2);
  b.budget = 10.0 * uf.tol + 1e-12;
  b.set("n", n);
  b.set("n0", n0);
  detail::add_common(b, m, T);
  if (theorem1_hypothesis(m, T) && n <= n0) return b.judge();
  return b.not_applicable();
}

inline BoundReport check_corollary1(const DrivenSystem& sys, const UnitaryResult& uf, const MagnusSeries& series, int n) {
  return check_corollary1(sys, uf, series, n, locality_metrics(sys));
}

// ---- energy filter and Theorem 3

/// Spectral projectors of a Hermitian operator.
class EnergyFilter {
 public:
  explicit EnergyFilter(const Matrix& h) {
    if (!is_hermitian(h, 1e-10)) throw DomainError("EnergyFilter: operator is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()));
    energies_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
  }
  const Eigen::VectorXd& energies() const { return energies_; }
  const Matrix& vectors() const { return vectors_; }
  Vector ground_state() const { return vectors_.col(0); }
  double span() const { return energies_(energies_.size() - 1) - energies_(0); }

  /// Pi_{>=E}.
  Matrix projector_at_least(double e) const {
    Matrix p = Matrix::Zero(vectors_.rows(), vectors_.rows());
    for (Eigen::Index j = 0; j < energies_.size(); ++j)
      if (energies_(j) >= e) p.noalias() += vectors_.col(j) * vectors_.col(j).adjoint();
    return p;
  }
  Matrix projector_below(double e) const { return Matrix::Identity(vectors_.rows(), vectors_.rows()) - projector_at_least(e); }

  /// ||Pi_{>=E} psi||^2.
  double weight_at_least(const Vector& psi, double e) const {
    const Vector c = vectors_.adjoint() * psi;
    double s = 0.0;
    for (Eigen::Index j = 0; j < energies_.size(); ++j)
      if (energies_(j) >= e) s += std::norm(c(j));
    return s;
  }

 private:
  Eigen::VectorXd energies_;
  Matrix vectors_;
};

/// ||Pi_{>=E+dE} U_F^m psi0||^2 for psi0 supported below E.
inline double absorption_probability(const EnergyFilter& f, const Matrix& uf, const Vector& psi0, double e, double de, long m) {
  if (f.weight_at_least(psi0, e) > 1e-10) throw DomainError("absorption_probability: initial state has weight above E");
  return f.weight_at_least(evolve(psi0, uf, m), e + de);
}

struct Theorem3Result {
  std::vector<BoundReport> reports;  // one per dE, then the decay-fit report
  double slope = std::nan("");       // least-squares d ln P / d dE over the fitted points
  int fit_points = 0;
};

/// Least-squares slope of ln p against x over the given points.
inline double log_slope(const std::vector<double>& x, const std::vector<double>& p) {
  const std::size_t n = x.size();
  if (n < 2) return std::nan("");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += std::log(p[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (std::log(p[i]) - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : std::nan("");
}

/// P(dE) <= exp[2 tau (-dE + V0 T^{n+1} W~_{n+1} + 22 t lambda V0 2^{-n0/2})], t = mT, with the filter of H_F^(n).
inline Theorem3Result check_theorem3(const DrivenSystem& sys, const MagnusSeries& series, int n, const UnitaryResult& uf,
                                     const EnergyFilter& filter, const Vector& psi0, double e,
                                     const std::vector<double>& de_grid, long m, const LocalityMetrics& metrics,
                                     double noise_floor = 1e-24) {
  const double T = sys.period();
  const double tau = theorem3_tau(metrics);
  const int n0 = optimal_order_n0(metrics, T);
  const bool ok = T <= tau && n <= n0;
  const double t = static_cast<double>(m) * T;
  const double shift = metrics.V0 * std::pow(T, n + 1) * w_tilde(n + 1, metrics) +
                       22.0 * t * metrics.lambda * metrics.V0 * std::pow(2.0, -0.5 * n0);
  const Vector psi = evolve(psi0, uf.matrix, m);
  if (filter.weight_at_least(psi0, e) > 1e-10) throw DomainError("check_theorem3: initial state has weight above E");
  (void)series;
  Theorem3Result r;
  std::vector<double> fx, fp;
  for (double de : de_grid) {
    BoundReport b;
    b.name = "theorem3";
    b.lhs = filter.weight_at_least(psi, e + de);
    b.rhs = std::exp(2.0 * tau * (-de + shift));
    b.budget = 20.0 * static_cast<double>(m) * uf.tol + 1e-12;
    b.set("n", n);
    b.set("n0", n0);
    b.set("m", static_cast<double>(m));
    b.set("E", e);
    b.set("dE", de);
    b.set("tau", tau);
    b.set("trivial_rhs", std::min(1.0, b.rhs));
    detail::add_common(b, metrics, T);
    if (b.rhs < 1.0 && b.lhs > noise_floor) {
      fx.push_back(de);
      fp.push_back(b.lhs);
    }
    r.reports.push_back(ok ? std::move(b.judge()) : std::move(b.not_applicable()));
  }
  r.slope = log_slope(fx, fp);
  r.fit_points = static_cast<int>(fx.size());
  BoundReport fit;
  fit.name = "theorem3_decay_fit";
  fit.lhs = r.slope;
  fit.rhs = -2.0 * tau * 0.9;
  fit.set("points", r.fit_points);
  fit.set("m", static_cast<double>(m));
  fit.set("tau", tau);
  if (ok && r.fit_points >= 2 && std::isfinite(r.slope))
    fit.judge();
  else
    fit.not_applicable();
  r.reports.push_back(std::move(fit));
  return r;
}

// ---- Lieb-Robinson profile and Theorem 2

struct LRProfile {
  std::vector<int> distances;
  std::vector<double> times;
  std::vector<std::vector<double>> G;  // G[distance index][time index], running max in t
  std::string dictionary = "single-site X,Y,Z";

  /// G(l, t) at the first grid time >= t; 0 past the largest distance.
  double at(int l, double t) const {
    int li = -1;
    for (std::size_t i = 0; i < distances.size(); ++i)
      if (distances[i] == l) li = static_cast<int>(i);
    if (li < 0) {
      if (!distances.empty() && l > distances.back()) return 0.0;
      throw DomainError("LRProfile: distance " + std::to_string(l) + " was not measured");
    }
    for (std::size_t j = 0; j < times.size(); ++j)
      if (times[j] >= t * (1 - 1e-12)) return G[static_cast<std::size_t>(li)][j];
    throw DomainError("LRProfile: time beyond the measured grid");
  }
};

namespace detail {

inline std::vector<Matrix> single_site_dictionary(const std::vector<int>& sites, int n) {
  std::vector<Matrix> out;
  for (int s : sites)
    for (const char* l : {"X", "Y", "Z"}) out.push_back(to_dense(PauliOperator(n, pauli(l, {s})), n));
  return out;
}

inline std::uint64_t mask_of(const std::vector<int>& sites) {
  std::uint64_t m = 0;
  for (int s : sites) m |= std::uint64_t{1} << s;
  return m;
}

}  // namespace detail

/// Empirical G(l, t) = max ||[O_X(t), O_Y]|| / (min(|X|,|Y|) ||O_X|| ||O_Y||), Heisenberg evolution under the true H(t).
inline LRProfile measure_lr_profile(const DrivenSystem& sys, const std::vector<int>& x_sites,
                                    const std::vector<std::vector<int>>& y_sites, const std::vector<double>& t_grid,
                                    const PropagatorOptions& opt = {}, int threads = 1) {
  const int n = sys.n_sites();
  const double T = sys.period();
  for (std::size_t j = 1; j < t_grid.size(); ++j)
    if (!(t_grid[j] > t_grid[j - 1])) throw DomainError("measure_lr_profile: times must increase");
  const Matrix uf = exact_floquet(sys, opt).matrix;
  // U(qT + r) = U(r) U_F^q with r in (0, T]
  std::vector<double> rest(t_grid.size());
  std::vector<long> q(t_grid.size());
  std::map<double, Matrix> partial;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    if (t_grid[j] <= 0.0) continue;
    double qq = std::floor(t_grid[j] / T);
    double r = t_grid[j] - qq * T;
    if (r <= 1e-14 * T) {
      qq -= 1;
      r = T;
    }
    rest[j] = r;
    q[j] = static_cast<long>(qq);
    if (!partial.count(r)) partial.emplace(r, r == T ? uf : propagate(sys, r, opt).matrix);
  }
  const auto ox = detail::single_site_dictionary(x_sites, n);
  std::map<int, std::vector<std::vector<Matrix>>> by_distance;
  for (const auto& y : y_sites)
    by_distance[sys.distance(detail::mask_of(x_sites), detail::mask_of(y))].push_back(detail::single_site_dictionary(y, n));
  LRProfile p;
  p.times = t_grid;
  for (const auto& [l, _] : by_distance) p.distances.push_back(l);
  p.G.assign(p.distances.size(), std::vector<double>(t_grid.size(), 0.0));
  parallel_for(static_cast<int>(t_grid.size()), threads, [&](int jj) {
    const auto j = static_cast<std::size_t>(jj);
    const Matrix u = t_grid[j] <= 0.0 ? Matrix::Identity(uf.rows(), uf.cols()) : Matrix(partial.at(rest[j]) * matrix_power(uf, q[j]));
    std::vector<Matrix> oxt;
    for (const auto& o : ox) oxt.push_back(u.adjoint() * o * u);
    std::size_t li = 0;
    for (const auto& [l, groups] : by_distance) {
      double g = 0.0;
      for (const auto& group : groups) {
        const double denom = static_cast<double>(std::min(x_sites.size(), group.size() / 3));  // 3 letters per site
        // i[A, B] is Hermitian for Hermitian A, B
        for (const auto& a : oxt)
          for (const auto& b : group) g = std::max(g, hermitian_norm(Matrix(cplx(0, 1) * (a * b - b * a))) / denom);
      }
      p.G[li][j] = g;
      ++li;
    }
  });
  for (auto& row : p.G)
    for (std::size_t j = 1; j < row.size(); ++j) row[j] = std::max(row[j], row[j - 1]);
  return p;
}

/// Sites within distance l of L.
inline int neighbourhood_size(const DrivenSystem& sys, const std::vector<int>& region, int l) {
  const auto d = sys.site_distances();
  int c = 0;
  for (int s = 0; s < sys.n_sites(); ++s) {
    int best = std::numeric_limits<int>::max();
    for (int r : region) best = std::min(best, d[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)]);
    if (best <= l) ++c;
  }
  return c;
}

/// The largest l with |L_l| <= 2^{n0/2} |L| (capped one past the diameter).
inline int theorem2_l0(const DrivenSystem& sys, const std::vector<int>& region, int n0) {
  const double cap = std::pow(2.0, 0.5 * n0) * static_cast<double>(region.size());
  int l = 0;
  while (l <= sys.n_sites() && neighbourhood_size(sys, region, l + 1) <= cap) ++l;
  return l;
}

/// ||rho_L(mT) - rho_L^(n0)(mT)||_1 <= 12 J |L| mT 2^{-n0/2} + 2 |L| m G(l0, mT), with G measured.
inline std::vector<BoundReport> check_theorem2(const DrivenSystem& sys, const UnitaryResult& uf, const MagnusSeries& series,
                                               const std::vector<int>& region, int m_max, const LRProfile& profile,
                                               const Vector& psi0, const LocalityMetrics& m) {
  const double T = sys.period();
  const bool ok = theorem1_hypothesis(m, T);
  const int n0 = detail::usable_n0(m, T, series);
  const int l0 = theorem2_l0(sys, region, n0);
  const Matrix v = expm_hermitian(truncate(series, n0).full(), T);
  std::vector<int> keep = region;
  std::sort(keep.begin(), keep.end());
  Vector a = psi0, b = psi0;
  std::vector<BoundReport> out;
  for (int k = 1; k <= m_max; ++k) {
    a = uf.matrix * a;
    b = v * b;
    const Matrix ra = partial_trace(Matrix(a * a.adjoint()), keep);
    const Matrix rb = partial_trace(Matrix(b * b.adjoint()), keep);
    BoundReport r;
    r.name = "theorem2";
    r.label = "empirical-G";
    r.lhs = trace_norm(ra - rb);
    const double g = profile.at(l0, k * T);
    r.rhs = 12.0 * m.J * static_cast<double>(region.size()) * k * T * std::pow(2.0, -0.5 * n0) +
            2.0 * static_cast<double>(region.size()) * k * g;
    r.budget = 2.0 * k * (10.0 * uf.tol + 1e-12);
    r.set("m", k);
    r.set("n0", n0);
    r.set("L", static_cast<double>(region.size()));
    r.set("l0", l0);
    r.set("G", g);
    detail::add_common(r, m, T);
    out.push_back(ok ? std::move(r.judge()) : std::move(r.not_applicable()));
  }
  return out;
}

// ---- Appendix B lemmas

inline double operator_norm(const PauliOperator& a) { return a.is_zero() ? 0.0 : spectral_norm(to_dense(a)); }

/// ||[A_n, [..., [A_1, O_L]]]|| <= prod_m (2 J_m K_m) ||O_L||, K_m = |L| + sum_{i<m} k_i.
inline BoundReport check_lemma3(const std::vector<PauliOperator>& ops, const PauliOperator& o_l) {
  PauliOperator c = o_l;
  for (const auto& a : ops) c = commutator(a, c);
  BoundReport b;
  b.name = "lemma3";
  b.lhs = operator_norm(c);
  const double L = std::popcount(o_l.support());
  double rhs = operator_norm(o_l), ksum = 0.0;
  for (const auto& a : ops) {
    const auto e = extensiveness(a);
    rhs *= 2.0 * e.J * (L + ksum);
    ksum += e.k;
  }
  b.rhs = rhs;
  b.budget = 1e-12 * std::max(1.0, b.lhs);
  b.set("depth", static_cast<double>(ops.size()));
  b.set("L", L);
  return b.judge();
}

/// ||[H, A]|| <= 6 J k k_A ||A||.
inline BoundReport check_lemma4(const PauliOperator& h, const PauliOperator& a) {
  BoundReport b;
  b.name = "lemma4";
  b.lhs = operator_norm(commutator(h, a));
  const auto eh = extensiveness(h);
  const auto ea = extensiveness(a);
  b.rhs = 6.0 * eh.J * eh.k * ea.k * operator_norm(a);
  b.budget = 1e-12 * std::max(1.0, b.lhs);
  b.set("J", eh.J);
  b.set("k", eh.k);
  b.set("k_A", ea.k);
  return b.judge();
}

/// J of [A_n, [..., [A_2, A_1]]] <= J_1 prod_{m>=2} (2 J_m K~_m), K~_m = sum_{i<=m} k_i.
inline BoundReport check_lemma5(const std::vector<PauliOperator>& ops) {
  if (ops.empty()) throw DomainError("check_lemma5: need at least one operator");
  PauliOperator c = ops.front();
  for (std::size_t i = 1; i < ops.size(); ++i) c = commutator(ops[i], c);
  BoundReport b;
  b.name = "lemma5";
  b.lhs = extensiveness(c).J;
  const auto e1 = extensiveness(ops.front());
  double rhs = e1.J, ksum = e1.k;
  for (std::size_t i = 1; i < ops.size(); ++i) {
    const auto e = extensiveness(ops[i]);
    ksum += e.k;
    rhs *= 2.0 * e.J * ksum;
  }
  b.rhs = rhs;
  b.budget = 1e-12 * std::max(1.0, b.lhs);
  b.set("depth", static_cast<double>(ops.size()));
  return b.judge();
}

// ---- Appendix E Lemma 6

struct Lemma6Result {
  BoundReport printed;    // with the 1/2 prefactor as printed
  BoundReport corrected;  // without it
};

/// ||exp(x H_F^(n0)) A exp(-x H_F^(n0))|| <= eta^{n_A} ||A|| / (2 (1 - 2 eta lambda n0 T)), eta = 1/(1 - 2 lambda~ x).
inline Lemma6Result check_lemma6(const MagnusSeries& series, int n0, const PauliOperator& a, double x,
                                 const LocalityMetrics& m) {
  const double T = series.period();
  const Matrix h = truncate(series, n0).full();
  const Matrix ad = to_dense(a, a.n_sites());
  const Matrix lhs_op = expm_real_hermitian(h, x) * ad * expm_real_hermitian(h, -x);
  const double lhs = spectral_norm(lhs_op);
  const double anorm = spectral_norm(ad);
  const int k = std::max(1, m.k);
  const int n_a = std::max(1, (a.max_weight() + k - 1) / k);
  const double eta = 1.0 / (1.0 - 2.0 * m.lambda_tilde * x);
  const double denom = 1.0 - 2.0 * eta * m.lambda * n0 * T;
  const bool ok = x <= theorem3_tau(m) && 2.0 * m.lambda_tilde * x < 1.0 && denom > 0.0 &&
                  T <= theorem3_tau(m) && n0 <= optimal_order_n0(m, T);
  Lemma6Result r;
  for (BoundReport* b : {&r.printed, &r.corrected}) {
    b->lhs = lhs;
    b->budget = 1e-12 * std::max(1.0, lhs);
    b->set("x", x);
    b->set("n0", n0);
    b->set("n_A", n_a);
    b->set("eta", eta);
    b->set("lambda_tilde", m.lambda_tilde);
    detail::add_common(*b, m, T);
  }
  r.printed.name = "lemma6";
  r.corrected.name = "lemma6_corrected";
  r.printed.rhs = std::pow(eta, n_a) * anorm / (2.0 * denom);
  r.corrected.rhs = std::pow(eta, n_a) * anorm / denom;
  if (ok) {
    r.printed.judge();
    r.corrected.judge();
  } else {
    r.printed.not_applicable();
    r.corrected.not_applicable();
  }
  return r;
}

}  // namespace fml

#endif  // FML_BOUNDS_HPP
