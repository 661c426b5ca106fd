#ifndef FML_SYSTEM_HPP
#define FML_SYSTEM_HPP

// Driven system description H(t) = H0 + V(t), lattice geometry and the
// locality metrics (k, J, lambda, lambda~, V0, V_i).

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fml/errors.hpp"
#include "fml/linalg.hpp"
#include "fml/pauli.hpp"
#include "fml/time_poly.hpp"

namespace fml {

// ---- scalar polynomials c0 + c1 t + ...

using ScalarPoly = std::vector<double>;

inline double poly_eval(const ScalarPoly& p, double t) {
  double acc = 0.0;
  for (std::size_t j = p.size(); j-- > 0;) acc = acc * t + p[j];
  return acc;
}

inline ScalarPoly poly_derivative(const ScalarPoly& p) {
  ScalarPoly d;
  for (std::size_t j = 1; j < p.size(); ++j) d.push_back(static_cast<double>(j) * p[j]);
  return d;
}

inline ScalarPoly poly_antiderivative(const ScalarPoly& p) {
  ScalarPoly a(p.size() + 1, 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) a[j + 1] = p[j] / static_cast<double>(j + 1);
  return a;
}

inline void poly_axpy(ScalarPoly& acc, const ScalarPoly& x, double s) {
  if (acc.size() < x.size()) acc.resize(x.size(), 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) acc[j] += s * x[j];
}

/// Real roots strictly inside (a, b), sorted (companion-matrix eigenvalues).
inline std::vector<double> poly_real_roots(ScalarPoly p, double a, double b) {
  const double scale = std::max(1.0, [&] {
    double m = 0.0;
    for (double c : p) m = std::max(m, std::abs(c));
    return m;
  }());
  while (!p.empty() && std::abs(p.back()) <= 1e-300 * scale) p.pop_back();
  std::vector<double> roots;
  if (p.size() <= 1) return roots;
  const auto deg = static_cast<Eigen::Index>(p.size() - 1);
  if (deg == 1) {
    roots.push_back(-p[0] / p[1]);
  } else {
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (Eigen::Index i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    for (Eigen::Index i = 0; i < deg; ++i) comp(i, deg - 1) = -p[static_cast<std::size_t>(i)] / p.back();
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    for (Eigen::Index i = 0; i < deg; ++i) {
      const auto z = es.eigenvalues()(i);
      if (std::abs(z.imag()) <= 1e-9 * std::max(1.0, std::abs(z.real()))) {
        // one Newton polish
        double x = z.real();
        const ScalarPoly d = poly_derivative(p);
        const double dv = poly_eval(d, x);
        if (dv != 0.0) x -= poly_eval(p, x) / dv;
        roots.push_back(x);
      }
    }
  }
  std::erase_if(roots, [&](double r) { return !(r > a && r < b); });
  std::sort(roots.begin(), roots.end());
  return roots;
}

/// Max of |p| over [a, b].
inline double poly_abs_max(const ScalarPoly& p, double a, double b) {
  double m = std::max(std::abs(poly_eval(p, a)), std::abs(poly_eval(p, b)));
  for (double r : poly_real_roots(poly_derivative(p), a, b)) m = std::max(m, std::abs(poly_eval(p, r)));
  return m;
}

/// int_a^b |p| dt, split at the real roots.
inline double poly_abs_integral(const ScalarPoly& p, double a, double b) {
  std::vector<double> pts{a};
  for (double r : poly_real_roots(p, a, b)) pts.push_back(r);
  pts.push_back(b);
  const ScalarPoly P = poly_antiderivative(p);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += std::abs(poly_eval(P, pts[i + 1]) - poly_eval(P, pts[i]));
  return s;
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    jac(i, i - 1) = jac(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    w[static_cast<std::size_t>(i)] = 2.0 * v * v;
  }
  return {x, w};
}

/// Composite Gauss-Legendre quadrature of f over [a, b].
/// f may return a scalar or an Eigen matrix.
template <class F>
auto integrate_gauss(F&& f, double a, double b, int pieces = 32, int order = 10) {
  static thread_local std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, gauss_legendre(order)).first;
  const auto x = it->second.first;
  const auto w = it->second.second;
  const double h = (b - a) / pieces;
  using R = std::decay_t<decltype(f(a))>;
  R s = 0.0 * f(a + 0.5 * h);
  for (int p = 0; p < pieces; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(mid + 0.5 * h * x[i]);
  }
  return R(0.5 * h * s);
}

// ---- driving profiles

/// Piecewise polynomial f(t) on (0, T]: piece j covers (ends[j-1] T, ends[j] T], polynomials in absolute t.
struct Profile {
  std::vector<double> ends{1.0};
  std::vector<ScalarPoly> polys{ScalarPoly{}};

  static Profile polynomial(ScalarPoly p) { return Profile{{1.0}, {std::move(p)}}; }

  void validate() const {
    if (ends.empty() || ends.size() != polys.size()) throw ConfigError("profile: ends and polys differ in length");
    for (std::size_t j = 0; j < ends.size(); ++j) {
      if (!(ends[j] > (j ? ends[j - 1] : 0.0))) throw ConfigError("profile: piece ends must increase from 0");
      for (double c : polys[j])
        if (!std::isfinite(c)) throw ConfigError("profile: non-finite coefficient");
    }
    if (ends.back() != 1.0) throw ConfigError("profile: last piece must end at 1 (fraction of the period)");
  }

  /// Polynomial active on the sub-interval (a, b] of a period of length T.
  const ScalarPoly& piece_for(double a, double b, double period) const {
    const double mid = 0.5 * (a + b) / period;
    for (std::size_t j = 0; j < ends.size(); ++j)
      if (mid <= ends[j]) return polys[j];
    return polys.back();
  }

  double value(double t, double period) const {
    double u = t / period;
    for (std::size_t j = 0; j < ends.size(); ++j)
      if (u <= ends[j]) return poly_eval(polys[j], t);
    return poly_eval(polys.back(), t);
  }
};

struct DrivingTerm {
  PauliString string;  // coefficient multiplies the profile
  Profile profile;
};

/// H(t) = H0 + sum_terms f_term(t) * string on (0, T], extended periodically.
class DrivenSystem {
 public:
  DrivenSystem() = default;
  DrivenSystem(int n_sites, double period) : n_(n_sites), period_(period), h0_(n_sites) {
    if (n_sites < 1 || n_sites > kMaxSites) throw ConfigError("system: site count out of range");
    if (!(period > 0.0) || !std::isfinite(period)) throw ConfigError("system: period must be positive");
    for (int i = 0; i < n_sites; ++i) order_.push_back(i);
  }

  int n_sites() const { return n_; }
  double period() const { return period_; }
  const PauliOperator& h0() const { return h0_; }
  const std::vector<DrivingTerm>& driving() const { return driving_; }
  const std::vector<std::pair<int, int>>& bonds() const { return bonds_; }
  const std::vector<int>& order() const { return order_; }
  bool is_driven() const { return !driving_.empty(); }

  void add_static(const PauliString& s) {
    check_string(s, true);
    if (s.coefficient.imag() != 0.0)
      throw ConfigError("system: static coefficients must be real");
    h0_.add(s);
    h0_.prune();
  }
  void add_driving(const PauliString& s, Profile p) {
    check_string(s, false);
    if (s.coefficient.imag() != 0.0) throw ConfigError("system: driving coefficients must be real");
    p.validate();
    driving_.push_back({s, std::move(p)});
  }
  void add_bond(int a, int b) {
    if (a < 0 || b < 0 || a >= n_ || b >= n_ || a == b) throw ConfigError("system: bad bond");
    bonds_.emplace_back(std::min(a, b), std::max(a, b));
  }
  void set_order(std::vector<int> order) {
    std::vector<int> s = order;
    std::sort(s.begin(), s.end());
    bool ok = static_cast<int>(s.size()) == n_;
    for (int i = 0; ok && i < n_; ++i) ok = s[static_cast<std::size_t>(i)] == i;
    if (!ok) throw ConfigError("system: site order must be a permutation of 0..N-1");
    order_ = std::move(order);
  }
  void set_period(double period) {
    if (!(period > 0.0) || !std::isfinite(period)) throw ConfigError("system: period must be positive");
    period_ = period;
  }
  DrivenSystem with_period(double period) const {
    DrivenSystem s = *this;
    s.set_period(period);
    return s;
  }
  /// Same system with the driving removed.
  DrivenSystem undriven() const {
    DrivenSystem s = *this;
    s.driving_.clear();
    return s;
  }
  /// Same system with H0 removed.
  DrivenSystem without_static() const {
    DrivenSystem s = *this;
    s.h0_ = PauliOperator(n_);
    return s;
  }
  /// H0 moved into the driving as constant terms (the identity part of H0 stays static).
  DrivenSystem folded() const {
    DrivenSystem s = *this;
    s.h0_ = PauliOperator(n_);
    std::vector<DrivingTerm> moved;
    for (const auto& [k, c] : h0_.terms()) {
      if (k.support() == 0) {
        s.h0_.add(k, c);
        continue;
      }
      moved.push_back({PauliString::from_key(k, c), Profile::polynomial({1.0})});
    }
    s.driving_.insert(s.driving_.begin(), moved.begin(), moved.end());
    return s;
  }
  /// Same system keeping only the driving terms accepted by `keep`.
  template <class Pred>
  DrivenSystem filter_driving(Pred keep) const {
    DrivenSystem s = *this;
    s.driving_.clear();
    for (const auto& d : driving_)
      if (keep(d)) s.driving_.push_back(d);
    return s;
  }

  /// Position of each site in the configured order.
  std::vector<int> rank() const {
    std::vector<int> r(static_cast<std::size_t>(n_));
    for (int p = 0; p < n_; ++p) r[static_cast<std::size_t>(order_[static_cast<std::size_t>(p)])] = p;
    return r;
  }

  /// The site of `mask` that comes first in the configured order.
  int first_site(std::uint64_t mask) const {
    const auto r = rank();
    int best = -1;
    for (std::uint64_t m = mask; m; m &= m - 1) {
      const int s = std::countr_zero(m);
      if (best < 0 || r[static_cast<std::size_t>(s)] < r[static_cast<std::size_t>(best)]) best = s;
    }
    return best;
  }

  /// Partition of [0, T] at every profile break.
  std::vector<double> breakpoints() const {
    std::vector<double> f{0.0, 1.0};
    for (const auto& d : driving_)
      for (double e : d.profile.ends) f.push_back(e);
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
    std::vector<double> b;
    for (double x : f) b.push_back(x == 1.0 ? period_ : x * period_);
    return b;
  }

  PauliOperator driving_at(double t) const {
    check_time(t);
    PauliOperator v(n_);
    for (const auto& d : driving_) {
      PauliString s = d.string;
      s.coefficient *= d.profile.value(t, period_);
      v.add(s);
    }
    return v.prune();
  }
  PauliOperator hamiltonian_at(double t) const { return h0_ + driving_at(t); }

  /// V(t) as a piecewise Pauli-coefficient polynomial on breakpoints().
  PiecewisePoly<PauliOperator> driving_poly() const {
    const auto br = breakpoints();
    std::vector<TimePoly<PauliOperator>> segs;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      std::vector<PauliOperator> coeffs;
      for (const auto& d : driving_) {
        const ScalarPoly& p = d.profile.piece_for(br[k], br[k + 1], period_);
        if (coeffs.size() < p.size()) coeffs.resize(p.size(), PauliOperator(n_));
        for (std::size_t j = 0; j < p.size(); ++j) {
          PauliString s = d.string;
          s.coefficient *= p[j];
          coeffs[j].add(s);
        }
      }
      for (auto& c : coeffs) c.prune();
      if (coeffs.empty())
        segs.emplace_back(PauliOperator(n_), br[k], br[k + 1]);
      else
        segs.emplace_back(std::move(coeffs), 0, br[k], br[k + 1]);
    }
    return PiecewisePoly<PauliOperator>(br, std::move(segs));
  }

  PiecewisePoly<PauliOperator> hamiltonian_poly() const {
    auto v = driving_poly();
    const auto br = v.breakpoints();
    for (std::size_t k = 0; k + 1 < br.size(); ++k)
      v.segments()[k].add_scaled_poly(TimePoly<PauliOperator>::constant(h0_, br[k], br[k + 1]), 1.0);
    return v;
  }

  /// H0 and every polynomial coefficient of V(t): H(t) lies in their span at all t.
  std::vector<PauliOperator> generators() const {
    std::vector<PauliOperator> g{h0_};
    const auto v = driving_poly();
    for (const auto& seg : v.segments())
      for (const auto& c : seg.coeffs()) g.push_back(c);
    return g;
  }

  /// Graph distance between sites through the bonds (unreachable: large value).
  std::vector<std::vector<int>> site_distances() const {
    const int inf = std::numeric_limits<int>::max() / 4;
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_));
    for (auto [a, b] : bonds_) {
      adj[static_cast<std::size_t>(a)].push_back(b);
      adj[static_cast<std::size_t>(b)].push_back(a);
    }
    std::vector<std::vector<int>> d(static_cast<std::size_t>(n_), std::vector<int>(static_cast<std::size_t>(n_), inf));
    for (int s = 0; s < n_; ++s) {
      auto& ds = d[static_cast<std::size_t>(s)];
      ds[static_cast<std::size_t>(s)] = 0;
      std::deque<int> q{s};
      while (!q.empty()) {
        const int u = q.front();
        q.pop_front();
        for (int v : adj[static_cast<std::size_t>(u)])
          if (ds[static_cast<std::size_t>(v)] == inf) {
            ds[static_cast<std::size_t>(v)] = ds[static_cast<std::size_t>(u)] + 1;
            q.push_back(v);
          }
      }
    }
    return d;
  }

  /// dist(X, Y) = min over x in X, y in Y.
  int distance(std::uint64_t x, std::uint64_t y) const {
    const auto d = site_distances();
    int best = std::numeric_limits<int>::max() / 4;
    for (std::uint64_t a = x; a; a &= a - 1)
      for (std::uint64_t b = y; b; b &= b - 1)
        best = std::min(best, d[static_cast<std::size_t>(std::countr_zero(a))][static_cast<std::size_t>(std::countr_zero(b))]);
    return best;
  }

  void check_time(double t) const {
    if (!(t > 0.0 && t <= period_))
      throw DomainError("time " + std::to_string(t) + " outside (0, " + std::to_string(period_) + "]");
  }

 private:
  void check_string(const PauliString& s, bool allow_identity) const {
    s.validate();
    if (!allow_identity && s.sites.empty()) throw ConfigError("system: driving term must act on at least one site");
    for (int site : s.sites)
      if (site >= n_) throw ConfigError("system: site " + std::to_string(site) + " outside 0.." + std::to_string(n_ - 1));
  }

  int n_ = 0;
  double period_ = 1.0;
  PauliOperator h0_;
  std::vector<DrivingTerm> driving_;
  std::vector<std::pair<int, int>> bonds_;
  std::vector<int> order_;
};

struct LocalityMetrics {
  int k = 0;
  double J = 0.0;
  double lambda = 0.0;
  double lambda_tilde = 0.0;
  double V0 = 0.0;
  std::vector<double> Vi;
};

namespace detail {

/// Driving strings grouped by support: support -> list of (string, profile).
inline std::map<std::uint64_t, std::vector<const DrivingTerm*>> group_driving(const DrivenSystem& sys) {
  std::map<std::uint64_t, std::vector<const DrivingTerm*>> g;
  for (const auto& d : sys.driving()) g[d.string.key().support()].push_back(&d);
  return g;
}

/// ||v_X(t)|| for a support group.
inline double group_norm(const std::vector<const DrivingTerm*>& terms, int n, double t, double period) {
  if (terms.size() == 1) return std::abs(terms.front()->string.coefficient) * std::abs(terms.front()->profile.value(t, period));
  PauliOperator v(n);
  for (const auto* d : terms) {
    PauliString s = d->string;
    s.coefficient *= d->profile.value(t, period);
    v.add(s);
  }
  return local_norm(v.prune());
}

/// A single-string group as a scalar polynomial |coef| * f on segment (a, b].
inline ScalarPoly single_poly(const DrivingTerm& d, double a, double b, double period) {
  ScalarPoly p = d.profile.piece_for(a, b, period);
  const double c = d.string.coefficient.real();
  for (double& x : p) x *= c;
  return p;
}

}  // namespace detail

/// Locality metrics. `t_samples` (>= 8) sets the sampling density used for
/// supports carrying several driven strings; single-string supports use the
/// exact polynomial envelope.
inline LocalityMetrics locality_metrics(const DrivenSystem& sys, int t_samples = 64) {
  if (t_samples < 8) throw DomainError("locality_metrics: need at least 8 samples per period");
  const int n = sys.n_sites();
  const double T = sys.period();
  LocalityMetrics m;
  m.Vi.assign(static_cast<std::size_t>(n), 0.0);

  std::vector<double> static_sum(static_cast<std::size_t>(n), 0.0);
  for (const auto& [mask, op] : group_by_support(sys.h0())) {
    if (mask == 0) continue;
    if (std::popcount(mask) > kDefaultDenseLimit) throw DimensionError("locality_metrics: term support too large");
    m.k = std::max(m.k, std::popcount(mask));
    const double nrm = local_norm(op);
    for (std::uint64_t s = mask; s; s &= s - 1) static_sum[static_cast<std::size_t>(std::countr_zero(s))] += nrm;
  }

  const auto groups = detail::group_driving(sys);
  const auto br = sys.breakpoints();
  std::vector<double> drive_sup(static_cast<std::size_t>(n), 0.0);
  for (const auto& [mask, terms] : groups)
    if (std::popcount(mask) > kDefaultDenseLimit) throw DimensionError("locality_metrics: term support too large");

  for (int i = 0; i < n; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    std::vector<const std::vector<const DrivingTerm*>*> touching;
    bool composite = false;
    for (const auto& [mask, terms] : groups)
      if (mask & bit) {
        touching.push_back(&terms);
        composite = composite || terms.size() > 1;
      }
    if (touching.empty()) continue;
    double best = 0.0;
    for (std::size_t seg = 0; seg + 1 < br.size(); ++seg) {
      const double a = br[seg], b = br[seg + 1];
      if (!composite) {
        std::vector<ScalarPoly> polys;
        std::vector<double> cuts{a, b};
        for (const auto* terms : touching) {
          polys.push_back(detail::single_poly(*terms->front(), a, b, T));
          for (double r : poly_real_roots(polys.back(), a, b)) cuts.push_back(r);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
          const double lo = cuts[c], hi = cuts[c + 1], mid = 0.5 * (lo + hi);
          ScalarPoly g;
          for (const auto& p : polys) poly_axpy(g, p, poly_eval(p, mid) >= 0.0 ? 1.0 : -1.0);
          best = std::max(best, poly_abs_max(g, lo, hi));
        }
      } else {
        const int samples = 4 * t_samples;
        for (int s = 0; s <= samples; ++s) {
          const double t = a + (b - a) * s / samples;
          const double tt = std::max(t, a + 1e-15 * (b - a));
          double g = 0.0;
          for (const auto* terms : touching) g += detail::group_norm(*terms, n, std::min(tt, b), T);
          best = std::max(best, g);
        }
      }
    }
    drive_sup[static_cast<std::size_t>(i)] = best;
  }
  for (int i = 0; i < n; ++i)
    m.J = std::max(m.J, static_sum[static_cast<std::size_t>(i)] + drive_sup[static_cast<std::size_t>(i)]);

  for (const auto& [mask, terms] : groups) {
    m.k = std::max(m.k, std::popcount(mask));
    double integral = 0.0;
    for (std::size_t seg = 0; seg + 1 < br.size(); ++seg) {
      const double a = br[seg], b = br[seg + 1];
      if (terms.size() == 1)
        integral += poly_abs_integral(detail::single_poly(*terms.front(), a, b, T), a, b);
      else
        integral += integrate_gauss([&](double t) { return detail::group_norm(terms, n, t, T); }, a, b, 64, 10);
    }
    const double v = integral / T;
    m.V0 += v;
    m.Vi[static_cast<std::size_t>(sys.first_site(mask))] += v;
  }
  m.lambda = 2.0 * m.k * m.J;
  m.lambda_tilde = 6.0 * m.k * m.k * m.J;
  return m;
}

// ---- model builders

/// Periodic (ring) or open chain bonds 0-1-...-(N-1).
inline void add_chain_bonds(DrivenSystem& sys, bool periodic) {
  const int n = sys.n_sites();
  for (int i = 0; i + 1 < n; ++i) sys.add_bond(i, i + 1);
  if (periodic && n > 2) sys.add_bond(0, n - 1);
}

/// sum_i [jx X_i X_{i+1} + jy Y_i Y_{i+1} + jz Z_i Z_{i+1}] over chain bonds.
inline void add_heisenberg(DrivenSystem& sys, double jx, double jy, double jz) {
  for (auto [a, b] : sys.bonds()) {
    if (jx != 0.0) sys.add_static(PauliString({a, b}, "XX", jx));
    if (jy != 0.0) sys.add_static(PauliString({a, b}, "YY", jy));
    if (jz != 0.0) sys.add_static(PauliString({a, b}, "ZZ", jz));
  }
}

/// Ring of N spins, h = (3/2)XX + YY + (1/2)ZZ per bond, driving t Z_i on (0, T].
inline DrivenSystem anisotropic_heisenberg_ring(int n, double period) {
  DrivenSystem sys(n, period);
  add_chain_bonds(sys, true);
  add_heisenberg(sys, 1.5, 1.0, 0.5);
  for (int i = 0; i < n; ++i) sys.add_driving(PauliString({i}, "Z"), Profile::polynomial({0.0, 1.0}));
  return sys;
}

/// Deterministic uniform double in [a, b) from a 64-bit engine.
inline double uniform(std::mt19937_64& rng, double a, double b) {
  return a + (b - a) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct RandomSystemOptions {
  int n_sites = 4;
  int degree = 1;                 // polynomial degree of the driving profiles
  bool periodic = false;
  double scale = 1.0;             // coefficient magnitude
  bool two_site_driving = true;   // also drive random bonds
  bool zero_mean = false;         // enforce int_0^T V = 0
  int pieces = 1;                 // profile pieces per period
};

/// Random 2-local chain: every bond gets random two-site Pauli couplings, every
/// site random fields; each site (and optionally each bond) gets a random
/// polynomial driving.
inline DrivenSystem random_system(std::uint64_t seed, double period, const RandomSystemOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  DrivenSystem sys(opt.n_sites, period);
  add_chain_bonds(sys, opt.periodic);
  static const char* kPairs[] = {"XX", "XY", "XZ", "YX", "YY", "YZ", "ZX", "ZY", "ZZ"};
  static const char* kSingles[] = {"X", "Y", "Z"};
  const auto bonds = sys.bonds();
  for (auto [a, b] : bonds)
    for (const char* p : kPairs)
      if (uniform(rng, 0.0, 1.0) < 0.4) sys.add_static(PauliString({a, b}, p, opt.scale * uniform(rng, -1.0, 1.0)));
  for (int i = 0; i < opt.n_sites; ++i)
    for (const char* p : kSingles)
      if (uniform(rng, 0.0, 1.0) < 0.5) sys.add_static(PauliString({i}, p, opt.scale * uniform(rng, -1.0, 1.0)));

  auto random_profile = [&]() {
    Profile prof;
    prof.ends.clear();
    prof.polys.clear();
    for (int j = 1; j <= opt.pieces; ++j) {
      prof.ends.push_back(j == opt.pieces ? 1.0 : static_cast<double>(j) / opt.pieces);
      ScalarPoly p;
      // coefficients scaled so that |f| stays O(scale) on (0, T]
      for (int d = 0; d <= opt.degree; ++d) p.push_back(uniform(rng, -1.0, 1.0) * opt.scale / std::pow(period, d));
      prof.polys.push_back(std::move(p));
    }
    if (opt.zero_mean) {
      // subtract the period average from the constant terms
      double avg = 0.0;
      double prev = 0.0;
      for (std::size_t j = 0; j < prof.polys.size(); ++j) {
        const ScalarPoly P = poly_antiderivative(prof.polys[j]);
        avg += poly_eval(P, prof.ends[j] * period) - poly_eval(P, prev * period);
        prev = prof.ends[j];
      }
      avg /= period;
      for (auto& p : prof.polys) p[0] -= avg;
    }
    return prof;
  };
  for (int i = 0; i < opt.n_sites; ++i) {
    const char* p = kSingles[rng() % 3];
    sys.add_driving(PauliString({i}, p), random_profile());
  }
  if (opt.two_site_driving)
    for (auto [a, b] : bonds)
      if (uniform(rng, 0.0, 1.0) < 0.5) sys.add_driving(PauliString({a, b}, kPairs[rng() % 9]), random_profile());
  return sys;
}

}  // namespace fml

#endif  // FML_SYSTEM_HPP
