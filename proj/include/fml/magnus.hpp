#ifndef FML_MAGNUS_HPP
#define FML_MAGNUS_HPP

// Floquet-Magnus terms. Convention: H_F = sum_n T^n Omega_n with
// exp(-i H_F T) the time-ordered one-period evolution, so that
// T^n Omega_n = (i/T) * M_{n+1}, where M_k is the k-th standard Magnus term of
// the generator -i H(t).

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "fml/errors.hpp"
#include "fml/linalg.hpp"
#include "fml/pauli.hpp"
#include "fml/symmetry.hpp"
#include "fml/system.hpp"
#include "fml/time_poly.hpp"

namespace fml {

inline constexpr int kMaxMagnusOrder = 40;

/// B_j / j! with B_1 = -1/2 (zero for odd j >= 3).
inline double bernoulli_over_factorial(int j) {
  if (j == 0) return 1.0;
  if (j == 1) return -0.5;
  if (j % 2 == 1) return 0.0;
  // B_{2k}/(2k)! = (-1)^{k+1} 2 zeta(2k) / (2 pi)^{2k}
  const int s = j;
  double zeta;
  if (s == 2) {
    zeta = std::numbers::pi * std::numbers::pi / 6.0;
  } else if (s == 4) {
    zeta = std::pow(std::numbers::pi, 4) / 90.0;
  } else {
    zeta = 0.0;
    const int terms = 4000;
    for (int n = terms; n >= 1; --n) zeta += std::pow(static_cast<double>(n), -s);
    zeta += std::pow(static_cast<double>(terms), 1 - s) / (s - 1);
  }
  const int k = j / 2;
  const double sign = (k % 2 == 1) ? 1.0 : -1.0;
  return sign * 2.0 * zeta / std::pow(2.0 * std::numbers::pi, s);
}

/// The first `count` Magnus terms M_1..M_count of the generator A on its full
/// domain, through the Bernoulli recursion on nested commutators:
///   M_1(s) = int A,
///   S_n^(1) = [M_{n-1}, A],  S_n^(j) = sum_{m=1}^{n-j} [M_m, S_{n-m}^(j-1)],
///   M_n(s) = sum_{j=1}^{n-1} B_j/j! int S_n^(j).
template <class C>
std::vector<C> magnus_terms(const PiecewisePoly<C>& a, int count,
                            const std::function<void(int)>& progress = {}) {
  if (count < 1) return {};
  std::vector<PiecewisePoly<C>> om(static_cast<std::size_t>(count) + 1);
  std::vector<std::vector<PiecewisePoly<C>>> s(static_cast<std::size_t>(count) + 1);
  om[1] = integrate(a);
  std::vector<C> out{om[1].end_value()};
  if (progress) progress(1);
  const PiecewisePoly<C> zero(a.zero(), a.breakpoints());
  for (int n = 2; n <= count; ++n) {
    auto& sn = s[static_cast<std::size_t>(n)];
    sn.assign(static_cast<std::size_t>(n), zero);
    sn[1].add_commutator_of(om[static_cast<std::size_t>(n - 1)], a, 1.0);
    for (int j = 2; j <= n - 1; ++j)
      for (int m = 1; m <= n - j; ++m)
        sn[static_cast<std::size_t>(j)].add_commutator_of(om[static_cast<std::size_t>(m)],
                                                          s[static_cast<std::size_t>(n - m)][static_cast<std::size_t>(j - 1)], 1.0);
    PiecewisePoly<C> integrand = zero;
    for (int j = 1; j <= n - 1; ++j) {
      const double b = bernoulli_over_factorial(j);
      if (b != 0.0) integrand.add_scaled_poly(sn[static_cast<std::size_t>(j)], b);
    }
    om[static_cast<std::size_t>(n)] = integrate(integrand);
    out.push_back(om[static_cast<std::size_t>(n)].end_value());
    if (progress) progress(n);
  }
  return out;
}

/// -i T H(sT) on s in (0, 1]: the generator in the normalised time s = t/T.
template <class C>
PiecewisePoly<C> unit_period_generator(const PiecewisePoly<C>& h, double period) {
  std::vector<double> br;
  for (double b : h.breakpoints()) br.push_back(b == period ? 1.0 : b / period);
  br.back() = 1.0;
  std::vector<TimePoly<C>> segs;
  for (std::size_t k = 0; k < h.num_segments(); ++k) {
    const auto& seg = h.segments()[k];
    if (seg.is_zero()) {
      segs.emplace_back(h.zero(), br[k], br[k + 1]);
      continue;
    }
    std::vector<C> cs = seg.coeffs();
    for (std::size_t j = 0; j < cs.size(); ++j) {
      const int p = seg.offset() + static_cast<int>(j);
      scale_in_place(cs[j], cplx(0.0, -std::pow(period, p + 1)));
    }
    segs.emplace_back(std::move(cs), seg.offset(), br[k], br[k + 1]);
  }
  return PiecewisePoly<C>(std::move(br), std::move(segs));
}

enum class MagnusBackend { Auto, Pauli, Dense };

inline std::string to_string(MagnusBackend b) {
  switch (b) {
    case MagnusBackend::Pauli: return "pauli";
    case MagnusBackend::Dense: return "dense";
    default: return "auto";
  }
}

struct MagnusOptions {
  MagnusBackend backend = MagnusBackend::Auto;
  bool use_symmetry = true;
  int max_order = kMaxMagnusOrder;
  int pauli_max_order = 6;  // Auto picks the Pauli backend only up to this order ...
  int pauli_max_sites = 4;  // ... and this many sites
  std::function<void(int)> progress;
};

/// Omega_0 .. Omega_nmax of one driven system (unweighted, H_F = sum T^n Omega_n).
class MagnusSeries {
 public:
  MagnusSeries() = default;
  MagnusSeries(double period, std::vector<BlockOp> omegas, std::vector<PauliOperator> pauli, MagnusBackend backend)
      : period_(period), omegas_(std::move(omegas)), pauli_(std::move(pauli)), backend_(backend) {}

  double period() const { return period_; }
  int max_order() const { return static_cast<int>(omegas_.size()) - 1; }
  MagnusBackend backend() const { return backend_; }
  const std::shared_ptr<const BlockBasis>& basis() const { return omegas_.front().basis(); }
  int n_sites() const { return basis()->n_sites(); }

  const BlockOp& omega(int n) const {
    check(n);
    return omegas_[static_cast<std::size_t>(n)];
  }
  Matrix omega_full(int n) const { return omega(n).to_full(); }
  bool has_pauli() const { return !pauli_.empty(); }
  const PauliOperator& omega_pauli(int n) const {
    if (pauli_.empty()) throw DomainError("MagnusSeries: Pauli forms not available for the dense backend");
    check(n);
    return pauli_[static_cast<std::size_t>(n)];
  }
  /// ||T^n Omega_n||.
  double weighted_norm(int n) const { return std::pow(period_, n) * omega(n).hermitian_norm(); }
  double norm(int n) const { return omega(n).hermitian_norm(); }

  void check(int n) const {
    if (n < 0 || n > max_order())
      throw DomainError("MagnusSeries: order " + std::to_string(n) + " outside 0.." + std::to_string(max_order()));
  }

 private:
  double period_ = 1.0;
  std::vector<BlockOp> omegas_;
  std::vector<PauliOperator> pauli_;
  MagnusBackend backend_ = MagnusBackend::Dense;
};

/// The Magnus terms M_1..M_count -> Omega_0..Omega_{count-1}.
template <class C>
std::vector<C> omegas_from_magnus(std::vector<C> m, double period) {
  for (std::size_t k = 0; k < m.size(); ++k) scale_in_place(m[k], cplx(0.0, 1.0) / std::pow(period, static_cast<double>(k + 1)));
  return m;
}

inline std::shared_ptr<const BlockBasis> system_basis(const DrivenSystem& sys, bool use_symmetry) {
  return BlockBasis::for_operators(sys.generators(), sys.n_sites(), use_symmetry);
}

inline MagnusSeries omega_series(const DrivenSystem& sys, int n_max, const MagnusOptions& opt = {}) {
  if (n_max < 0) throw DomainError("omega_series: negative order");
  if (n_max > opt.max_order)
    throw DomainError("omega_series: order " + std::to_string(n_max) + " exceeds the ceiling " +
                      std::to_string(opt.max_order));
  MagnusBackend backend = opt.backend;
  if (backend == MagnusBackend::Auto)
    backend = (n_max <= opt.pauli_max_order && sys.n_sites() <= opt.pauli_max_sites) ? MagnusBackend::Pauli
                                                                                      : MagnusBackend::Dense;
  const auto basis = system_basis(sys, opt.use_symmetry);
  const double T = sys.period();
  if (backend == MagnusBackend::Pauli) {
    auto pauli = omegas_from_magnus(magnus_terms(unit_period_generator(sys.hamiltonian_poly(), T), n_max + 1, opt.progress), T);
    for (auto& p : pauli) p.prune();
    std::vector<BlockOp> dense;
    for (const auto& p : pauli) dense.push_back(BlockOp::from_pauli(basis, p));
    return MagnusSeries(T, std::move(dense), std::move(pauli), backend);
  }
  const auto h = sys.hamiltonian_poly().map([&](const PauliOperator& p) { return BlockOp::from_pauli(basis, p); });
  auto dense = omegas_from_magnus(magnus_terms(unit_period_generator(h, T), n_max + 1, opt.progress), T);
  return MagnusSeries(T, std::move(dense), {}, backend);
}

// ---- direct evaluation of Omega_0, Omega_1, Omega_2 from the nested time integrals

namespace detail {

/// Scalar piecewise polynomial on a fixed partition (one coefficient vector per segment).
using ScalarPiecewise = std::vector<ScalarPoly>;

/// F(t) = int_0^t tau^p 1[tau in segment seg] g(tau) dtau, with g piecewise (empty = 1).
inline ScalarPiecewise indicator_integral(const std::vector<double>& br, int seg, int p, const ScalarPiecewise& g) {
  const std::size_t ns = br.size() - 1;
  ScalarPiecewise out(ns);
  double carry = 0.0;
  for (std::size_t k = 0; k < ns; ++k) {
    if (static_cast<int>(k) == seg) {
      ScalarPoly f(static_cast<std::size_t>(p) + 1, 0.0);
      f[static_cast<std::size_t>(p)] = 1.0;
      if (!g.empty()) {
        ScalarPoly prod(f.size() + g[k].size(), 0.0);
        for (std::size_t i = 0; i < f.size(); ++i)
          for (std::size_t j = 0; j < g[k].size(); ++j) prod[i + j] += f[i] * g[k][j];
        f = prod;
      }
      ScalarPoly F = poly_antiderivative(f);
      F[0] += carry - poly_eval(F, br[k]);
      out[k] = F;
      carry = poly_eval(F, br[k + 1]);
    } else {
      out[k] = ScalarPoly{carry};
    }
  }
  return out;
}

/// int_{t_1 > t_2 > ... > t_r, 0 < t_r} prod_i t_i^{p_i} 1[t_i in seg_i], over (0, T].
inline double simplex_integral(const std::vector<double>& br, const std::vector<int>& segs, const std::vector<int>& powers) {
  ScalarPiecewise g;
  for (std::size_t i = segs.size(); i-- > 0;) g = indicator_integral(br, segs[i], powers[i], g);
  return poly_eval(g.back(), br.back());
}

}  // namespace detail

/// Omega_n for n in {0, 1, 2} straight from the nested-integral formulas:
///   Omega_0 = (1/T) int H,
///   Omega_1 = 1/(2 i T^2) int_{t1>t2} [H(t1), H(t2)],
///   Omega_2 = -1/(6 T^3) int_{t1>t2>t3} ([H1,[H2,H3]] + [H3,[H2,H1]]),
/// expanding H(t) into its polynomial coefficients and integrating the monomials exactly.
inline PauliOperator omega_direct(const DrivenSystem& sys, int n) {
  if (n < 0 || n > 2) throw DomainError("omega_direct: only n = 0, 1, 2 are available");
  const auto h = sys.hamiltonian_poly();
  const auto& br = h.breakpoints();
  const double T = sys.period();
  const int ns = static_cast<int>(h.num_segments());
  struct Piece {
    int seg;
    int power;
    PauliOperator op;
  };
  std::vector<Piece> pieces;
  for (int k = 0; k < ns; ++k) {
    const auto& s = h.segments()[static_cast<std::size_t>(k)];
    for (int p = s.offset(); p <= s.degree(); ++p) {
      auto c = s.coefficient(p);
      if (!c.is_zero()) pieces.push_back({k, p, std::move(c)});
    }
  }
  PauliOperator out(sys.n_sites());
  if (n == 0) {
    for (const auto& a : pieces) add_scaled(out, a.op, detail::simplex_integral(br, {a.seg}, {a.power}) / T);
    return out;
  }
  if (n == 1) {
    for (const auto& a : pieces)
      for (const auto& b : pieces) {
        if (b.seg > a.seg) continue;
        const double w = detail::simplex_integral(br, {a.seg, b.seg}, {a.power, b.power});
        if (w == 0.0) continue;
        add_commutator(out, a.op, b.op, w / (cplx(0.0, 2.0) * T * T));
      }
    return out;
  }
  for (const auto& a : pieces)
    for (const auto& b : pieces) {
      if (b.seg > a.seg) continue;
      for (const auto& c : pieces) {
        if (c.seg > b.seg) continue;
        const double w = detail::simplex_integral(br, {a.seg, b.seg, c.seg}, {a.power, b.power, c.power});
        if (w == 0.0) continue;
        const cplx f = -w / (6.0 * T * T * T);
        add_commutator(out, a.op, commutator(b.op, c.op), f);
        add_commutator(out, c.op, commutator(b.op, a.op), f);
      }
    }
  return out;
}

/// H_F^(n) = sum_{m <= n} T^m Omega_m.
struct TruncatedHamiltonian {
  int order = 0;
  double period = 1.0;
  BlockOp op;
  Matrix full() const { return op.to_full(); }
};

inline TruncatedHamiltonian truncate(const MagnusSeries& s, int n) {
  if (n < 0 || n > s.max_order())
    throw DomainError("truncate: order " + std::to_string(n) + " outside 0.." + std::to_string(s.max_order()));
  BlockOp h = s.omega(0);
  for (int m = 1; m <= n; ++m) add_scaled(h, s.omega(m), std::pow(s.period(), m));
  // symmetrise against rounding
  for (auto& b : h.blocks()) b = 0.5 * (b + b.adjoint()).eval();
  return {n, s.period(), std::move(h)};
}

// ---- closed-form bound quantities

/// log10 of 2 V0 lambda^n n! / (n+1)^2 (-inf when V0 or lambda vanish).
inline double lemma1_bound_log10(int n, const LocalityMetrics& m) {
  if (n < 1) throw DomainError("lemma1_bound: defined for n >= 1");
  if (m.V0 == 0.0 || m.lambda == 0.0) return -std::numeric_limits<double>::infinity();
  return (std::log(2.0 * m.V0) + n * std::log(m.lambda) + std::lgamma(n + 1.0) - 2.0 * std::log(n + 1.0)) /
         std::numbers::ln10;
}

/// Omega-bar_n = 2 V0 lambda^n n! / (n+1)^2 (inf past the double range).
inline double lemma1_bound(int n, const LocalityMetrics& m) {
  const double l = lemma1_bound_log10(n, m);
  if (l == -std::numeric_limits<double>::infinity()) return 0.0;
  return l > 307.0 ? std::numeric_limits<double>::infinity() : std::pow(10.0, l);
}

/// n0 = floor(1 / (16 lambda T)); large when lambda = 0.
inline int optimal_order_n0(const LocalityMetrics& m, double period) {
  if (!(period > 0.0)) throw DomainError("optimal_order_n0: period must be positive");
  const double x = 16.0 * m.lambda * period;
  if (x > 1.0) return 0;
  if (x == 0.0) return 1 << 20;
  return static_cast<int>(std::min(std::floor(1.0 / x), static_cast<double>(1 << 20)));
}

/// W~_n = 2 (4 lambda / 3)^n n! / (n+1)^2.
inline double w_tilde(int n, const LocalityMetrics& m) {
  if (n < 1) throw DomainError("w_tilde: defined for n >= 1");
  if (m.lambda == 0.0) return 0.0;
  return std::exp(std::log(2.0) + n * std::log(4.0 * m.lambda / 3.0) + std::lgamma(n + 1.0) - 2.0 * std::log(n + 1.0));
}

}  // namespace fml

#endif  // FML_MAGNUS_HPP
