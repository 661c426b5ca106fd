#ifndef FML_TIME_POLY_HPP
#define FML_TIME_POLY_HPP

// Operator-valued polynomials A(t) = sum_j t^(offset+j) A_j on a half-open
// interval (lo, hi], and piecewise versions on a partition of (lo, hi].
//
// The coefficient type C needs the free functions zero_like, is_exact_zero,
// add_scaled, add_commutator and scale_in_place (provided here for
// PauliOperator and dense matrices, in symmetry.hpp for BlockOp).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fml/errors.hpp"
#include "fml/linalg.hpp"
#include "fml/pauli.hpp"

namespace fml {

// ---- coefficient operations: PauliOperator

inline PauliOperator zero_like(const PauliOperator& a) { return PauliOperator(a.n_sites()); }
inline bool is_exact_zero(const PauliOperator& a) { return a.is_zero(); }
inline void add_scaled(PauliOperator& acc, const PauliOperator& x, cplx s) {
  acc.check_universe(x);
  for (const auto& [k, c] : x.terms()) acc.add(k, s * c);
  acc.prune();
}
inline void add_commutator(PauliOperator& acc, const PauliOperator& a, const PauliOperator& b, cplx s) {
  acc.check_universe(a);
  a.check_universe(b);
  for (const auto& [ka, ca] : a.terms())
    for (const auto& [kb, cb] : b.terms()) {
      if (!anticommutes(ka, kb)) continue;
      const auto p = multiply_keys(ka, kb);
      acc.add(p.key, 2.0 * s * ca * cb * i_power(p.phase));
    }
  acc.prune();
}
inline void scale_in_place(PauliOperator& a, cplx s) { a *= s; }

// ---- coefficient operations: dense matrices

inline Matrix zero_like(const Matrix& a) { return Matrix::Zero(a.rows(), a.cols()); }
inline bool is_exact_zero(const Matrix& a) { return a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0; }
inline void add_scaled(Matrix& acc, const Matrix& x, cplx s) { acc += s * x; }
inline void add_commutator(Matrix& acc, const Matrix& a, const Matrix& b, cplx s) {
  acc.noalias() += s * a * b;
  acc.noalias() -= s * b * a;
}
inline void scale_in_place(Matrix& a, cplx s) { a *= s; }
inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

template <class C>
class TimePoly {
 public:
  TimePoly() = default;
  /// Zero polynomial on (lo, hi]; `prototype` fixes the coefficient shape.
  TimePoly(const C& prototype, double lo, double hi) : zero_(zero_like(prototype)), lo_(lo), hi_(hi) {
    if (!(hi > lo)) throw DomainError("TimePoly: empty domain");
  }
  /// sum_j t^(offset+j) coeffs[j].
  TimePoly(std::vector<C> coeffs, int offset, double lo, double hi)
      : offset_(offset), coeffs_(std::move(coeffs)), lo_(lo), hi_(hi) {
    if (coeffs_.empty()) throw DomainError("TimePoly: use the prototype constructor for zero");
    if (offset < 0) throw DomainError("TimePoly: negative power");
    if (!(hi > lo)) throw DomainError("TimePoly: empty domain");
    zero_ = zero_like(coeffs_.front());
    trim();
  }

  static TimePoly constant(const C& a, double lo, double hi) { return TimePoly(std::vector<C>{a}, 0, lo, hi); }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int offset() const { return offset_; }
  const std::vector<C>& coeffs() const { return coeffs_; }
  const C& zero() const { return zero_; }
  bool is_zero() const { return coeffs_.empty(); }
  /// -1 for the zero polynomial.
  int degree() const { return coeffs_.empty() ? -1 : offset_ + static_cast<int>(coeffs_.size()) - 1; }

  /// Coefficient of t^p (zero outside the stored range).
  C coefficient(int p) const {
    const int j = p - offset_;
    if (j < 0 || j >= static_cast<int>(coeffs_.size())) return zero_;
    return coeffs_[static_cast<std::size_t>(j)];
  }

  bool contains(double t) const { return t > lo_ && t <= hi_; }

  C evaluate(double t) const {
    if (!contains(t))
      throw DomainError("TimePoly: t = " + std::to_string(t) + " outside (" + std::to_string(lo_) + ", " +
                        std::to_string(hi_) + "]");
    return evaluate_unchecked(t);
  }

  /// Horner evaluation without the domain check (used at segment end points).
  C evaluate_unchecked(double t) const {
    if (coeffs_.empty()) return zero_;
    C acc = coeffs_.back();
    for (std::size_t j = coeffs_.size() - 1; j-- > 0;) {
      scale_in_place(acc, t);
      add_scaled(acc, coeffs_[j], 1.0);
    }
    if (offset_ > 0) scale_in_place(acc, std::pow(t, offset_));
    return acc;
  }

  /// Drop exactly-zero coefficients at both ends.
  void trim() {
    while (!coeffs_.empty() && is_exact_zero(coeffs_.back())) coeffs_.pop_back();
    std::size_t lead = 0;
    while (lead < coeffs_.size() && is_exact_zero(coeffs_[lead])) ++lead;
    if (lead == coeffs_.size()) {
      coeffs_.clear();
      offset_ = 0;
      return;
    }
    if (lead > 0) {
      coeffs_.erase(coeffs_.begin(), coeffs_.begin() + static_cast<std::ptrdiff_t>(lead));
      offset_ += static_cast<int>(lead);
    }
  }

  TimePoly& operator*=(cplx s) {
    if (s == cplx{0.0, 0.0}) {
      coeffs_.clear();
      offset_ = 0;
      return *this;
    }
    for (auto& c : coeffs_) scale_in_place(c, s);
    return *this;
  }

  /// this += s * other; domains must coincide.
  void add_scaled_poly(const TimePoly& other, cplx s) {
    check_domain(other);
    if (other.coeffs_.empty() || s == cplx{0.0, 0.0}) return;
    if (coeffs_.empty()) {
      offset_ = other.offset_;
      coeffs_ = other.coeffs_;
      for (auto& c : coeffs_) scale_in_place(c, s);
      trim();
      return;
    }
    const int lo_pow = std::min(offset_, other.offset_);
    const int hi_pow = std::max(degree(), other.degree());
    if (lo_pow < offset_) {
      coeffs_.insert(coeffs_.begin(), static_cast<std::size_t>(offset_ - lo_pow), zero_);
      offset_ = lo_pow;
    }
    coeffs_.resize(static_cast<std::size_t>(hi_pow - offset_ + 1), zero_);
    for (std::size_t j = 0; j < other.coeffs_.size(); ++j)
      add_scaled(coeffs_[static_cast<std::size_t>(other.offset_ - offset_) + j], other.coeffs_[j], s);
    trim();
  }

  TimePoly& operator+=(const TimePoly& o) {
    add_scaled_poly(o, 1.0);
    return *this;
  }
  TimePoly& operator-=(const TimePoly& o) {
    add_scaled_poly(o, -1.0);
    return *this;
  }
  friend TimePoly operator+(TimePoly a, const TimePoly& b) { return a += b; }
  friend TimePoly operator-(TimePoly a, const TimePoly& b) { return a -= b; }
  friend TimePoly operator*(TimePoly a, cplx s) { return a *= s; }
  friend TimePoly operator*(cplx s, TimePoly a) { return a *= s; }

  /// t^j * this.
  TimePoly times_power(int j) const {
    if (j < 0) throw DomainError("TimePoly: negative power");
    TimePoly r = *this;
    if (!r.coeffs_.empty()) r.offset_ += j;
    return r;
  }

  /// this += s * [a, b] (coefficient-wise convolution).
  void add_commutator_of(const TimePoly& a, const TimePoly& b, cplx s) {
    check_domain(a);
    check_domain(b);
    if (a.is_zero() || b.is_zero()) return;
    const int lo_pow = a.offset_ + b.offset_;
    const int hi_pow = a.degree() + b.degree();
    if (coeffs_.empty()) {
      offset_ = lo_pow;
      coeffs_.assign(static_cast<std::size_t>(hi_pow - lo_pow + 1), zero_);
    } else {
      if (lo_pow < offset_) {
        coeffs_.insert(coeffs_.begin(), static_cast<std::size_t>(offset_ - lo_pow), zero_);
        offset_ = lo_pow;
      }
      if (hi_pow > degree()) coeffs_.resize(static_cast<std::size_t>(hi_pow - offset_ + 1), zero_);
    }
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
      for (std::size_t j = 0; j < b.coeffs_.size(); ++j)
        add_commutator(coeffs_[static_cast<std::size_t>(lo_pow - offset_) + i + j], a.coeffs_[i], b.coeffs_[j], s);
    trim();
  }

  void check_domain(const TimePoly& o) const {
    if (o.lo_ != lo_ || o.hi_ != hi_) throw DomainError("TimePoly: domains differ");
  }

 private:
  C zero_{};
  int offset_ = 0;
  std::vector<C> coeffs_;
  double lo_ = 0.0;
  double hi_ = 1.0;
};

/// result[m] = sum_{i+j=m} [a_i, b_j].
template <class C>
TimePoly<C> poly_commutator(const TimePoly<C>& a, const TimePoly<C>& b) {
  a.check_domain(b);
  if (a.is_zero() || b.is_zero()) return TimePoly<C>(a.zero(), a.lo(), a.hi());
  const std::size_t na = a.coeffs().size(), nb = b.coeffs().size();
  std::vector<C> out(na + nb - 1, a.zero());
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) add_commutator(out[i + j], a.coeffs()[i], b.coeffs()[j], 1.0);
  bool all_zero = true;
  for (const auto& c : out) all_zero = all_zero && is_exact_zero(c);
  if (all_zero) return TimePoly<C>(a.zero(), a.lo(), a.hi());
  return TimePoly<C>(std::move(out), a.offset() + b.offset(), a.lo(), a.hi());
}

/// Antiderivative with zero constant term: t^p -> t^(p+1)/(p+1).
template <class C>
TimePoly<C> integrate(const TimePoly<C>& a) {
  if (a.is_zero()) return a;
  std::vector<C> out = a.coeffs();
  for (std::size_t j = 0; j < out.size(); ++j)
    scale_in_place(out[j], 1.0 / static_cast<double>(a.offset() + static_cast<int>(j) + 1));
  return TimePoly<C>(std::move(out), a.offset() + 1, a.lo(), a.hi());
}

/// int_from^to a(t) dt (limits may lie anywhere; the polynomial is extended).
template <class C>
C definite_integral(const TimePoly<C>& a, double from, double to) {
  const TimePoly<C> p = integrate(a);
  C r = p.evaluate_unchecked(to);
  add_scaled(r, p.evaluate_unchecked(from), -1.0);
  return r;
}

/// Piecewise polynomial on the partition b_0 < b_1 < ... < b_K; segment k lives on (b_k, b_{k+1}].
template <class C>
class PiecewisePoly {
 public:
  PiecewisePoly() = default;
  PiecewisePoly(std::vector<double> breakpoints, std::vector<TimePoly<C>> segments)
      : breaks_(std::move(breakpoints)), segs_(std::move(segments)) {
    if (breaks_.size() < 2 || segs_.size() + 1 != breaks_.size())
      throw DomainError("PiecewisePoly: breakpoints and segments do not match");
    for (std::size_t k = 0; k < segs_.size(); ++k)
      if (segs_[k].lo() != breaks_[k] || segs_[k].hi() != breaks_[k + 1])
        throw DomainError("PiecewisePoly: segment domain differs from partition");
  }
  /// Zero on the given partition.
  PiecewisePoly(const C& prototype, std::vector<double> breakpoints) : breaks_(std::move(breakpoints)) {
    if (breaks_.size() < 2) throw DomainError("PiecewisePoly: need at least one segment");
    for (std::size_t k = 0; k + 1 < breaks_.size(); ++k) segs_.emplace_back(prototype, breaks_[k], breaks_[k + 1]);
  }

  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<TimePoly<C>>& segments() const { return segs_; }
  std::vector<TimePoly<C>>& segments() { return segs_; }
  std::size_t num_segments() const { return segs_.size(); }
  double lo() const { return breaks_.front(); }
  double hi() const { return breaks_.back(); }
  const C& zero() const { return segs_.front().zero(); }
  bool is_zero() const {
    return std::all_of(segs_.begin(), segs_.end(), [](const auto& s) { return s.is_zero(); });
  }
  int degree() const {
    int d = -1;
    for (const auto& s : segs_) d = std::max(d, s.degree());
    return d;
  }

  /// Segment whose domain (b_k, b_{k+1}] contains t.
  std::size_t segment_index(double t) const {
    if (!(t > lo() && t <= hi()))
      throw DomainError("PiecewisePoly: t = " + std::to_string(t) + " outside (" + std::to_string(lo()) + ", " +
                        std::to_string(hi()) + "]");
    auto it = std::lower_bound(breaks_.begin() + 1, breaks_.end(), t);
    return static_cast<std::size_t>(it - breaks_.begin()) - 1;
  }

  C evaluate(double t) const { return segs_[segment_index(t)].evaluate_unchecked(t); }

  /// Value at the right end of the domain.
  C end_value() const { return segs_.back().evaluate_unchecked(hi()); }

  PiecewisePoly& operator*=(cplx s) {
    for (auto& seg : segs_) seg *= s;
    return *this;
  }
  void add_scaled_poly(const PiecewisePoly& o, cplx s) {
    check_partition(o);
    for (std::size_t k = 0; k < segs_.size(); ++k) segs_[k].add_scaled_poly(o.segs_[k], s);
  }
  PiecewisePoly& operator+=(const PiecewisePoly& o) {
    add_scaled_poly(o, 1.0);
    return *this;
  }
  PiecewisePoly& operator-=(const PiecewisePoly& o) {
    add_scaled_poly(o, -1.0);
    return *this;
  }
  friend PiecewisePoly operator+(PiecewisePoly a, const PiecewisePoly& b) { return a += b; }
  friend PiecewisePoly operator-(PiecewisePoly a, const PiecewisePoly& b) { return a -= b; }
  friend PiecewisePoly operator*(PiecewisePoly a, cplx s) { return a *= s; }
  friend PiecewisePoly operator*(cplx s, PiecewisePoly a) { return a *= s; }

  /// this += s * [a, b].
  void add_commutator_of(const PiecewisePoly& a, const PiecewisePoly& b, cplx s) {
    check_partition(a);
    check_partition(b);
    for (std::size_t k = 0; k < segs_.size(); ++k) segs_[k].add_commutator_of(a.segs_[k], b.segs_[k], s);
  }

  void check_partition(const PiecewisePoly& o) const {
    if (o.breaks_ != breaks_) throw DomainError("PiecewisePoly: partitions differ");
  }

  /// Apply f to every coefficient (changes the coefficient type).
  template <class F>
  auto map(F&& f) const -> PiecewisePoly<decltype(f(std::declval<const C&>()))> {
    using D = decltype(f(std::declval<const C&>()));
    std::vector<TimePoly<D>> out;
    const D proto = f(zero());
    for (const auto& s : segs_) {
      if (s.is_zero()) {
        out.emplace_back(proto, s.lo(), s.hi());
        continue;
      }
      std::vector<D> cs;
      cs.reserve(s.coeffs().size());
      for (const auto& c : s.coeffs()) cs.push_back(f(c));
      out.emplace_back(std::move(cs), s.offset(), s.lo(), s.hi());
    }
    return PiecewisePoly<D>(breaks_, std::move(out));
  }

 private:
  std::vector<double> breaks_;
  std::vector<TimePoly<C>> segs_;
};

template <class C>
PiecewisePoly<C> poly_commutator(const PiecewisePoly<C>& a, const PiecewisePoly<C>& b) {
  a.check_partition(b);
  std::vector<TimePoly<C>> out;
  out.reserve(a.num_segments());
  for (std::size_t k = 0; k < a.num_segments(); ++k) out.push_back(poly_commutator(a.segments()[k], b.segments()[k]));
  return PiecewisePoly<C>(a.breakpoints(), std::move(out));
}

/// Cumulative integral from the left end of the domain: F(t) = int_{b_0}^t a.
template <class C>
PiecewisePoly<C> integrate(const PiecewisePoly<C>& a) {
  const auto& br = a.breakpoints();
  std::vector<TimePoly<C>> out;
  out.reserve(a.num_segments());
  C carry = a.zero();
  bool carry_zero = true;
  for (std::size_t k = 0; k < a.num_segments(); ++k) {
    TimePoly<C> p = integrate(a.segments()[k]);
    // F_k(t) = carry + P(t) - P(b_k)
    C shift = carry;
    if (!p.is_zero()) add_scaled(shift, p.evaluate_unchecked(br[k]), -1.0);
    const bool shift_zero = carry_zero && (p.is_zero() || br[k] == 0.0);
    if (!shift_zero) p.add_scaled_poly(TimePoly<C>::constant(shift, br[k], br[k + 1]), 1.0);
    if (!p.is_zero()) {
      carry = p.evaluate_unchecked(br[k + 1]);
      carry_zero = false;
    } else {
      carry = a.zero();
      carry_zero = true;
    }
    out.push_back(std::move(p));
  }
  return PiecewisePoly<C>(br, std::move(out));
}

/// int over the whole domain.
template <class C>
C definite_integral(const PiecewisePoly<C>& a) {
  C r = a.zero();
  for (const auto& s : a.segments())
    if (!s.is_zero()) add_scaled(r, definite_integral(s, s.lo(), s.hi()), 1.0);
  return r;
}

}  // namespace fml

#endif  // FML_TIME_POLY_HPP
