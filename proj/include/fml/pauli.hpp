#ifndef FML_PAULI_HPP
#define FML_PAULI_HPP

// Pauli strings encoded as (x, z) bitmasks: X = (1,0), Z = (0,1), Y = (1,1).
// Operators are sums of strings over a fixed number of sites.

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <complex>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fml/errors.hpp"
#include "fml/linalg.hpp"

namespace fml {

inline constexpr int kMaxSites = 64;
inline constexpr int kDefaultDenseLimit = 12;

struct PauliKey {
  std::uint64_t x = 0;
  std::uint64_t z = 0;

  std::uint64_t support() const { return x | z; }
  int weight() const { return std::popcount(support()); }
  bool is_identity() const { return (x | z) == 0; }
  auto operator<=>(const PauliKey&) const = default;
};

/// True iff the two strings anticommute.
inline bool anticommutes(PauliKey a, PauliKey b) {
  return (std::popcount((a.x & b.z) ^ (a.z & b.x)) & 1) != 0;
}

/// Product of two strings: a*b = i^phase * key.
struct KeyProduct {
  PauliKey key;
  int phase;  // power of i, 0..3
};

inline KeyProduct multiply_keys(PauliKey a, PauliKey b) {
  // Writing each string as i^{|x&z|} X^x Z^z, the product picks up (-1)^{|za & xb|}
  // from moving Z^za past X^xb.
  int phase = std::popcount(a.x & a.z) + std::popcount(b.x & b.z) + 2 * std::popcount(a.z & b.x);
  PauliKey c{a.x ^ b.x, a.z ^ b.z};
  phase -= std::popcount(c.x & c.z);
  return {c, ((phase % 4) + 4) % 4};
}

inline cplx i_power(int p) {
  switch (((p % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

inline char letter_of(PauliKey k, int site) {
  const bool bx = (k.x >> site) & 1u, bz = (k.z >> site) & 1u;
  if (bx && bz) return 'Y';
  if (bx) return 'X';
  if (bz) return 'Z';
  return 'I';
}

struct PauliString {
  std::vector<int> sites;
  std::string letters;
  cplx coefficient{1.0, 0.0};

  PauliString() = default;
  PauliString(std::vector<int> s, std::string l, cplx c = 1.0)
      : sites(std::move(s)), letters(std::move(l)), coefficient(c) {
    validate();
  }

  void validate() const {
    if (sites.size() != letters.size()) throw ConfigError("Pauli string: sites and letters differ in length");
    for (std::size_t i = 0; i < sites.size(); ++i) {
      if (sites[i] < 0 || sites[i] >= kMaxSites) throw ConfigError("Pauli string: site index out of range");
      if (i > 0 && sites[i] <= sites[i - 1]) throw ConfigError("Pauli string: sites must be strictly increasing");
      const char c = letters[i];
      if (c != 'X' && c != 'Y' && c != 'Z') throw ConfigError(std::string("Pauli string: bad letter '") + c + "'");
    }
  }

  PauliKey key() const {
    PauliKey k;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const std::uint64_t bit = std::uint64_t{1} << sites[i];
      if (letters[i] == 'X' || letters[i] == 'Y') k.x |= bit;
      if (letters[i] == 'Z' || letters[i] == 'Y') k.z |= bit;
    }
    return k;
  }

  static PauliString from_key(PauliKey k, cplx c = 1.0) {
    PauliString s;
    s.coefficient = c;
    std::uint64_t sup = k.support();
    while (sup) {
      const int site = std::countr_zero(sup);
      s.sites.push_back(site);
      s.letters.push_back(letter_of(k, site));
      sup &= sup - 1;
    }
    return s;
  }

  bool operator==(const PauliString&) const = default;
};

inline PauliString multiply(const PauliString& a, const PauliString& b) {
  const auto p = multiply_keys(a.key(), b.key());
  return PauliString::from_key(p.key, a.coefficient * b.coefficient * i_power(p.phase));
}

class PauliOperator {
 public:
  using TermMap = std::map<PauliKey, cplx>;

  PauliOperator() = default;
  explicit PauliOperator(int n_sites) : n_sites_(n_sites) {
    if (n_sites < 0 || n_sites > kMaxSites) throw ConfigError("PauliOperator: site count out of range");
  }
  PauliOperator(int n_sites, const PauliString& s) : PauliOperator(n_sites) { add(s); }

  static PauliOperator identity(int n_sites, cplx c = 1.0) {
    PauliOperator op(n_sites);
    op.add(PauliKey{}, c);
    return op;
  }

  int n_sites() const { return n_sites_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  void add(PauliKey k, cplx c) {
    if ((k.support() >> n_sites_) != 0 && n_sites_ < 64)
      throw UniverseMismatch("PauliOperator: string acts outside the site universe");
    if (c == cplx{0.0, 0.0}) return;
    auto [it, inserted] = terms_.try_emplace(k, c);
    if (!inserted) {
      it->second += c;
      if (it->second == cplx{0.0, 0.0}) terms_.erase(it);
    }
  }
  void add(const PauliString& s) { add(s.key(), s.coefficient); }

  cplx coefficient(PauliKey k) const {
    auto it = terms_.find(k);
    return it == terms_.end() ? cplx{0.0, 0.0} : it->second;
  }

  double max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& [k, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

  /// Drops terms below rel * max |coefficient|.
  PauliOperator& prune(double rel = 1e-15) {
    const double cut = rel * max_abs_coefficient();
    std::erase_if(terms_, [cut](const auto& kv) { return std::abs(kv.second) <= cut; });
    return *this;
  }

  PauliOperator& operator+=(const PauliOperator& o) {
    check_universe(o);
    for (const auto& [k, c] : o.terms_) add(k, c);
    return prune();
  }
  PauliOperator& operator-=(const PauliOperator& o) {
    check_universe(o);
    for (const auto& [k, c] : o.terms_) add(k, -c);
    return prune();
  }
  PauliOperator& operator*=(cplx s) {
    if (s == cplx{0.0, 0.0}) {
      terms_.clear();
      return *this;
    }
    for (auto& [k, c] : terms_) c *= s;
    return *this;
  }
  friend PauliOperator operator+(PauliOperator a, const PauliOperator& b) { return a += b; }
  friend PauliOperator operator-(PauliOperator a, const PauliOperator& b) { return a -= b; }
  friend PauliOperator operator*(PauliOperator a, cplx s) { return a *= s; }
  friend PauliOperator operator*(cplx s, PauliOperator a) { return a *= s; }
  friend PauliOperator operator*(double s, PauliOperator a) { return a *= cplx{s, 0.0}; }
  PauliOperator operator-() const { return *this * cplx{-1.0, 0.0}; }

  PauliOperator adjoint() const {
    PauliOperator r(n_sites_);
    for (const auto& [k, c] : terms_) r.terms_.emplace(k, std::conj(c));
    return r;
  }

  /// Hermitian iff every coefficient is real (all strings are self-adjoint).
  bool is_hermitian(double tol = 1e-12) const {
    const double scale = std::max(1.0, max_abs_coefficient());
    for (const auto& [k, c] : terms_)
      if (std::abs(c.imag()) > tol * scale) return false;
    return true;
  }

  /// Support (as a site bitmask) of the whole operator.
  std::uint64_t support() const {
    std::uint64_t s = 0;
    for (const auto& [k, c] : terms_) s |= k.support();
    return s;
  }

  int max_weight() const {
    int w = 0;
    for (const auto& [k, c] : terms_) w = std::max(w, k.weight());
    return w;
  }

  /// Max-coefficient distance; universes must agree.
  double distance(const PauliOperator& o) const {
    check_universe(o);
    double d = 0.0;
    auto a = terms_.begin(), b = o.terms_.begin();
    while (a != terms_.end() || b != o.terms_.end()) {
      if (b == o.terms_.end() || (a != terms_.end() && a->first < b->first)) {
        d = std::max(d, std::abs(a->second));
        ++a;
      } else if (a == terms_.end() || b->first < a->first) {
        d = std::max(d, std::abs(b->second));
        ++b;
      } else {
        d = std::max(d, std::abs(a->second - b->second));
        ++a;
        ++b;
      }
    }
    return d;
  }

  std::vector<PauliString> strings() const {
    std::vector<PauliString> out;
    out.reserve(terms_.size());
    for (const auto& [k, c] : terms_) out.push_back(PauliString::from_key(k, c));
    return out;
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& [k, c] : terms_) {
      if (!first) os << " + ";
      first = false;
      os << "(" << c.real() << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i)";
      if (k.is_identity()) os << "I";
      std::uint64_t sup = k.support();
      while (sup) {
        const int s = std::countr_zero(sup);
        os << letter_of(k, s) << s;
        sup &= sup - 1;
      }
    }
    if (first) os << "0";
    return os.str();
  }

  void check_universe(const PauliOperator& o) const {
    if (o.n_sites_ != n_sites_)
      throw UniverseMismatch("operators over " + std::to_string(n_sites_) + " and " +
                             std::to_string(o.n_sites_) + " sites combined");
  }

 private:
  int n_sites_ = 0;
  TermMap terms_;
};

/// Operator product a*b.
inline PauliOperator product(const PauliOperator& a, const PauliOperator& b) {
  a.check_universe(b);
  PauliOperator r(a.n_sites());
  for (const auto& [ka, ca] : a.terms())
    for (const auto& [kb, cb] : b.terms()) {
      const auto p = multiply_keys(ka, kb);
      r.add(p.key, ca * cb * i_power(p.phase));
    }
  return r.prune();
}

/// [a, b] = ab - ba; only anticommuting string pairs contribute, each as 2ab.
inline PauliOperator commutator(const PauliOperator& a, const PauliOperator& b) {
  a.check_universe(b);
  PauliOperator r(a.n_sites());
  for (const auto& [ka, ca] : a.terms())
    for (const auto& [kb, cb] : b.terms()) {
      if (!anticommutes(ka, kb)) continue;
      const auto p = multiply_keys(ka, kb);
      r.add(p.key, 2.0 * ca * cb * i_power(p.phase));
    }
  return r.prune();
}

struct Extensiveness {
  int k = 0;
  double J = 0.0;
};

/// k = max string weight, J = max over sites of summed |coefficient| of strings touching it.
inline Extensiveness extensiveness(const PauliOperator& a) {
  Extensiveness e;
  std::vector<double> per_site(static_cast<std::size_t>(std::max(a.n_sites(), 1)), 0.0);
  for (const auto& [k, c] : a.terms()) {
    e.k = std::max(e.k, k.weight());
    std::uint64_t sup = k.support();
    while (sup) {
      per_site[static_cast<std::size_t>(std::countr_zero(sup))] += std::abs(c);
      sup &= sup - 1;
    }
  }
  for (double v : per_site) e.J = std::max(e.J, v);
  return e;
}

/// Dense matrix of a Pauli string on n sites (bit i of the basis index is site i).
inline void accumulate_dense(Matrix& m, PauliKey k, cplx c) {
  const Eigen::Index dim = m.rows();
  const cplx base = c * i_power(std::popcount(k.x & k.z));
  for (Eigen::Index col = 0; col < dim; ++col) {
    const auto uc = static_cast<std::uint64_t>(col);
    const double sign = (std::popcount(uc & k.z) & 1) ? -1.0 : 1.0;
    m(static_cast<Eigen::Index>(uc ^ k.x), col) += sign * base;
  }
}

inline Matrix to_dense(const PauliOperator& a, int n_sites, int limit = kDefaultDenseLimit) {
  if (n_sites > limit) throw DimensionError("to_dense: " + std::to_string(n_sites) + " sites exceeds limit " +
                                            std::to_string(limit));
  if (n_sites < 0) throw DimensionError("to_dense: negative site count");
  if ((a.support() >> n_sites) != 0 && n_sites < 64)
    throw UniverseMismatch("to_dense: operator acts outside the requested sites");
  const Eigen::Index dim = Eigen::Index{1} << n_sites;
  Matrix m = Matrix::Zero(dim, dim);
  for (const auto& [k, c] : a.terms()) accumulate_dense(m, k, c);
  return m;
}

inline Matrix to_dense(const PauliOperator& a) { return to_dense(a, a.n_sites()); }

/// Pauli decomposition of a dense 2^n matrix, c_P = tr(P a) / 2^n. Cost 8^n.
inline PauliOperator from_dense(const Matrix& a, double rel_cut = 1e-15) {
  const int n = sites_for_dimension(a.rows());
  const Eigen::Index dim = a.rows();
  PauliOperator r(n);
  for (std::uint64_t x = 0; x < static_cast<std::uint64_t>(dim); ++x)
    for (std::uint64_t z = 0; z < static_cast<std::uint64_t>(dim); ++z) {
      const PauliKey k{x, z};
      cplx acc = 0.0;
      for (std::uint64_t c = 0; c < static_cast<std::uint64_t>(dim); ++c) {
        const double sign = (std::popcount(c & z) & 1) ? -1.0 : 1.0;
        acc += sign * a(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c ^ x));
      }
      acc *= i_power(std::popcount(x & z)) / static_cast<double>(dim);
      r.add(k, acc);
    }
  return r.prune(rel_cut);
}

/// Operator restricted to the sites in `mask`, relabelled to 0..|mask|-1 in increasing order.
inline Matrix local_dense(const PauliOperator& a, std::uint64_t mask) {
  const int w = std::popcount(mask);
  if (w > kDefaultDenseLimit) throw DimensionError("term support exceeds dense-block limit");
  std::vector<int> sites;
  for (std::uint64_t s = mask; s; s &= s - 1) sites.push_back(std::countr_zero(s));
  const auto compress = [&](std::uint64_t v) {
    std::uint64_t out = 0;
    for (std::size_t i = 0; i < sites.size(); ++i)
      if ((v >> sites[i]) & 1u) out |= std::uint64_t{1} << i;
    return out;
  };
  const Eigen::Index dim = Eigen::Index{1} << w;
  Matrix m = Matrix::Zero(dim, dim);
  for (const auto& [k, c] : a.terms()) {
    if ((k.support() & ~mask) != 0) throw DomainError("local_dense: term outside mask");
    accumulate_dense(m, PauliKey{compress(k.x), compress(k.z)}, c);
  }
  return m;
}

/// Terms grouped by exact support.
inline std::map<std::uint64_t, PauliOperator> group_by_support(const PauliOperator& a) {
  std::map<std::uint64_t, PauliOperator> groups;
  for (const auto& [k, c] : a.terms()) {
    auto it = groups.try_emplace(k.support(), a.n_sites()).first;
    it->second.add(k, c);
  }
  return groups;
}

/// Operator norm of an operator supported on a few sites: |coefficient| for one string,
/// dense spectral norm of the support block otherwise.
inline double local_norm(const PauliOperator& a) {
  if (a.is_zero()) return 0.0;
  if (a.size() == 1) return std::abs(a.terms().begin()->second);
  const Matrix m = local_dense(a, a.support());
  return a.is_hermitian() ? hermitian_norm(m) : spectral_norm(m);
}

/// Shorthand: pauli("XZ", {0, 3}) is X on site 0 times Z on site 3.
inline PauliString pauli(std::string_view letters, std::vector<int> sites, cplx c = 1.0) {
  return PauliString(std::move(sites), std::string(letters), c);
}

}  // namespace fml

#endif  // FML_PAULI_HPP
