#ifndef FML_SYMMETRY_HPP
#define FML_SYMMETRY_HPP

// Block-diagonal dense operators. A BlockBasis is an orthonormal basis adapted
// to the abelian symmetries shared by a set of Pauli operators: global Z parity,
// global X parity (even site counts) and cyclic translation. Every operator in
// the generated algebra is block diagonal in it.

#include <array>
#include <bit>
#include <map>
#include <mutex>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "fml/errors.hpp"
#include "fml/linalg.hpp"
#include "fml/pauli.hpp"
#include "fml/time_poly.hpp"

namespace fml {

struct SymmetrySet {
  bool z_parity = false;
  bool x_parity = false;
  bool translation = false;
};

inline std::uint64_t rotate_sites(std::uint64_t mask, int n) {
  const std::uint64_t full = n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
  return ((mask << 1) | (mask >> (n - 1))) & full;
}

inline PauliOperator translate(const PauliOperator& a) {
  PauliOperator r(a.n_sites());
  for (const auto& [k, c] : a.terms())
    r.add(PauliKey{rotate_sites(k.x, a.n_sites()), rotate_sites(k.z, a.n_sites())}, c);
  return r;
}

/// Symmetries shared by every operator in the list.
inline SymmetrySet detect_symmetries(const std::vector<PauliOperator>& ops, int n_sites) {
  SymmetrySet s{true, n_sites % 2 == 0 && n_sites > 0, n_sites >= 3};
  for (const auto& op : ops) {
    for (const auto& [k, c] : op.terms()) {
      if (std::popcount(k.x) & 1) s.z_parity = false;
      if (std::popcount(k.z) & 1) s.x_parity = false;
    }
    if (s.translation && translate(op).distance(op) > 1e-14 * std::max(1.0, op.max_abs_coefficient()))
      s.translation = false;
  }
  return s;
}

class BlockBasis {
 public:
  /// One block, identity basis.
  static std::shared_ptr<const BlockBasis> trivial(int n_sites) {
    return cached(n_sites, SymmetrySet{}, [&] { return make_trivial(n_sites); });
  }

  /// Basis adapted to `sym`; falls back to the trivial basis when no symmetry is active.
  /// Bases are cached, so equal requests share one instance.
  static std::shared_ptr<const BlockBasis> build(int n_sites, SymmetrySet sym) {
    if (!sym.z_parity && !sym.x_parity && !sym.translation) return trivial(n_sites);
    if (n_sites > 14) throw DimensionError("BlockBasis: too many sites");
    return cached(n_sites, sym, [&] {
      auto b = std::shared_ptr<BlockBasis>(new BlockBasis());
      b->n_sites_ = n_sites;
      b->dim_ = Eigen::Index{1} << n_sites;
      b->sym_ = sym;
      b->construct();
      return std::shared_ptr<const BlockBasis>(std::move(b));
    });
  }

 private:
  template <class Make>
  static std::shared_ptr<const BlockBasis> cached(int n_sites, SymmetrySet sym, Make&& make) {
    static std::mutex mu;
    static std::map<std::array<int, 4>, std::shared_ptr<const BlockBasis>> cache;
    const std::array<int, 4> key{n_sites, sym.z_parity, sym.x_parity, sym.translation};
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto b = make();
    cache.emplace(key, b);
    return b;
  }

  static std::shared_ptr<const BlockBasis> make_trivial(int n_sites) {
    auto b = std::shared_ptr<BlockBasis>(new BlockBasis());
    b->n_sites_ = n_sites;
    b->dim_ = Eigen::Index{1} << n_sites;
    b->trivial_ = true;
    b->sizes_ = {b->dim_};
    b->labels_ = {"all"};
    return b;
  }

 public:

  /// Basis adapted to the common symmetries of `ops`.
  static std::shared_ptr<const BlockBasis> for_operators(const std::vector<PauliOperator>& ops, int n_sites,
                                                         bool use_symmetry = true) {
    if (!use_symmetry || n_sites > 10) return trivial(n_sites);
    return build(n_sites, detect_symmetries(ops, n_sites));
  }

  int n_sites() const { return n_sites_; }
  Eigen::Index dim() const { return dim_; }
  bool is_trivial() const { return trivial_; }
  std::size_t num_blocks() const { return sizes_.size(); }
  Eigen::Index block_size(std::size_t b) const { return sizes_[b]; }
  const std::string& label(std::size_t b) const { return labels_[b]; }
  SymmetrySet symmetries() const { return sym_; }
  /// dim x block_size isometry of block b (empty for the trivial basis).
  const Matrix& isometry(std::size_t b) const { return q_[b]; }

 private:
  BlockBasis() = default;

  void construct() {
    const int n = n_sites_;
    const std::uint64_t dim = static_cast<std::uint64_t>(dim_);
    const std::uint64_t all = dim - 1;
    const int nt = sym_.translation ? n : 1;
    const int nz = sym_.z_parity ? 2 : 1;
    const int nx = sym_.x_parity ? 2 : 1;
    const double group_order = static_cast<double>(nt * nz * nx);

    // orbit representatives: smallest index in the orbit
    std::vector<bool> seen(dim, false);
    std::vector<std::uint64_t> reps;
    for (std::uint64_t c = 0; c < dim; ++c) {
      if (seen[c]) continue;
      reps.push_back(c);
      for (int xb = 0; xb < nx; ++xb) {
        std::uint64_t v = xb ? (c ^ all) : c;
        for (int j = 0; j < nt; ++j) {
          seen[v] = true;
          v = rotate_sites(v, n);
        }
      }
    }

    for (int k = 0; k < nt; ++k)
      for (int pz = 0; pz < nz; ++pz)
        for (int px = 0; px < nx; ++px) {
          std::vector<Vector> cols;
          for (std::uint64_t c : reps) {
            Vector v = Vector::Zero(dim_);
            // P = (1/|G|) sum_g conj(chi(g)) U(g),  U(g) = T^j X^xb Z^zb
            for (int zb = 0; zb < nz; ++zb) {
              const double zsign = (zb && (std::popcount(c) & 1)) ? -1.0 : 1.0;
              const double zchar = (zb && pz) ? -1.0 : 1.0;
              for (int xb = 0; xb < nx; ++xb) {
                const double xchar = (xb && px) ? -1.0 : 1.0;
                std::uint64_t w = xb ? (c ^ all) : c;
                for (int j = 0; j < nt; ++j) {
                  const double ang = -2.0 * std::numbers::pi * k * j / nt;
                  v(static_cast<Eigen::Index>(w)) += zsign * zchar * xchar * std::polar(1.0, ang);
                  w = rotate_sites(w, n);
                }
              }
            }
            v /= group_order;
            const double nv = v.norm();
            if (nv > 1e-8) cols.push_back(v / nv);
          }
          if (cols.empty()) continue;
          Matrix q(dim_, static_cast<Eigen::Index>(cols.size()));
          for (std::size_t i = 0; i < cols.size(); ++i) q.col(static_cast<Eigen::Index>(i)) = cols[i];
          q_.push_back(std::move(q));
          sizes_.push_back(static_cast<Eigen::Index>(cols.size()));
          std::string lab;
          if (sym_.translation) lab += "k=" + std::to_string(k);
          if (sym_.z_parity) lab += std::string(lab.empty() ? "" : ",") + "pz=" + (pz ? "-" : "+");
          if (sym_.x_parity) lab += std::string(lab.empty() ? "" : ",") + "px=" + (px ? "-" : "+");
          labels_.push_back(lab);
        }
    Eigen::Index total = 0;
    for (auto s : sizes_) total += s;
    if (total != dim_) throw ConvergenceError("BlockBasis: symmetry sectors do not span the space");
  }

  int n_sites_ = 0;
  Eigen::Index dim_ = 1;
  bool trivial_ = false;
  SymmetrySet sym_{};
  std::vector<Matrix> q_;
  std::vector<Eigen::Index> sizes_;
  std::vector<std::string> labels_;
};

/// Operator stored as its diagonal blocks in a BlockBasis.
class BlockOp {
 public:
  BlockOp() = default;
  explicit BlockOp(std::shared_ptr<const BlockBasis> basis) : basis_(std::move(basis)) {
    blocks_.reserve(basis_->num_blocks());
    for (std::size_t b = 0; b < basis_->num_blocks(); ++b)
      blocks_.push_back(Matrix::Zero(basis_->block_size(b), basis_->block_size(b)));
  }
  BlockOp(std::shared_ptr<const BlockBasis> basis, std::vector<Matrix> blocks)
      : basis_(std::move(basis)), blocks_(std::move(blocks)) {}

  static BlockOp identity(std::shared_ptr<const BlockBasis> basis) {
    BlockOp r(basis);
    for (auto& m : r.blocks_) m.setIdentity();
    return r;
  }

  /// Projects a full matrix onto the blocks. With `check`, throws if the
  /// off-block part is not negligible.
  static BlockOp from_full(std::shared_ptr<const BlockBasis> basis, const Matrix& full, bool check = false) {
    if (full.rows() != basis->dim()) throw DimensionError("BlockOp: dimension mismatch");
    if (basis->is_trivial()) return BlockOp(basis, {full});
    std::vector<Matrix> blocks;
    blocks.reserve(basis->num_blocks());
    double captured = 0.0;
    for (std::size_t b = 0; b < basis->num_blocks(); ++b) {
      const Matrix& q = basis->isometry(b);
      blocks.push_back(q.adjoint() * full * q);
      captured += blocks.back().squaredNorm();
    }
    if (check) {
      const double total = full.squaredNorm();
      if (total - captured > 1e-24 + 1e-12 * total)
        throw DomainError("BlockOp: operator is not block diagonal in this basis");
    }
    return BlockOp(basis, std::move(blocks));
  }

  static BlockOp from_pauli(std::shared_ptr<const BlockBasis> basis, const PauliOperator& a) {
    return from_full(basis, to_dense(a, basis->n_sites()));
  }

  const std::shared_ptr<const BlockBasis>& basis() const { return basis_; }
  const std::vector<Matrix>& blocks() const { return blocks_; }
  std::vector<Matrix>& blocks() { return blocks_; }
  std::size_t num_blocks() const { return blocks_.size(); }

  Matrix to_full() const {
    if (basis_->is_trivial()) return blocks_.front();
    Matrix full = Matrix::Zero(basis_->dim(), basis_->dim());
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const Matrix& q = basis_->isometry(b);
      full.noalias() += q * blocks_[b] * q.adjoint();
    }
    return full;
  }

  BlockOp& operator+=(const BlockOp& o) {
    check(o);
    for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b] += o.blocks_[b];
    return *this;
  }
  BlockOp& operator-=(const BlockOp& o) {
    check(o);
    for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b] -= o.blocks_[b];
    return *this;
  }
  BlockOp& operator*=(cplx s) {
    for (auto& m : blocks_) m *= s;
    return *this;
  }
  friend BlockOp operator+(BlockOp a, const BlockOp& b) { return a += b; }
  friend BlockOp operator-(BlockOp a, const BlockOp& b) { return a -= b; }
  friend BlockOp operator*(BlockOp a, cplx s) { return a *= s; }
  friend BlockOp operator*(cplx s, BlockOp a) { return a *= s; }
  friend BlockOp operator*(const BlockOp& a, const BlockOp& b) {
    a.check(b);
    BlockOp r(a.basis_, {});
    r.blocks_.reserve(a.blocks_.size());
    for (std::size_t k = 0; k < a.blocks_.size(); ++k) r.blocks_.push_back(a.blocks_[k] * b.blocks_[k]);
    return r;
  }

  BlockOp adjoint() const {
    BlockOp r(basis_, {});
    for (const auto& m : blocks_) r.blocks_.push_back(m.adjoint());
    return r;
  }

  /// Spectral norm (max over blocks).
  double norm() const {
    double n = 0.0;
    for (const auto& m : blocks_) n = std::max(n, spectral_norm(m));
    return n;
  }
  /// Spectral norm of a Hermitian operator.
  double hermitian_norm() const {
    double n = 0.0;
    for (const auto& m : blocks_) n = std::max(n, fml::hermitian_norm(m));
    return n;
  }
  double hermiticity_defect() const {
    double d = 0.0;
    for (const auto& m : blocks_) d = std::max(d, (m - m.adjoint()).cwiseAbs().maxCoeff());
    return d;
  }
  double max_abs() const {
    double d = 0.0;
    for (const auto& m : blocks_)
      if (m.size() > 0) d = std::max(d, m.cwiseAbs().maxCoeff());
    return d;
  }

  void check(const BlockOp& o) const {
    if (o.basis_ != basis_) throw UniverseMismatch("BlockOp: operators use different bases");
  }

 private:
  std::shared_ptr<const BlockBasis> basis_;
  std::vector<Matrix> blocks_;
};

inline BlockOp zero_like(const BlockOp& a) { return BlockOp(a.basis()); }
inline bool is_exact_zero(const BlockOp& a) { return a.max_abs() == 0.0; }
inline void add_scaled(BlockOp& acc, const BlockOp& x, cplx s) {
  acc.check(x);
  for (std::size_t b = 0; b < acc.num_blocks(); ++b) acc.blocks()[b] += s * x.blocks()[b];
}
inline void add_commutator(BlockOp& acc, const BlockOp& a, const BlockOp& b, cplx s) {
  acc.check(a);
  a.check(b);
  for (std::size_t k = 0; k < acc.num_blocks(); ++k) {
    acc.blocks()[k].noalias() += s * a.blocks()[k] * b.blocks()[k];
    acc.blocks()[k].noalias() -= s * b.blocks()[k] * a.blocks()[k];
  }
}
inline void scale_in_place(BlockOp& a, cplx s) { a *= s; }
inline BlockOp commutator(const BlockOp& a, const BlockOp& b) {
  BlockOp r(a.basis());
  add_commutator(r, a, b, 1.0);
  return r;
}

/// exp(-i H t) blockwise for Hermitian H.
inline BlockOp expm_hermitian(const BlockOp& h, double t) {
  BlockOp r(h.basis(), {});
  for (const auto& m : h.blocks()) r.blocks().push_back(expm_hermitian(m, t));
  return r;
}

}  // namespace fml

#endif  // FML_SYMMETRY_HPP
