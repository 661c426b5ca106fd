#ifndef FML_DECOMPOSITION_HPP
#define FML_DECOMPOSITION_HPP

// Sequential decomposition U_F = exp(-i H0 T) U_N ... U_1 of the Floquet
// operator. Stage i (1-based position in the configured site order) peels off
// V_i, the driving terms whose first site in the order is the i-th one.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "fml/errors.hpp"
#include "fml/linalg.hpp"
#include "fml/magnus.hpp"
#include "fml/propagator.hpp"
#include "fml/report.hpp"
#include "fml/symmetry.hpp"
#include "fml/system.hpp"

namespace fml {

struct DecompositionOptions {
  PropagatorOptions prop;
};

/// Stage (1..N) a driving term belongs to.
inline int driving_stage(const DrivenSystem& sys, const DrivingTerm& d) {
  return sys.rank()[static_cast<std::size_t>(sys.first_site(d.string.key().support()))] + 1;
}

/// V_i alone (no H0), i = 1..N.
inline DrivenSystem driving_part(const DrivenSystem& sys, int i) {
  return sys.without_static().filter_driving([&](const DrivingTerm& d) { return driving_stage(sys, d) == i; });
}

/// H~_i = H0 + sum_{j > i} V_j, i = 0..N (H~_0 = H, H~_N = H0).
inline DrivenSystem tilde_system(const DrivenSystem& sys, int i) {
  if (i < 0 || i > sys.n_sites()) throw DomainError("tilde_system: stage out of range");
  return sys.filter_driving([&](const DrivingTerm& d) { return driving_stage(sys, d) > i; });
}

/// V_1 .. V_N as polynomials (index i - 1).
inline std::vector<PiecewisePoly<PauliOperator>> split_driving(const DrivenSystem& sys) {
  std::vector<PiecewisePoly<PauliOperator>> parts;
  for (int i = 1; i <= sys.n_sites(); ++i) parts.push_back(driving_part(sys, i).driving_poly());
  return parts;
}

struct DecompositionResult {
  std::vector<int> order;
  std::vector<PiecewisePoly<PauliOperator>> V_parts;
  std::vector<Matrix> U_parts;        // U_1 .. U_N
  std::vector<Matrix> U_tilde;        // U_{F,i}(T), i = 0..N
  std::vector<double> stage_tol;      // doubling difference of stage i (index i - 1)
  std::vector<long> stage_steps;
  std::vector<double> chain_error;    // ||U_{F,i-1}(T) - U_{F,i}(T) U_i||
  Matrix static_part;                 // exp(-i H0 T)
  double floquet_tol = 0.0;
  double reconstruction_error = 0.0;  // ||U_F - exp(-i H0 T) U_N ... U_1||
  double tolerance_budget = 0.0;      // floquet_tol + sum of stage tolerances
};

namespace detail {

/// Parity-only basis: translations do not survive the split.
inline std::shared_ptr<const BlockBasis> decomposition_basis(const DrivenSystem& sys, bool use_symmetry) {
  if (!use_symmetry || sys.n_sites() > 10) return BlockBasis::trivial(sys.n_sites());
  SymmetrySet s = detect_symmetries(sys.generators(), sys.n_sites());
  s.translation = false;
  return BlockBasis::build(sys.n_sites(), s);
}

struct StageRun {
  BlockOp u_tilde;  // U_{F,i}(T)
  BlockOp u_i;      // interaction-picture unitary
};

/// CF4 for H~_i, with the rotated V_i(t) integrated by CF4 at the same steps;
/// U_{F,i} at the CF4 nodes comes from partial CF4 steps.
inline StageRun run_stage(const PiecewisePoly<BlockOp>& ht, const PiecewisePoly<BlockOp>& v, const BlockOp& id,
                          const std::vector<double>& br, const std::vector<long>& w, long mult) {
  BlockOp u = id, ui = id;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const long n = w[k] * mult;
    const double a = br[k], dt = (br[k + 1] - a) / static_cast<double>(n);
    const auto& hseg = ht.segments()[ht.segment_index(0.5 * (a + br[k + 1]))];
    const auto& vseg = v.segments()[v.segment_index(0.5 * (a + br[k + 1]))];
    for (long j = 0; j < n; ++j) {
      const double t0 = a + static_cast<double>(j) * dt;
      const double t1 = t0 + cf4::kC1 * dt, t2 = t0 + cf4::kC2 * dt;
      const BlockOp u1 = cf4::step(hseg, t0, cf4::kC1 * dt) * u;
      const BlockOp u2 = cf4::step(hseg, t0, cf4::kC2 * dt) * u;
      const BlockOp w1 = u1.adjoint() * vseg.evaluate_unchecked(t1) * u1;
      const BlockOp w2 = u2.adjoint() * vseg.evaluate_unchecked(t2) * u2;
      ui = cf4::step_from_nodes(w1, w2, dt) * ui;
      u = cf4::step(hseg, t0, dt) * u;
    }
  }
  return {std::move(u), std::move(ui)};
}

inline Matrix ordered_product(const std::vector<Matrix>& us) {  // U_N ... U_1
  Matrix p = Matrix::Identity(us.front().rows(), us.front().cols());
  for (const auto& u : us) p = u * p;
  return p;
}

}  // namespace detail

/// U_1 .. U_N by interaction-picture integration, with the chain U_{F,i-1}(T) = U_{F,i}(T) U_i checked.
inline DecompositionResult interaction_unitaries(const DrivenSystem& sys, const DecompositionOptions& opt = {}) {
  const int n = sys.n_sites();
  if (n > 10) throw DimensionError("interaction_unitaries: more than 10 sites");
  DecompositionResult r;
  r.order = sys.order();
  r.V_parts = split_driving(sys);
  const auto basis = detail::decomposition_basis(sys, opt.prop.use_symmetry);
  const BlockOp id = BlockOp::identity(basis);
  const auto br = sys.breakpoints();
  const auto w = step_weights(br, sys.period(), opt.prop.initial_steps);
  long base = 0;
  for (long x : w) base += x;

  const auto uf = exact_floquet(sys, opt.prop);
  r.floquet_tol = uf.tol;
  r.U_tilde.assign(static_cast<std::size_t>(n) + 1, Matrix());
  r.U_tilde[0] = uf.matrix;
  r.U_parts.assign(static_cast<std::size_t>(n), Matrix());
  r.stage_tol.assign(static_cast<std::size_t>(n), 0.0);
  r.stage_steps.assign(static_cast<std::size_t>(n), 0);
  for (int i = 1; i <= n; ++i) {
    const auto ht = block_hamiltonian(tilde_system(sys, i), basis);
    const auto v = driving_part(sys, i).hamiltonian_poly().map([&](const PauliOperator& p) { return BlockOp::from_pauli(basis, p); });
    detail::StageRun prev = detail::run_stage(ht, v, id, br, w, 1);
    long mult = 1;
    double diff = 0.0;
    bool done = false;
    for (int d = 1; d <= opt.prop.max_doublings; ++d) {
      mult *= 2;
      detail::StageRun cur = detail::run_stage(ht, v, id, br, w, mult);
      diff = std::max((cur.u_i - prev.u_i).norm(), (cur.u_tilde - prev.u_tilde).norm());
      prev = std::move(cur);
      if (diff < opt.prop.tol) {
        done = true;
        break;
      }
    }
    if (!done)
      throw ConvergenceError("interaction_unitaries: stage " + std::to_string(i) + " did not converge (last difference " +
                             std::to_string(diff) + ")");
    r.U_parts[static_cast<std::size_t>(i - 1)] = prev.u_i.to_full();
    r.U_tilde[static_cast<std::size_t>(i)] = prev.u_tilde.to_full();
    r.stage_tol[static_cast<std::size_t>(i - 1)] = diff;
    r.stage_steps[static_cast<std::size_t>(i - 1)] = base * mult;
  }
  r.chain_error.resize(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i)
    r.chain_error[static_cast<std::size_t>(i - 1)] = spectral_norm(
        r.U_tilde[static_cast<std::size_t>(i - 1)] - r.U_tilde[static_cast<std::size_t>(i)] * r.U_parts[static_cast<std::size_t>(i - 1)]);
  r.static_part = expm_hermitian(to_dense(sys.h0(), n), sys.period());
  r.reconstruction_error = spectral_norm(uf.matrix - r.static_part * detail::ordered_product(r.U_parts));
  r.tolerance_budget = r.floquet_tol;
  for (double t : r.stage_tol) r.tolerance_budget += t;
  return r;
}

/// Same decomposition with H0 folded into the driving: U_F = U'_N ... U'_1 (times the phase of any identity part).
inline DecompositionResult primed_unitaries(const DrivenSystem& sys, const DecompositionOptions& opt = {}) {
  return interaction_unitaries(sys.folded(), opt);
}

/// ||U - 1_{traced} (x) W|| with W the normalised partial trace of U onto `keep`:
/// zero iff U acts trivially outside `keep`.
inline double support_defect(const Matrix& u, const std::vector<int>& keep) {
  const int n = sites_for_dimension(u.rows());
  const Matrix w = partial_trace_operator(u, keep) / std::pow(2.0, n - static_cast<int>(keep.size()));
  std::uint64_t keep_mask = 0;
  for (int s : keep) keep_mask |= std::uint64_t{1} << s;
  Matrix emb = Matrix::Zero(u.rows(), u.cols());
  for (Eigen::Index r = 0; r < u.rows(); ++r)
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
      const auto rr = static_cast<std::uint64_t>(r), cc = static_cast<std::uint64_t>(c);
      if ((rr & ~keep_mask) != (cc & ~keep_mask)) continue;
      std::uint64_t ri = 0, ci = 0;
      for (std::size_t j = 0; j < keep.size(); ++j) {
        ri |= ((rr >> keep[j]) & 1u) << j;
        ci |= ((cc >> keep[j]) & 1u) << j;
      }
      emb(r, c) = w(static_cast<Eigen::Index>(ri), static_cast<Eigen::Index>(ci));
    }
  return spectral_norm(u - emb);
}

struct TruncatedDecomposition {
  int n0 = 0;
  std::vector<Matrix> H_tilde;      // H~_i^(n0), i = 0..N
  std::vector<Matrix> V_parts;      // V_i^(n0) = H~_{i-1}^(n0) - H~_i^(n0)
  std::vector<Matrix> U_parts;      // U_i^(n0) = exp(i H~_i T) exp(-i H~_{i-1} T)
  double reconstruction_error = 0;  // ||exp(-i H_F^(n0) T) - exp(-i H0 T) U_N^(n0) ... U_1^(n0)||
  double telescoping_error = 0;     // ||sum_i V_i^(n0) - (H_F^(n0) - H0)||
};

/// Truncated counterparts built from the FM series of every H~_i.
inline TruncatedDecomposition truncated_unitaries(const DrivenSystem& sys, int n0, const MagnusOptions& mopt = {}) {
  const int n = sys.n_sites();
  if (n > 10) throw DimensionError("truncated_unitaries: more than 10 sites");
  if (n0 < 0) throw DomainError("truncated_unitaries: negative order");
  TruncatedDecomposition r;
  r.n0 = n0;
  const double T = sys.period();
  for (int i = 0; i <= n; ++i) r.H_tilde.push_back(truncate(omega_series(tilde_system(sys, i), n0, mopt), n0).full());
  std::vector<Matrix> ex;
  for (const auto& h : r.H_tilde) ex.push_back(expm_hermitian(h, T));
  const Matrix h0 = to_dense(sys.h0(), n);
  Matrix vsum = Matrix::Zero(h0.rows(), h0.cols());
  for (int i = 1; i <= n; ++i) {
    r.V_parts.push_back(r.H_tilde[static_cast<std::size_t>(i - 1)] - r.H_tilde[static_cast<std::size_t>(i)]);
    vsum += r.V_parts.back();
    r.U_parts.push_back(ex[static_cast<std::size_t>(i)].adjoint() * ex[static_cast<std::size_t>(i - 1)]);
  }
  r.telescoping_error = spectral_norm(vsum - (r.H_tilde.front() - h0));
  r.reconstruction_error =
      spectral_norm(ex.front() - expm_hermitian(h0, T) * detail::ordered_product(r.U_parts));
  return r;
}

/// ||U_i - U_i^(n0)|| <= 6 V_i T 2^-n0 for every stage.
inline std::vector<BoundReport> lemma2_check(const DrivenSystem& sys, int n0, const DecompositionResult& exact,
                                             const TruncatedDecomposition& trunc) {
  const auto m = locality_metrics(sys);
  const double T = sys.period();
  const bool applicable = T <= 1.0 / (4.0 * m.lambda) && n0 <= optimal_order_n0(m, T);
  std::vector<BoundReport> out;
  for (int i = 1; i <= sys.n_sites(); ++i) {
    const int site = sys.order()[static_cast<std::size_t>(i - 1)];
    BoundReport b;
    b.name = "lemma2";
    b.lhs = spectral_norm(exact.U_parts[static_cast<std::size_t>(i - 1)] - trunc.U_parts[static_cast<std::size_t>(i - 1)]);
    const double vi = m.Vi[static_cast<std::size_t>(site)];
    b.rhs = 6.0 * vi * T * std::pow(2.0, -n0);
    // integrator error of this stage and of the stage feeding it
    b.budget = 10.0 * (exact.stage_tol[static_cast<std::size_t>(i - 1)] + exact.floquet_tol) + 1e-12;
    b.set("i", i);
    b.set("site", site);
    b.set("n0", n0);
    b.set("T", T);
    b.set("lambda", m.lambda);
    b.set("V_i", vi);
    if (applicable)
      b.judge();
    else
      b.not_applicable();
    out.push_back(std::move(b));
  }
  return out;
}

inline std::vector<BoundReport> lemma2_check(const DrivenSystem& sys, int n0, const DecompositionOptions& opt = {}) {
  MagnusOptions mo;
  mo.use_symmetry = opt.prop.use_symmetry;
  return lemma2_check(sys, n0, interaction_unitaries(sys, opt), truncated_unitaries(sys, n0, mo));
}

}  // namespace fml

#endif  // FML_DECOMPOSITION_HPP
