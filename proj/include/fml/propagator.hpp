#ifndef FML_PROPAGATOR_HPP
#define FML_PROPAGATOR_HPP

// Time-ordered evolution of a driven system with a fourth-order commutator-free
// scheme, refined by step doubling.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "fml/errors.hpp"
#include "fml/linalg.hpp"
#include "fml/symmetry.hpp"
#include "fml/system.hpp"
#include "fml/time_poly.hpp"

namespace fml {

struct PropagatorOptions {
  double tol = 1e-11;
  int initial_steps = 4;  // per period, spread over the segments by length
  int max_doublings = 18;
  bool use_symmetry = true;
};

struct UnitaryResult {
  Matrix matrix;
  double tol = 0.0;   // spectral-norm difference of the last two refinements
  long steps = 0;     // CF4 steps in the returned result
  BlockOp blocks;     // same operator in the symmetry-adapted basis
};

namespace cf4 {

inline const double kSqrt3over6 = std::sqrt(3.0) / 6.0;
inline const double kA1 = 0.25 - kSqrt3over6;  // weight of the later node in the first exponential
inline const double kA2 = 0.25 + kSqrt3over6;
inline const double kC1 = 0.5 - kSqrt3over6;
inline const double kC2 = 0.5 + kSqrt3over6;

/// One step exp(-i h (a1 H1 + a2 H2)) exp(-i h (a2 H1 + a1 H2)), H_j = H(t0 + c_j h).
template <class Op>
Op step_from_nodes(const Op& h1, const Op& h2, double dt) {
  Op first = h1;
  first *= kA2;
  add_scaled(first, h2, kA1);
  Op second = h1;
  second *= kA1;
  add_scaled(second, h2, kA2);
  return expm_hermitian(second, dt) * expm_hermitian(first, dt);
}

template <class Op>
Op step(const TimePoly<Op>& seg, double t0, double dt) {
  return step_from_nodes(seg.evaluate_unchecked(t0 + kC1 * dt), seg.evaluate_unchecked(t0 + kC2 * dt), dt);
}

}  // namespace cf4

/// Number of steps per segment for a base count n over (lo, t_end].
inline std::vector<long> step_weights(const std::vector<double>& breaks, double t_end, long n) {
  std::vector<long> w;
  const double len = t_end - breaks.front();
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k], b = std::min(breaks[k + 1], t_end);
    if (b <= a) {
      w.push_back(0);
      continue;
    }
    w.push_back(std::max(1L, std::lround(static_cast<double>(n) * (b - a) / len)));
  }
  return w;
}

/// Product of CF4 steps from the start of h up to t_end; `weights` from step_weights, scaled by `mult`.
template <class Op>
Op cf4_product(const PiecewisePoly<Op>& h, const Op& identity, double t_end, const std::vector<long>& weights, long mult) {
  Op u = identity;
  const auto& br = h.breakpoints();
  for (std::size_t k = 0; k < h.num_segments(); ++k) {
    if (weights[k] == 0) continue;
    const double a = br[k], b = std::min(br[k + 1], t_end);
    const long n = weights[k] * mult;
    const double dt = (b - a) / static_cast<double>(n);
    const auto& seg = h.segments()[k];
    for (long j = 0; j < n; ++j) u = cf4::step(seg, a + static_cast<double>(j) * dt, dt) * u;
  }
  return u;
}

/// Doubles the step count of run(mult) until successive results agree within tol.
template <class Run>
std::pair<BlockOp, std::pair<double, long>> converge_by_doubling(Run&& run, long base_steps, const PropagatorOptions& opt,
                                                                 const std::string& what) {
  BlockOp prev = run(1L);
  double diff = 0.0;
  long mult = 1;
  for (int d = 1; d <= opt.max_doublings; ++d) {
    mult *= 2;
    BlockOp cur = run(mult);
    diff = (cur - prev).norm();
    if (diff < opt.tol) return {std::move(cur), {diff, base_steps * mult}};
    prev = std::move(cur);
  }
  throw ConvergenceError(what + ": no convergence to " + std::to_string(opt.tol) + " after " +
                         std::to_string(opt.max_doublings) + " doublings (last difference " + std::to_string(diff) + ")");
}

/// Basis in which every H(t) is block diagonal (translations included when they hold).
inline std::shared_ptr<const BlockBasis> propagation_basis(const DrivenSystem& sys, bool use_symmetry) {
  return BlockBasis::for_operators(sys.generators(), sys.n_sites(), use_symmetry);
}

inline PiecewisePoly<BlockOp> block_hamiltonian(const DrivenSystem& sys, const std::shared_ptr<const BlockBasis>& basis) {
  return sys.hamiltonian_poly().map([&](const PauliOperator& p) { return BlockOp::from_pauli(basis, p); });
}

/// U(t) = T exp(-i int_0^t H) for t in (0, T].
inline UnitaryResult propagate(const DrivenSystem& sys, double t, const PropagatorOptions& opt = {}) {
  sys.check_time(t);
  if (sys.n_sites() > 12) throw DimensionError("propagate: more than 12 sites");
  if (!(opt.tol >= 1e-13)) throw DomainError("propagate: tol must be at least 1e-13");
  const auto basis = propagation_basis(sys, opt.use_symmetry);
  const auto h = block_hamiltonian(sys, basis);
  const auto w = step_weights(h.breakpoints(), t, opt.initial_steps);
  long base = 0;
  for (long x : w) base += x;
  const BlockOp id = BlockOp::identity(basis);
  auto [u, info] = converge_by_doubling([&](long mult) { return cf4_product(h, id, t, w, mult); }, base, opt, "propagate");
  UnitaryResult r;
  r.matrix = u.to_full();
  r.tol = info.first;
  r.steps = info.second;
  r.blocks = std::move(u);
  return r;
}

/// The one-period Floquet operator U_F = exp(-i H_F T).
inline UnitaryResult exact_floquet(const DrivenSystem& sys, const PropagatorOptions& opt = {}) {
  return propagate(sys, sys.period(), opt);
}
inline UnitaryResult exact_floquet(const DrivenSystem& sys, double tol) {
  PropagatorOptions opt;
  opt.tol = tol;
  return exact_floquet(sys, opt);
}

/// CF4 one-period operator with a fixed number of steps (no refinement).
inline Matrix floquet_fixed_steps(const DrivenSystem& sys, long steps, bool use_symmetry = true) {
  const auto basis = propagation_basis(sys, use_symmetry);
  const auto h = block_hamiltonian(sys, basis);
  const auto w = step_weights(h.breakpoints(), sys.period(), steps);
  return cf4_product(h, BlockOp::identity(basis), sys.period(), w, 1).to_full();
}

/// ||U(n) - U(2n)|| / ||U(2n) - U(4n)|| with n chosen so that ||U(n) - U(2n)|| first drops below `target`.
inline double richardson_ratio(const DrivenSystem& sys, double target = 1e-5) {
  const auto basis = propagation_basis(sys, true);
  const auto h = block_hamiltonian(sys, basis);
  const auto w = step_weights(h.breakpoints(), sys.period(), 1);
  const BlockOp id = BlockOp::identity(basis);
  auto run = [&](long mult) { return cf4_product(h, id, sys.period(), w, mult); };
  long mult = 1;
  BlockOp a = run(mult), b = run(2 * mult);
  double d1 = (a - b).norm();
  for (int guard = 0; d1 >= target; ++guard) {
    if (guard > 20) throw ConvergenceError("richardson_ratio: step refinement did not reach the target");
    mult *= 2;
    a = std::move(b);
    b = run(2 * mult);
    d1 = (a - b).norm();
  }
  const BlockOp c = run(4 * mult);
  return d1 / (b - c).norm();
}

}  // namespace fml

#endif  // FML_PROPAGATOR_HPP
