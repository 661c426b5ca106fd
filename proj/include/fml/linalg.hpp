#ifndef FML_LINALG_HPP
#define FML_LINALG_HPP

// Dense complex linear algebra shared by every module: norms, Hermitian
// exponentials, partial traces and state evolution. Basis convention: bit i of
// a computational-basis index is the state of site i.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fml/errors.hpp"

namespace fml {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr cplx kI{0.0, 1.0};

/// Largest singular value.
inline double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() <= 16) {
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
  }
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

/// Sum of singular values.
inline double trace_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues().sum();
}

/// Spectral norm of a matrix known to be Hermitian (largest |eigenvalue|).
inline double hermitian_norm(const Matrix& h) {
  if (h.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

/// ||a - a^dagger|| in the max-entry sense, relative to max(1, max |a_ij|).
inline double hermiticity_defect(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.adjoint()).cwiseAbs().maxCoeff() / scale;
}

inline bool is_hermitian(const Matrix& a, double tol = 1e-12) {
  return a.rows() == a.cols() && hermiticity_defect(a) <= tol;
}

/// exp(-i H t) through the eigendecomposition of the Hermitian matrix H.
inline Matrix expm_hermitian(const Matrix& h, double t) {
  if (h.rows() != h.cols()) throw DomainError("expm_hermitian: matrix is not square");
  if (!is_hermitian(h, 1e-12)) throw DomainError("expm_hermitian: matrix is not Hermitian");
  const Matrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const auto& ev = es.eigenvalues();
  Vector phases(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) phases(i) = std::exp(-kI * ev(i) * t);
  const Matrix& v = es.eigenvectors();
  return v * phases.asDiagonal() * v.adjoint();
}

/// exp(x H) for Hermitian H and real x (a positive-definite similarity factor).
inline Matrix expm_real_hermitian(const Matrix& h, double x) {
  const Matrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const auto& ev = es.eigenvalues();
  Vector f(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) f(i) = std::exp(x * ev(i));
  const Matrix& v = es.eigenvectors();
  return v * f.asDiagonal() * v.adjoint();
}

inline int sites_for_dimension(Eigen::Index dim) {
  if (dim <= 0 || (dim & (dim - 1)) != 0) throw DimensionError("dimension is not a power of two");
  return std::countr_zero(static_cast<std::uint64_t>(dim));
}

namespace detail {

inline std::uint64_t deposit_bits(std::uint64_t value, std::span<const int> positions) {
  std::uint64_t out = 0;
  for (std::size_t k = 0; k < positions.size(); ++k)
    if ((value >> k) & 1u) out |= std::uint64_t{1} << positions[k];
  return out;
}

}  // namespace detail

/// tr over all sites not in `keep`; output basis orders the kept sites by their
/// position in `keep` (bit k of the reduced index is site keep[k]).
inline Matrix partial_trace_operator(const Matrix& a, std::span<const int> keep) {
  const int n = sites_for_dimension(a.rows());
  std::vector<int> traced;
  std::uint64_t keep_mask = 0;
  for (int s : keep) {
    if (s < 0 || s >= n) throw DomainError("partial_trace: site index out of range");
    if ((keep_mask >> s) & 1u) throw DomainError("partial_trace: repeated site");
    keep_mask |= std::uint64_t{1} << s;
  }
  for (int s = 0; s < n; ++s)
    if (!((keep_mask >> s) & 1u)) traced.push_back(s);
  const std::uint64_t dk = std::uint64_t{1} << keep.size();
  const std::uint64_t dt = std::uint64_t{1} << traced.size();
  std::vector<std::uint64_t> kept_index(dk), traced_index(dt);
  for (std::uint64_t i = 0; i < dk; ++i) kept_index[i] = detail::deposit_bits(i, keep);
  for (std::uint64_t e = 0; e < dt; ++e) traced_index[e] = detail::deposit_bits(e, traced);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
  for (std::uint64_t c = 0; c < dk; ++c)
    for (std::uint64_t r = 0; r < dk; ++r) {
      cplx acc = 0.0;
      for (std::uint64_t e = 0; e < dt; ++e)
        acc += a(static_cast<Eigen::Index>(kept_index[r] | traced_index[e]),
                 static_cast<Eigen::Index>(kept_index[c] | traced_index[e]));
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = acc;
    }
  return out;
}

/// Throws DomainError unless rho is a density matrix: Hermitian, unit trace
/// within 1e-10 and minimum eigenvalue >= -1e-10.
inline void validate_density_matrix(const Matrix& rho) {
  if (rho.rows() != rho.cols()) throw DomainError("density matrix is not square");
  if (!is_hermitian(rho, 1e-10)) throw DomainError("density matrix is not Hermitian");
  if (std::abs(rho.trace() - cplx{1.0, 0.0}) > 1e-10) throw DomainError("density matrix trace differs from 1");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) < -1e-10) throw DomainError("density matrix is not positive semidefinite");
}

/// Reduced density matrix on `keep`; rho is validated first.
inline Matrix partial_trace(const Matrix& rho, std::span<const int> keep) {
  validate_density_matrix(rho);
  return partial_trace_operator(rho, keep);
}

/// U^m |psi>.
inline Vector evolve(const Vector& psi, const Matrix& u, long m) {
  if (u.cols() != psi.size()) throw DimensionError("evolve: dimension mismatch");
  Vector out = psi;
  Vector tmp(psi.size());
  for (long k = 0; k < m; ++k) {
    tmp.noalias() = u * out;
    out.swap(tmp);
  }
  return out;
}

/// U^m rho U^{dagger m}.
inline Matrix evolve(const Matrix& rho, const Matrix& u, long m) {
  if (u.cols() != rho.rows()) throw DimensionError("evolve: dimension mismatch");
  Matrix out = rho;
  for (long k = 0; k < m; ++k) out = u * out * u.adjoint();
  return out;
}

/// U^m by repeated squaring.
inline Matrix matrix_power(const Matrix& u, long m) {
  Matrix result = Matrix::Identity(u.rows(), u.cols());
  Matrix base = u;
  while (m > 0) {
    if (m & 1) result = result * base;
    m >>= 1;
    if (m > 0) base = base * base;
  }
  return result;
}

}  // namespace fml

#endif  // FML_LINALG_HPP
