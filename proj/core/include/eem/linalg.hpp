#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace eem {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Kronecker product a ⊗ b.
MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

/// Column vector of ones.
VectorXd ones(std::size_t n);

/// I_2 ⊗ m, the block-diagonal lift used for phase/frequency stacked states.
MatrixXd lift2(const MatrixXd& m);

/// Numerical rank: singular values above max_dim * eps * sigma_max.
std::size_t numerical_rank(const MatrixXd& m);

/// Largest eigenvalue magnitude.
double spectral_radius(const MatrixXd& m);

/// (m + mᵀ) / 2
inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Lower-triangular L with L Lᵀ = m for a symmetric positive semidefinite m.
///
/// Plain Cholesky when m is positive definite. Pivots that vanish (relative to
/// the largest diagonal entry) produce zero columns, which is exact for PSD
/// matrices such as the process covariance of a clock with sigma2 = 0.
/// Throws NumericalError if m has a clearly negative pivot.
MatrixXd psd_cholesky(const MatrixXd& m);

/// True when m is symmetric (to relative tol) and Cholesky succeeds.
bool is_symmetric_positive_definite(const MatrixXd& m, double tol = 1e-12);

/// Relative Frobenius distance ‖a − b‖ / max(‖a‖, tiny).
double relative_difference(const MatrixXd& a, const MatrixXd& b);

}  // namespace eem
