#pragma once

// Observable canonical decomposition of the ensemble model.
//
// The state splits as x = U ξ_o + (I₂ ⊗ 1_N) ξ_ō, where ξ_o = (I₂ ⊗ V) x holds
// the relative clock states and ξ_ō = Ū x the (unobservable) ensemble mean.
// The basis is fixed by a row-full-rank W̄ (2 x 2N). The explicit ensemble
// mean (EEM) family W̄ = I₂ ⊗ qᵀ makes ξ_ō the q-weighted mean of the clocks
// and decouples it from ξ_o.

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "eem/models.hpp"

namespace eem {

/// V⁺ with V V⁺ = I_{N-1} and qᵀ V⁺ = 0.
///
/// Solves [V; qᵀ] V⁺ = [I; 0]. For the star measurement matrix the closed form
/// [I; 0] − 1_N 1ᵀ diag(q_1..q_{N-1}) is returned after cross-checking it
/// against the solve. Throws InvalidArgument if [V; qᵀ] is singular.
MatrixXd generalized_inverse(const MatrixXd& V, const EnsembleWeight& q);

enum class BasisKind { ensemble_mean, general };

struct Decomposition {
  BasisKind kind = BasisKind::ensemble_mean;
  std::optional<EnsembleWeight> weight;  // set for the EEM family
  std::size_t N = 0;
  double tau = 1.0;
  Eigen::Matrix2d A;
  Eigen::Vector2d B;
  MatrixXd V;
  MatrixXd Wbar;   // 2 x 2N
  MatrixXd Vplus;  // N x (N-1), EEM only
  MatrixXd U;      // 2N x 2(N-1)
  MatrixXd Ubar;   // 2 x 2N
  MatrixXd T;      // 2N x 2N
  MatrixXd Tinv;   // 2N x 2N
  MatrixXd Ao, Bo, Co;
  MatrixXd coupling;  // Ū bigA U, 2 x 2(N-1); exactly zero for EEM
  MatrixXd Qo;        // (I₂⊗V) bigQ (I₂⊗V)ᵀ
  MatrixXd Qbo;       // Ū bigQ (I₂⊗V)ᵀ
  MatrixXd Bo_in;     // (I₂⊗V) bigB = Bo V, maps u into ξ_o
  MatrixXd Bbo_in;    // Ū bigB, maps u into ξ_ō

  bool is_eem() const noexcept { return kind == BasisKind::ensemble_mean; }
  std::size_t observable_dim() const noexcept { return 2 * (N - 1); }
};

/// EEM basis W̄ = I₂ ⊗ qᵀ.
Decomposition decompose(const EnsembleModel& model, const EnsembleWeight& q);

/// General basis. Requires rank W̄ = 2, W̄(I₂⊗1_N) nonsingular and
/// [I₂⊗V; W̄] nonsingular (ker W̄ and the synchronized subspace span R^{2N}).
Decomposition decompose(const EnsembleModel& model, const MatrixXd& Wbar);

struct ProjectedState {
  VectorXd xi_o;           // 2(N-1)
  Eigen::Vector2d xi_obar;
};

ProjectedState project_state(const VectorXd& x, const Decomposition& d);

/// U ξ_o + (I₂ ⊗ 1_N) ξ_ō
VectorXd reconstruct_state(const VectorXd& xi_o, const Eigen::Vector2d& xi_obar,
                           const Decomposition& d);

/// u = V⁺ ω_o + 1_N ω_ō. EEM bases only (UnsupportedOperation otherwise).
VectorXd expand_input(const VectorXd& omega_o, double omega_obar, const Decomposition& d);

struct DecomposedInput {
  VectorXd omega_o;
  double omega_obar = 0.0;
};

/// Inverse of expand_input: ω_o = V u, ω_ō = qᵀ u. EEM bases only.
DecomposedInput decompose_input(const VectorXd& u, const Decomposition& d);

}  // namespace eem
