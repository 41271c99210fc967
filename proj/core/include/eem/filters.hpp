#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>

#include <Eigen/Dense>

#include "eem/decomp.hpp"
#include "eem/models.hpp"
#include "eem/simkit.hpp"

namespace eem {

// ---------------------------------------------------------------------------
// Standard full-state Kalman filter on the ensemble model.
//
// The unobservable block of P grows without bound; the gain H still converges
// because bigC annihilates the synchronized subspace.
// ---------------------------------------------------------------------------

struct StandardKFState {
  VectorXd xhat_minus;
  VectorXd xhat;
  MatrixXd P_minus;
  MatrixXd P;
  MatrixXd H;
  std::size_t steps = 0;
};

/// Zero estimate and zero posterior covariance at k = -1, so that the first
/// prior covariance equals bigQ.
StandardKFState standard_kf_init(const EnsembleModel& model);

/// Predict with u_prev, then update with y.
StandardKFState standard_kf_step(const EnsembleModel& model, const StandardKFState& state,
                                 const VectorXd& u_prev, const VectorXd& y);

// ---------------------------------------------------------------------------
// Decomposed filters. Estimates are carried in the decomposition's basis.
// ---------------------------------------------------------------------------

struct DecomposedEstimate {
  VectorXd xi_o_prior;
  Eigen::Vector2d xi_obar_prior = Eigen::Vector2d::Zero();
  VectorXd xi_o;
  Eigen::Vector2d xi_obar = Eigen::Vector2d::Zero();
};

/// Time update of the estimate: ξ⁻[k] = Ã ξ[k-1] + B̃ u[k-1].
void predict_estimate(const Decomposition& d, DecomposedEstimate& est, const VectorXd& u_prev);

/// Determinate filter. The ōō covariance block never appears.
struct DeterminateKFState {
  DecomposedEstimate est;
  MatrixXd P_oo_prior;
  MatrixXd P_bo_prior;
  MatrixXd P_oo;
  MatrixXd P_bo;
  MatrixXd H_o;
  MatrixXd H_bo;
  std::size_t steps = 0;
};

/// Zero estimate and posterior covariances at k = -1 (first priors: Qo, Qbo).
DeterminateKFState determinate_kf_init(const Decomposition& d);

/// Time update of estimate and covariances.
void determinate_kf_predict(const Decomposition& d, DeterminateKFState& state,
                            const VectorXd& u_prev);

/// Gain computation and measurement update on the current priors.
void determinate_kf_update(const Decomposition& d, const MatrixXd& R, DeterminateKFState& state,
                           const VectorXd& y);

DeterminateKFState determinate_kf_step(const Decomposition& d, const MatrixXd& R,
                                       const DeterminateKFState& state, const VectorXd& u_prev,
                                       const VectorXd& y);

/// U ξ_o + (I₂⊗1) ξ_ō of the posterior estimate.
VectorXd reconstruct_posterior(const Decomposition& d, const DecomposedEstimate& est);

// ---------------------------------------------------------------------------
// Stationary determinate filter.
// ---------------------------------------------------------------------------

struct StationaryGains {
  MatrixXd P_oo_star;  // 2(N-1) x 2(N-1), prior covariance
  MatrixXd P_bo_star;  // 2 x 2(N-1)
  MatrixXd H_o_star;   // 2(N-1) x (N-1)
  MatrixXd H_bo_star;  // 2 x (N-1)
  double residual_oo = 0.0;
  double residual_bo = 0.0;
  std::size_t iterations = 0;
};

struct StationarySolverOptions {
  double increment_tolerance = 1e-13;
  std::size_t max_iterations = 1'000'000;
  double residual_tolerance = 1e-10;
  /// Newton (Hewer) steps after the iteration, kept while they lower the residual.
  bool newton_refinement = true;
};

/// Fixed point of the observable Riccati recursion (iterated from Qo) and the
/// cross covariance from the vectorized linear equation
///   (I − Ao(I − H_o Co) ⊗ A) vec P_bo = vec(Qbo + coupling P_oo (I − H_o Co)ᵀ Aoᵀ).
/// Throws ConvergenceError past the iteration cap, NumericalError on a
/// singular system or when a residual exceeds residual_tolerance.
StationaryGains solve_stationary(const Decomposition& d, const MatrixXd& R,
                                 const StationarySolverOptions& options = {});

/// Relative residual of P = Qo + Ao P S(P) Aoᵀ.
double riccati_residual(const Decomposition& d, const MatrixXd& R, const MatrixXd& P_oo);

/// Relative residual of P_bo = Qbo + (A P_bo + coupling P_oo) S(P_oo) Aoᵀ.
double cross_covariance_residual(const Decomposition& d, const MatrixXd& R,
                                 const MatrixXd& P_oo, const MatrixXd& P_bo);

/// ρ(Ao (I − H_o Co)).
double observer_spectral_radius(const Decomposition& d, const MatrixXd& H_o);

/// H_ō = (I₂ ⊗ qᵀ V∞⁺) H_o for an EEM basis with weight q, where V∞⁺ is the
/// generalized inverse for the long-term weight q_inf.
MatrixXd unobservable_gain_from_observable(const Decomposition& d, const EnsembleWeight& q_inf,
                                           const MatrixXd& H_o);

/// P_ōo = (I₂ ⊗ qᵀ V∞⁺) P_oo + [[0, −q∞ᵀ Σ₁ Vᵀ], [0, 0]].
MatrixXd cross_covariance_from_observable(const Decomposition& d, const EnsembleWeight& q_inf,
                                          const VectorXd& sigma1_sq, const MatrixXd& P_oo);

DecomposedEstimate stationary_kf_init(const Decomposition& d);

/// ξ[k] = ξ⁻[k] + H* (y − Co ξ_o⁻[k])
void stationary_kf_update(const Decomposition& d, const StationaryGains& g,
                          DecomposedEstimate& est, const VectorXd& y);

DecomposedEstimate stationary_kf_step(const Decomposition& d, const StationaryGains& g,
                                      const DecomposedEstimate& est, const VectorXd& u_prev,
                                      const VectorXd& y);

/// JSON document with keys P_oo_star, P_bo_star, H_o_star, H_bo_star (row-major
/// nested arrays), residuals and iterations.
void write_gains_json(std::ostream& os, const StationaryGains& g);

// ---------------------------------------------------------------------------
// Whole-run drivers. The truth is simulated free-running with the noise streams
// simulate() uses for the same seed; only scalar series are kept.
// ---------------------------------------------------------------------------

struct StandardKFRun {
  VectorXd epsilon;               // ε[k] = mean phase error of the posterior, k = 0..T-1
  VectorXd gain_increment_rel;    // ‖H[k] − H[k−1]‖_F / ‖H[k]‖_F, k = 1..K-1 (entry 0 is NaN)
  VectorXd prior_cov_increment;   // ‖P⁻[k] − P⁻[k−1]‖_F
  VectorXd prior_cov_norm;        // ‖P⁻[k]‖_F
  MatrixXd H_final;
};

/// Runs the standard filter built on `filter_model` against data generated by
/// `truth`. Increment series cover the first `increment_steps` steps.
StandardKFRun run_standard_kf(const EnsembleModel& truth, const EnsembleModel& filter_model,
                              std::size_t T, std::uint64_t seed, std::size_t increment_steps);

struct DeterminateKFRun {
  VectorXd epsilon;
  VectorXd H_o_increment_rel;
  VectorXd P_oo_increment_rel;
  VectorXd H_bo_increment_rel;
  VectorXd P_bo_increment_rel;
  DeterminateKFState final_state;
};

DeterminateKFRun run_determinate_kf(const EnsembleModel& truth, const Decomposition& d,
                                    std::size_t T, std::uint64_t seed,
                                    std::size_t increment_steps);

// ---------------------------------------------------------------------------
// Observer policy: runs the standard filter inside a simulation with zero input.
// ---------------------------------------------------------------------------

class StandardKFObserver final : public ControlPolicy {
 public:
  /// `filter_model` may differ from the simulated model (mis-specified noise).
  explicit StandardKFObserver(EnsembleModel filter_model);

  VectorXd input(std::size_t k, const VectorXd& y) override;
  std::optional<VectorXd> estimate() const override { return state_.xhat; }
  const StandardKFState& state() const noexcept { return state_; }

 private:
  EnsembleModel model_;
  StandardKFState state_;
  VectorXd zero_;
};

}  // namespace eem
