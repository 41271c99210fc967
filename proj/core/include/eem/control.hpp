#pragma once

// Observer-based ensemble synchronization controller.
//
// The observable part is driven to zero by ω_o = −F_o ξ̂_o⁻. In balanced mode
// the ensemble mean additionally receives ω_ō = −K_bo ξ̂_ō⁻ once every m steps.
// The physical input is u = V⁺ ω_o + 1 ω_ō.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "eem/decomp.hpp"
#include "eem/filters.hpp"
#include "eem/models.hpp"
#include "eem/simkit.hpp"

namespace eem {

enum class ControlMode { sync_only, balanced };

struct ControllerConfig {
  EnsembleWeight q;
  MatrixXd F_o;               // (N-1) x 2(N-1)
  Eigen::RowVector2d K_bo;    // collective gain
  std::size_t m = 200;        // collective-control period in steps
  std::size_t phase = 0;      // collective control at k ≡ phase (mod m)
  ControlMode mode = ControlMode::sync_only;
  bool stationary = true;     // stationary gains, or the time-varying determinate filter
};

/// [0.1/τ, 1] ⊗ I_{N-1}
MatrixXd default_observable_gain(std::size_t N, double tau);

/// [0.01/(mτ), 1]
Eigen::RowVector2d default_collective_gain(std::size_t m, double tau);

/// ρ(Ao − Bo F_o). Throws InvalidArgument on a dimension mismatch.
double check_obs_gain(const MatrixXd& F_o, std::size_t N, double tau);

/// ρ(Aᵐ − Aᵐ⁻¹B K_bo) with Aᵐ = [[1, mτ], [0, 1]] and Aᵐ⁻¹B = [mτ, 1]ᵀ.
double check_collective_gain(const Eigen::RowVector2d& K_bo, std::size_t m, double tau);

/// Throws InvalidArgument when dimensions, m, or the spectral conditions required
/// by the mode are violated.
void validate_controller(const ControllerConfig& cfg, std::size_t N, double tau);

struct ControllerState {
  DeterminateKFState filter;  // est holds ξ̂⁻[k] (prior) on entry to a step
};

struct ControllerOutput {
  VectorXd u;
  VectorXd omega_o;
  double omega_obar = 0.0;
};

/// Initial controller state: zero priors, first prior covariances Qo and Qbo.
ControllerState controller_init(const Decomposition& d);

/// One step at time k with measurement y[k]: input from the priors, posterior
/// update with y[k], then the priors for k+1 using the applied input.
ControllerOutput eem_controller_step(const ControllerConfig& cfg, const Decomposition& d,
                                     const StationaryGains& g, const MatrixXd& R,
                                     ControllerState& state, const VectorXd& y, std::size_t k);

struct CommandLog {
  std::vector<std::size_t> k;
  std::vector<VectorXd> omega_o;
  std::vector<double> omega_obar;
  std::vector<VectorXd> u;
};

/// CSV with columns `k, omega_o_1..omega_o_{N-1}, omega_obar, u_1..u_N`.
void write_command_log_csv(std::ostream& os, const CommandLog& log);

/// Closed-loop policy wrapping eem_controller_step.
class EemController final : public ControlPolicy {
 public:
  /// Validates the configuration and decomposes the model along cfg.q. The
  /// stationary gains are solved here unless supplied.
  EemController(const EnsembleModel& model, ControllerConfig cfg,
                std::optional<StationaryGains> gains = std::nullopt, bool keep_log = false);

  VectorXd input(std::size_t k, const VectorXd& y) override;
  std::optional<VectorXd> estimate() const override;

  const Decomposition& decomposition() const noexcept { return d_; }
  const StationaryGains& gains() const noexcept { return g_; }
  const ControllerConfig& config() const noexcept { return cfg_; }
  const ControllerState& state() const noexcept { return state_; }
  const CommandLog& log() const noexcept { return log_; }

 private:
  ControllerConfig cfg_;
  Decomposition d_;
  MatrixXd R_;
  StationaryGains g_;
  ControllerState state_;
  bool keep_log_;
  CommandLog log_;
};

/// Free-running destination Π(q): r[k+1] = A r[k] + (I₂⊗qᵀ) v[k].
struct SyncDestination {
  EnsembleWeight q;
  MatrixXd r;  // 2 x (T+1)

  /// Destination reading z[k] = r[0, k].
  double z(std::size_t k) const { return r(0, static_cast<Eigen::Index>(k)); }
};

/// Co-simulates Π(q) on the process-noise stream that simulate() uses for the
/// same seed, starting at r[0] = (I₂⊗qᵀ) x0.
SyncDestination simulate_destination(const EnsembleModel& model, const EnsembleWeight& q,
                                     std::size_t T, const SimulationOptions& options);

/// δ[k] = x[k] − (I₂⊗1) r[k], 2N x (T+1). Requires recorded states.
MatrixXd sync_error(const TrajectoryRecord& traj, const SyncDestination& dest);

}  // namespace eem
