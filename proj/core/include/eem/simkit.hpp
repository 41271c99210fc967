#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "eem/models.hpp"

namespace eem {

/// Standard normal variates addressed by (stream, step, index).
///
/// Counter-based: the value at a given address depends only on the seed and
/// the address, so a stream can be replayed from any step and independent
/// sub-streams never overlap.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream);

  /// Fill out with the variates of step k.
  void fill(std::uint64_t k, std::span<double> out) const;

 private:
  std::uint64_t key_;
};

/// Gaussian process and measurement noise for one ensemble model.
class NoiseSampler {
 public:
  NoiseSampler(const EnsembleModel& model, std::uint64_t seed);

  VectorXd process(std::uint64_t k) const;      // v[k] ~ N(0, bigQ)
  VectorXd measurement(std::uint64_t k) const;  // w[k] ~ N(0, R)

  const MatrixXd& chol_q() const noexcept { return chol_q_; }
  const MatrixXd& chol_r() const noexcept { return chol_r_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  MatrixXd chol_q_;
  MatrixXd chol_r_;
  std::uint64_t seed_;
  NormalStream process_stream_;
  NormalStream measurement_stream_;
};

/// Feedback hook driven by the simulator. Sees measurements only.
class ControlPolicy {
 public:
  virtual ~ControlPolicy() = default;

  /// Input u[k] given the measurement y[k].
  virtual VectorXd input(std::size_t k, const VectorXd& y) = 0;

  /// Posterior state estimate after the last call to input(), if the policy keeps one.
  virtual std::optional<VectorXd> estimate() const { return std::nullopt; }
};

class FreeRunPolicy final : public ControlPolicy {
 public:
  explicit FreeRunPolicy(std::size_t n) : zero_(VectorXd::Zero(static_cast<Eigen::Index>(n))) {}
  VectorXd input(std::size_t, const VectorXd&) override { return zero_; }

 private:
  VectorXd zero_;
};

struct SimulationOptions {
  std::uint64_t seed = 0;
  std::optional<VectorXd> x0;  // zero when unset
  bool process_noise = true;
  bool measurement_noise = true;
  bool record_states = true;
  bool record_measurements = true;
  bool record_inputs = true;
  bool record_estimates = false;
};

/// One simulation run. Columns are time steps.
struct TrajectoryRecord {
  std::size_t N = 0;
  std::size_t T = 0;
  double tau = 1.0;
  MatrixXd x;     // 2N x (T+1), empty unless recorded
  MatrixXd y;     // (N-1) x T, empty unless recorded
  MatrixXd h;     // N x (T+1), always recorded
  MatrixXd u;     // N x T, empty unless recorded
  MatrixXd xhat;  // 2N x T, policy estimates when recorded

  bool has_states() const noexcept { return x.cols() > 0; }
  bool has_estimates() const noexcept { return xhat.cols() > 0; }
};

/// bigA x + bigB u + v
VectorXd step(const EnsembleModel& model, const VectorXd& x, const VectorXd& u, const VectorXd& v);

/// Closed-loop simulation. At step k: y[k] = bigC x[k] + w[k], u[k] = policy(k, y[k]),
/// x[k+1] = bigA x[k] + bigB u[k] + v[k].
TrajectoryRecord simulate(const EnsembleModel& model, ControlPolicy& policy, std::size_t T,
                          const SimulationOptions& options = {});

/// Reading adjustments u' that reproduce, on a free-running clock, the readings
/// produced by the physical frequency inputs u.
VectorXd digital_imitation(const DiscreteClockModel& model, const VectorXd& u);

/// Mean of the phase block of each column of e (2N x K).
VectorXd reference_timescale(const MatrixXd& e, std::size_t N);

/// CSV with header `k,h_1..h_N,u_1..u_N[,xhat_1..xhat_2N]`, one row per step
/// k = 0..T. The final row has empty input and estimate fields.
void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& record,
                          bool include_estimates = false);

}  // namespace eem
