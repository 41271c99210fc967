#pragma once

// Two-state clock models (phase, frequency) and their N-clock ensemble.
//
// State ordering for ensembles is phase-block-first:
//   x = [x_11 ... x_1N, x_21 ... x_2N]ᵀ
// so that the ensemble matrices are literal Kronecker products A ⊗ I_N.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "eem/linalg.hpp"

namespace eem {

/// White-FM (sigma1) and random-walk-FM (sigma2) standard deviations of one clock.
struct NoiseParams {
  double sigma1 = 0.0;
  double sigma2 = 0.0;

  /// Throws InvalidArgument unless both are finite, non-negative and not both zero.
  void validate() const;
};

/// Exact zero-order-hold discretization of the second-order clock model.
struct DiscreteClockModel {
  Eigen::Matrix2d A;
  Eigen::Vector2d B;
  Eigen::RowVector2d C;
  Eigen::Matrix2d Q;
  double tau = 1.0;
};

DiscreteClockModel discretize(const NoiseParams& noise, double tau);

/// V = [I_{N-1} | -1]: every clock measured against clock N.
MatrixXd star_measurement(std::size_t n);

/// True if v is exactly the star form produced by star_measurement.
bool is_star_measurement(const MatrixXd& v);

/// Diagonal R from per-pair measurement standard deviations.
MatrixXd diagonal_measurement_covariance(std::span<const double> stddevs);

struct MeasurementStructure {
  MatrixXd V;  // (N-1) x N
  MatrixXd R;  // (N-1) x (N-1)
};

/// Block process covariance for independent clocks given per-clock variances.
MatrixXd ensemble_process_covariance(const VectorXd& sigma1_sq, const VectorXd& sigma2_sq,
                                     double tau);

struct EnsembleModel {
  std::size_t N = 0;
  double tau = 1.0;
  VectorXd sigma1_sq;  // diagonal of Sigma1
  VectorXd sigma2_sq;  // diagonal of Sigma2
  MatrixXd bigQ;       // 2N x 2N
  MeasurementStructure meas;
  MatrixXd bigA;  // A ⊗ I_N
  MatrixXd bigB;  // B ⊗ I_N
  MatrixXd bigC;  // C ⊗ V

  Eigen::Matrix2d A() const;
  Eigen::Vector2d B() const;

  /// (C ⊗ I_N) x: clock reading deviations.
  VectorXd readings(const VectorXd& x) const { return x.head(static_cast<Eigen::Index>(N)); }
};

/// Assemble the ensemble model. Validates V (shape, full row rank, V·1 = 0),
/// R (shape, SPD) and every NoiseParams; violations throw InvalidArgument
/// naming the failed invariant.
EnsembleModel build_ensemble(std::span<const NoiseParams> params, const MatrixXd& V,
                             const MatrixXd& R, double tau);

/// Ensemble-mean weight q with qᵀ1 = 1.
class EnsembleWeight {
 public:
  /// Throws InvalidArgument if q is empty, non-finite or |qᵀ1 − 1| > tol.
  explicit EnsembleWeight(VectorXd q, double tol = 1e-10);

  const VectorXd& vector() const noexcept { return q_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(q_.size()); }
  double operator[](std::size_t i) const { return q_(static_cast<Eigen::Index>(i)); }

  static EnsembleWeight uniform(std::size_t n);
  /// e_i (zero-based index): the ensemble mean is clock i itself.
  static EnsembleWeight unit(std::size_t n, std::size_t i);

 private:
  VectorXd q_;
};

}  // namespace eem
