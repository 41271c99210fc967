#include "eem/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>

#include "eem/errors.hpp"

namespace eem {

void NoiseParams::validate() const {
  if (!std::isfinite(sigma1) || !std::isfinite(sigma2)) {
    throw InvalidArgument("NoiseParams: sigma1 and sigma2 must be finite");
  }
  if (sigma1 < 0.0 || sigma2 < 0.0) {
    throw InvalidArgument("NoiseParams: sigma1 >= 0 and sigma2 >= 0 required");
  }
  if (sigma1 == 0.0 && sigma2 == 0.0) {
    throw InvalidArgument("NoiseParams: sigma1 and sigma2 must not both be zero");
  }
}

DiscreteClockModel discretize(const NoiseParams& noise, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("discretize: sampling interval tau must be positive");
  }
  noise.validate();
  const double s1 = noise.sigma1 * noise.sigma1;
  const double s2 = noise.sigma2 * noise.sigma2;

  DiscreteClockModel m;
  m.tau = tau;
  m.A << 1.0, tau, 0.0, 1.0;
  m.B << tau, 1.0;
  m.C << 1.0, 0.0;
  m.Q << tau * s1 + tau * tau * tau / 3.0 * s2, tau * tau / 2.0 * s2,  //
      tau * tau / 2.0 * s2, tau * s2;
  return m;
}

MatrixXd star_measurement(std::size_t n) {
  if (n < 2) throw InvalidArgument("star_measurement: at least two clocks required");
  const auto rows = static_cast<Eigen::Index>(n - 1);
  MatrixXd v(rows, rows + 1);
  v.leftCols(rows).setIdentity();
  v.col(rows).setConstant(-1.0);
  return v;
}

bool is_star_measurement(const MatrixXd& v) {
  if (v.rows() < 1 || v.cols() != v.rows() + 1) return false;
  return v == star_measurement(static_cast<std::size_t>(v.cols()));
}

MatrixXd diagonal_measurement_covariance(std::span<const double> stddevs) {
  VectorXd var(static_cast<Eigen::Index>(stddevs.size()));
  for (std::size_t i = 0; i < stddevs.size(); ++i) {
    if (!(stddevs[i] > 0.0) || !std::isfinite(stddevs[i])) {
      throw InvalidArgument("measurement standard deviations must be positive");
    }
    var(static_cast<Eigen::Index>(i)) = stddevs[i] * stddevs[i];
  }
  return var.asDiagonal();
}

MatrixXd ensemble_process_covariance(const VectorXd& sigma1_sq, const VectorXd& sigma2_sq,
                                     double tau) {
  if (sigma1_sq.size() != sigma2_sq.size()) {
    throw InvalidArgument("ensemble_process_covariance: variance vectors differ in length");
  }
  const Eigen::Index n = sigma1_sq.size();
  MatrixXd q = MatrixXd::Zero(2 * n, 2 * n);
  const VectorXd phase = tau * sigma1_sq + (tau * tau * tau / 3.0) * sigma2_sq;
  const VectorXd cross = (tau * tau / 2.0) * sigma2_sq;
  const VectorXd freq = tau * sigma2_sq;
  q.topLeftCorner(n, n).diagonal() = phase;
  q.topRightCorner(n, n).diagonal() = cross;
  q.bottomLeftCorner(n, n).diagonal() = cross;
  q.bottomRightCorner(n, n).diagonal() = freq;
  return q;
}

Eigen::Matrix2d EnsembleModel::A() const {
  Eigen::Matrix2d a;
  a << 1.0, tau, 0.0, 1.0;
  return a;
}

Eigen::Vector2d EnsembleModel::B() const { return {tau, 1.0}; }

namespace {

void check_measurement_matrix(const MatrixXd& v, std::size_t n) {
  const auto rows = static_cast<Eigen::Index>(n - 1);
  if (v.rows() != rows || v.cols() != static_cast<Eigen::Index>(n)) {
    std::ostringstream os;
    os << "build_ensemble: V must be " << rows << "x" << n << ", got " << v.rows() << "x"
       << v.cols();
    throw InvalidArgument(os.str());
  }
  const VectorXd row_sums = v * ones(n);
  if (row_sums.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff())) {
    throw InvalidArgument("build_ensemble: V*1 != 0 (every row of V must sum to zero)");
  }
  if (numerical_rank(v) != n - 1) {
    throw InvalidArgument("build_ensemble: V must have full row rank N-1");
  }
}

}  // namespace

EnsembleModel build_ensemble(std::span<const NoiseParams> params, const MatrixXd& V,
                             const MatrixXd& R, double tau) {
  const std::size_t n = params.size();
  if (n < 2) throw InvalidArgument("build_ensemble: at least two clocks required");
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("build_ensemble: sampling interval tau must be positive");
  }
  for (std::size_t i = 0; i < n; ++i) {
    try {
      params[i].validate();
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("build_ensemble: clock " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  check_measurement_matrix(V, n);
  const auto m = static_cast<Eigen::Index>(n - 1);
  if (R.rows() != m || R.cols() != m) {
    throw InvalidArgument("build_ensemble: R must be (N-1)x(N-1)");
  }
  if (!is_symmetric_positive_definite(R)) {
    throw InvalidArgument("build_ensemble: R must be symmetric positive definite");
  }

  EnsembleModel model;
  model.N = n;
  model.tau = tau;
  model.sigma1_sq.resize(static_cast<Eigen::Index>(n));
  model.sigma2_sq.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    model.sigma1_sq(static_cast<Eigen::Index>(i)) = params[i].sigma1 * params[i].sigma1;
    model.sigma2_sq(static_cast<Eigen::Index>(i)) = params[i].sigma2 * params[i].sigma2;
  }
  model.bigQ = ensemble_process_covariance(model.sigma1_sq, model.sigma2_sq, tau);
  model.meas = {V, R};

  const MatrixXd eye_n = MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const Eigen::Matrix2d a = model.A();
  const Eigen::Vector2d b = model.B();
  Eigen::RowVector2d c(1.0, 0.0);
  model.bigA = kron(a, eye_n);
  model.bigB = kron(b, eye_n);
  model.bigC = kron(c, V);
  return model;
}

EnsembleWeight::EnsembleWeight(VectorXd q, double tol) : q_(std::move(q)) {
  if (q_.size() == 0) throw InvalidArgument("EnsembleWeight: empty weight vector");
  if (!q_.allFinite()) throw InvalidArgument("EnsembleWeight: non-finite entries");
  const double sum = q_.sum();
  if (std::abs(sum - 1.0) > tol) {
    std::ostringstream os;
    os.precision(17);
    os << "EnsembleWeight: normalization q^T 1 = 1 violated (sum = " << sum << ")";
    throw InvalidArgument(os.str());
  }
}

EnsembleWeight EnsembleWeight::uniform(std::size_t n) {
  return EnsembleWeight(VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
}

EnsembleWeight EnsembleWeight::unit(std::size_t n, std::size_t i) {
  if (i >= n) throw InvalidArgument("EnsembleWeight::unit: index out of range");
  VectorXd q = VectorXd::Zero(static_cast<Eigen::Index>(n));
  q(static_cast<Eigen::Index>(i)) = 1.0;
  return EnsembleWeight(std::move(q));
}

}  // namespace eem
