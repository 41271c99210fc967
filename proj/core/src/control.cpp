#include "eem/control.hpp"

#include <ostream>
#include <string>
#include <utility>

#include "eem/csv.hpp"
#include "eem/errors.hpp"
#include "eem/linalg.hpp"

namespace eem {

MatrixXd default_observable_gain(std::size_t N, double tau) {
  if (N < 2) throw InvalidArgument("default_observable_gain: need at least two clocks");
  const auto n1 = static_cast<Eigen::Index>(N) - 1;
  return kron(Eigen::RowVector2d(0.1 / tau, 1.0), MatrixXd::Identity(n1, n1));
}

Eigen::RowVector2d default_collective_gain(std::size_t m, double tau) {
  if (m < 1) throw InvalidArgument("default_collective_gain: m must be at least 1");
  return {0.01 / (static_cast<double>(m) * tau), 1.0};
}

double check_obs_gain(const MatrixXd& F_o, std::size_t N, double tau) {
  if (N < 2) throw InvalidArgument("check_obs_gain: need at least two clocks");
  const auto n1 = static_cast<Eigen::Index>(N) - 1;
  if (F_o.rows() != n1 || F_o.cols() != 2 * n1) {
    throw InvalidArgument("check_obs_gain: F_o must be (N-1) x 2(N-1)");
  }
  const MatrixXd eye = MatrixXd::Identity(n1, n1);
  Eigen::Matrix2d A;
  A << 1.0, tau, 0.0, 1.0;
  const MatrixXd Ao = kron(A, eye);
  const MatrixXd Bo = kron(Eigen::Vector2d(tau, 1.0), eye);
  return spectral_radius(Ao - Bo * F_o);
}

double check_collective_gain(const Eigen::RowVector2d& K_bo, std::size_t m, double tau) {
  if (m < 1) throw InvalidArgument("check_collective_gain: m must be at least 1");
  const double mt = static_cast<double>(m) * tau;
  Eigen::Matrix2d Am;
  Am << 1.0, mt, 0.0, 1.0;
  const Eigen::Matrix2d closed = Am - Eigen::Vector2d(mt, 1.0) * K_bo;
  return spectral_radius(closed);
}

void validate_controller(const ControllerConfig& cfg, std::size_t N, double tau) {
  if (cfg.q.size() != N) throw InvalidArgument("controller: q must have N entries");
  if (cfg.m < 1) throw InvalidArgument("controller: collective period m must be at least 1");
  const double rho_o = check_obs_gain(cfg.F_o, N, tau);
  if (!(rho_o < 1.0)) {
    throw InvalidArgument("controller: observable gain rejected, rho(Ao - Bo F_o) = " +
                          std::to_string(rho_o) + " >= 1");
  }
  if (cfg.mode == ControlMode::balanced) {
    const double rho_c = check_collective_gain(cfg.K_bo, cfg.m, tau);
    if (!(rho_c < 1.0)) {
      throw InvalidArgument("controller: collective gain rejected, spectral radius " +
                            std::to_string(rho_c) + " >= 1");
    }
  }
}

ControllerState controller_init(const Decomposition& d) {
  ControllerState s;
  s.filter = determinate_kf_init(d);
  determinate_kf_predict(d, s.filter, VectorXd::Zero(static_cast<Eigen::Index>(d.N)));
  return s;
}

ControllerOutput eem_controller_step(const ControllerConfig& cfg, const Decomposition& d,
                                     const StationaryGains& g, const MatrixXd& R,
                                     ControllerState& state, const VectorXd& y, std::size_t k) {
  DeterminateKFState& f = state.filter;
  ControllerOutput out;
  out.omega_o = -cfg.F_o * f.est.xi_o_prior;
  const bool collective =
      cfg.mode == ControlMode::balanced && k >= cfg.phase && (k - cfg.phase) % cfg.m == 0;
  out.omega_obar = collective ? -cfg.K_bo.dot(f.est.xi_obar_prior) : 0.0;
  out.u = expand_input(out.omega_o, out.omega_obar, d);

  if (cfg.stationary) {
    stationary_kf_update(d, g, f.est, y);
    predict_estimate(d, f.est, out.u);
  } else {
    determinate_kf_update(d, R, f, y);
    determinate_kf_predict(d, f, out.u);
  }
  return out;
}

void write_command_log_csv(std::ostream& os, const CommandLog& log) {
  const std::size_t n1 = log.omega_o.empty() ? 0 : static_cast<std::size_t>(log.omega_o[0].size());
  const std::size_t n = log.u.empty() ? 0 : static_cast<std::size_t>(log.u[0].size());
  std::vector<std::string> header{"k"};
  for (std::size_t i = 1; i <= n1; ++i) header.push_back("omega_o_" + std::to_string(i));
  header.push_back("omega_obar");
  for (std::size_t i = 1; i <= n; ++i) header.push_back("u_" + std::to_string(i));
  csv::write_header(os, header);
  for (std::size_t r = 0; r < log.k.size(); ++r) {
    os << log.k[r];
    for (Eigen::Index i = 0; i < log.omega_o[r].size(); ++i) csv::write_field(os, log.omega_o[r](i));
    csv::write_field(os, log.omega_obar[r]);
    for (Eigen::Index i = 0; i < log.u[r].size(); ++i) csv::write_field(os, log.u[r](i));
    os << '\n';
  }
}

EemController::EemController(const EnsembleModel& model, ControllerConfig cfg,
                             std::optional<StationaryGains> gains, bool keep_log)
    : cfg_(std::move(cfg)), keep_log_(keep_log) {
  validate_controller(cfg_, model.N, model.tau);
  d_ = decompose(model, cfg_.q);
  R_ = model.meas.R;
  g_ = gains ? std::move(*gains) : solve_stationary(d_, R_);
  state_ = controller_init(d_);
}

VectorXd EemController::input(std::size_t k, const VectorXd& y) {
  ControllerOutput out = eem_controller_step(cfg_, d_, g_, R_, state_, y, k);
  if (keep_log_) {
    log_.k.push_back(k);
    log_.omega_o.push_back(out.omega_o);
    log_.omega_obar.push_back(out.omega_obar);
    log_.u.push_back(out.u);
  }
  return std::move(out.u);
}

std::optional<VectorXd> EemController::estimate() const {
  return reconstruct_posterior(d_, state_.filter.est);
}

SyncDestination simulate_destination(const EnsembleModel& model, const EnsembleWeight& q,
                                     std::size_t T, const SimulationOptions& options) {
  const auto n = static_cast<Eigen::Index>(model.N);
  if (q.size() != model.N) throw InvalidArgument("simulate_destination: q must have N entries");
  const MatrixXd W = lift2(q.vector().transpose());
  const Eigen::Matrix2d A = model.A();

  SyncDestination dest{q, MatrixXd(2, static_cast<Eigen::Index>(T) + 1)};
  Eigen::Vector2d r = Eigen::Vector2d::Zero();
  if (options.x0) {
    if (options.x0->size() != 2 * n) {
      throw InvalidArgument("simulate_destination: x0 must have 2N entries");
    }
    r = W * *options.x0;
  }
  const NoiseSampler sampler(model, options.seed);
  for (std::size_t k = 0; k < T; ++k) {
    dest.r.col(static_cast<Eigen::Index>(k)) = r;
    r = A * r;
    if (options.process_noise) r += W * sampler.process(k);
  }
  dest.r.col(static_cast<Eigen::Index>(T)) = r;
  return dest;
}

MatrixXd sync_error(const TrajectoryRecord& traj, const SyncDestination& dest) {
  if (!traj.has_states()) throw InvalidArgument("sync_error: trajectory has no recorded states");
  if (traj.x.cols() != dest.r.cols()) {
    throw InvalidArgument("sync_error: trajectory and destination lengths differ");
  }
  const auto n = static_cast<Eigen::Index>(traj.N);
  MatrixXd delta = traj.x;
  delta.topRows(n).rowwise() -= dest.r.row(0);
  delta.bottomRows(n).rowwise() -= dest.r.row(1);
  return delta;
}

}  // namespace eem
