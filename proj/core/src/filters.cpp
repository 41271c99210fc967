#include "eem/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <utility>

#include "eem/csv.hpp"
#include "eem/errors.hpp"
#include "eem/linalg.hpp"

namespace eem {
namespace {

Eigen::LLT<MatrixXd> innovation_factor(const MatrixXd& S, const char* who) {
  Eigen::LLT<MatrixXd> llt(symmetrize(S));
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(who) + ": innovation covariance is not positive definite");
  }
  return llt;
}

void check_vector(const VectorXd& v, Eigen::Index n, const char* what) {
  if (v.size() != n) throw InvalidArgument(what);
}

// S(P) = I − Coᵀ (Co P Coᵀ + R)⁻¹ Co P, i.e. (I − H Co)ᵀ.
MatrixXd riccati_s(const Decomposition& d, const MatrixXd& R, const MatrixXd& P) {
  const MatrixXd CP = d.Co * P;
  const auto llt = innovation_factor(CP * d.Co.transpose() + R, "riccati_s");
  const auto m = static_cast<Eigen::Index>(d.observable_dim());
  return MatrixXd::Identity(m, m) - d.Co.transpose() * llt.solve(CP);
}

double relative_norm(const MatrixXd& diff, const MatrixXd& ref) {
  const double scale = ref.norm();
  if (scale == 0.0) return diff.norm();
  return diff.norm() / scale;
}

void write_matrix(std::ostream& os, const MatrixXd& m) {
  os << '[';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) os << ',';
    os << '[';
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << csv::format_double(m(i, j));
    }
    os << ']';
  }
  os << ']';
}

// X = Σ_k Φᵏ W Φᵏᵀ by doubling. Requires ρ(Φ) < 1.
MatrixXd stein_doubling(MatrixXd Phi, MatrixXd W) {
  for (int i = 0; i < 64; ++i) {
    const MatrixXd add = Phi * W * Phi.transpose();
    W += add;
    Phi = Phi * Phi;
    if (Phi.norm() < 1e-18 || add.norm() <= 1e-17 * W.norm()) break;
  }
  return symmetrize(W);
}

// One Newton (Hewer) step on the prior Riccati equation: solve the Lyapunov
// equation of the closed loop generated by the gain of P.
MatrixXd hewer_step(const Decomposition& d, const MatrixXd& R, const MatrixXd& P) {
  const auto m = static_cast<Eigen::Index>(d.observable_dim());
  const MatrixXd CP = d.Co * P;
  const auto llt = innovation_factor(CP * d.Co.transpose() + R, "hewer_step");
  const MatrixXd H = llt.solve(CP).transpose();
  const MatrixXd Phi = d.Ao * (MatrixXd::Identity(m, m) - H * d.Co);
  const MatrixXd AH = d.Ao * H;
  return stein_doubling(Phi, symmetrize(d.Qo + AH * R * AH.transpose()));
}

}  // namespace

StandardKFState standard_kf_init(const EnsembleModel& model) {
  const auto n = static_cast<Eigen::Index>(2 * model.N);
  StandardKFState s;
  s.xhat_minus = VectorXd::Zero(n);
  s.xhat = VectorXd::Zero(n);
  s.P_minus = MatrixXd::Zero(n, n);
  s.P = MatrixXd::Zero(n, n);
  s.H = MatrixXd::Zero(n, static_cast<Eigen::Index>(model.N) - 1);
  return s;
}

StandardKFState standard_kf_step(const EnsembleModel& model, const StandardKFState& state,
                                 const VectorXd& u_prev, const VectorXd& y) {
  const auto n = static_cast<Eigen::Index>(model.N);
  check_vector(u_prev, n, "standard_kf_step: u_prev must have N entries");
  check_vector(y, n - 1, "standard_kf_step: y must have N-1 entries");

  StandardKFState next;
  next.steps = state.steps + 1;
  next.xhat_minus = model.bigA * state.xhat + model.bigB * u_prev;
  next.P_minus = symmetrize(model.bigA * state.P * model.bigA.transpose() + model.bigQ);

  const MatrixXd CP = model.bigC * next.P_minus;
  const auto llt =
      innovation_factor(CP * model.bigC.transpose() + model.meas.R, "standard_kf_step");
  next.H = llt.solve(CP).transpose();
  next.P = symmetrize(next.P_minus - next.H * CP);
  next.xhat = next.xhat_minus + next.H * (y - model.bigC * next.xhat_minus);
  return next;
}

void predict_estimate(const Decomposition& d, DecomposedEstimate& est, const VectorXd& u_prev) {
  check_vector(u_prev, static_cast<Eigen::Index>(d.N),
               "predict_estimate: u_prev must have N entries");
  est.xi_o_prior = d.Ao * est.xi_o + d.Bo_in * u_prev;
  est.xi_obar_prior = d.coupling * est.xi_o + d.A * est.xi_obar + d.Bbo_in * u_prev;
}

DeterminateKFState determinate_kf_init(const Decomposition& d) {
  const auto m = static_cast<Eigen::Index>(d.observable_dim());
  DeterminateKFState s;
  s.est = stationary_kf_init(d);
  s.P_oo_prior = MatrixXd::Zero(m, m);
  s.P_bo_prior = MatrixXd::Zero(2, m);
  s.P_oo = MatrixXd::Zero(m, m);
  s.P_bo = MatrixXd::Zero(2, m);
  s.H_o = MatrixXd::Zero(m, m / 2);
  s.H_bo = MatrixXd::Zero(2, m / 2);
  return s;
}

void determinate_kf_predict(const Decomposition& d, DeterminateKFState& state,
                            const VectorXd& u_prev) {
  predict_estimate(d, state.est, u_prev);
  state.P_oo_prior = symmetrize(d.Ao * state.P_oo * d.Ao.transpose() + d.Qo);
  state.P_bo_prior = (d.coupling * state.P_oo + d.A * state.P_bo) * d.Ao.transpose() + d.Qbo;
}

void determinate_kf_update(const Decomposition& d, const MatrixXd& R, DeterminateKFState& state,
                           const VectorXd& y) {
  const auto m = static_cast<Eigen::Index>(d.observable_dim());
  check_vector(y, m / 2, "determinate_kf_update: y must have N-1 entries");

  const MatrixXd CP = d.Co * state.P_oo_prior;
  const auto llt = innovation_factor(CP * d.Co.transpose() + R, "determinate_kf_update");
  state.H_o = llt.solve(CP).transpose();
  state.H_bo = llt.solve(d.Co * state.P_bo_prior.transpose()).transpose();

  state.P_oo = symmetrize(state.P_oo_prior - state.H_o * CP);
  const MatrixXd S = MatrixXd::Identity(m, m) - d.Co.transpose() * state.H_o.transpose();
  state.P_bo = state.P_bo_prior * S;

  const VectorXd innovation = y - d.Co * state.est.xi_o_prior;
  state.est.xi_o = state.est.xi_o_prior + state.H_o * innovation;
  state.est.xi_obar = state.est.xi_obar_prior + state.H_bo * innovation;
  ++state.steps;
}

DeterminateKFState determinate_kf_step(const Decomposition& d, const MatrixXd& R,
                                       const DeterminateKFState& state, const VectorXd& u_prev,
                                       const VectorXd& y) {
  DeterminateKFState next = state;
  determinate_kf_predict(d, next, u_prev);
  determinate_kf_update(d, R, next, y);
  return next;
}

VectorXd reconstruct_posterior(const Decomposition& d, const DecomposedEstimate& est) {
  return reconstruct_state(est.xi_o, est.xi_obar, d);
}

double riccati_residual(const Decomposition& d, const MatrixXd& R, const MatrixXd& P_oo) {
  const MatrixXd rhs = d.Qo + d.Ao * P_oo * riccati_s(d, R, P_oo) * d.Ao.transpose();
  return relative_norm(P_oo - rhs, P_oo);
}

double cross_covariance_residual(const Decomposition& d, const MatrixXd& R,
                                 const MatrixXd& P_oo, const MatrixXd& P_bo) {
  const MatrixXd rhs =
      d.Qbo + (d.A * P_bo + d.coupling * P_oo) * riccati_s(d, R, P_oo) * d.Ao.transpose();
  const double scale = std::max(P_bo.norm(), d.Qbo.norm());
  if (scale == 0.0) return (P_bo - rhs).norm();
  return (P_bo - rhs).norm() / scale;
}

double observer_spectral_radius(const Decomposition& d, const MatrixXd& H_o) {
  const auto m = static_cast<Eigen::Index>(d.observable_dim());
  return spectral_radius(d.Ao * (MatrixXd::Identity(m, m) - H_o * d.Co));
}

StationaryGains solve_stationary(const Decomposition& d, const MatrixXd& R,
                                 const StationarySolverOptions& options) {
  const auto m = static_cast<Eigen::Index>(d.observable_dim());
  if (R.rows() != m / 2 || R.cols() != m / 2) {
    throw InvalidArgument("solve_stationary: R must be (N-1)x(N-1)");
  }

  StationaryGains g;
  MatrixXd P = d.Qo;
  double increment = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  while (increment >= options.increment_tolerance) {
    if (it >= options.max_iterations) {
      throw ConvergenceError("solve_stationary: Riccati iteration did not converge within " +
                                 std::to_string(options.max_iterations) + " iterations",
                             increment);
    }
    const MatrixXd CP = d.Co * P;
    const auto llt = innovation_factor(CP * d.Co.transpose() + R, "solve_stationary");
    const MatrixXd posterior = P - CP.transpose() * llt.solve(CP);
    MatrixXd next = symmetrize(d.Qo + d.Ao * posterior * d.Ao.transpose());
    increment = relative_norm(next - P, next);
    P = std::move(next);
    ++it;
  }
  g.iterations = it;

  if (options.newton_refinement) {
    double best = riccati_residual(d, R, P);
    for (int i = 0; i < 8 && best > 0.0; ++i) {
      MatrixXd candidate = hewer_step(d, R, P);
      const double res = riccati_residual(d, R, candidate);
      if (!(res < best)) break;
      best = res;
      P = std::move(candidate);
    }
  }
  g.P_oo_star = P;

  const MatrixXd CP = d.Co * P;
  const auto llt = innovation_factor(CP * d.Co.transpose() + R, "solve_stationary");
  g.H_o_star = llt.solve(CP).transpose();

  // P_bo = X + A P_bo M with M = (I − H_o Co)ᵀ Aoᵀ; column-major vec gives
  // (I − Mᵀ ⊗ A) vec P_bo = vec X.
  const MatrixXd M =
      (MatrixXd::Identity(m, m) - g.H_o_star * d.Co).transpose() * d.Ao.transpose();
  const MatrixXd X = d.Qbo + d.coupling * P * M;
  const MatrixXd system = MatrixXd::Identity(2 * m, 2 * m) - kron(M.transpose(), d.A);
  Eigen::FullPivLU<MatrixXd> lu(system);
  if (!lu.isInvertible()) {
    throw NumericalError("solve_stationary: cross-covariance system is singular");
  }
  const VectorXd vec_x = Eigen::Map<const VectorXd>(X.data(), X.size());
  const VectorXd vec_p = lu.solve(vec_x);
  g.P_bo_star = Eigen::Map<const MatrixXd>(vec_p.data(), 2, m);
  g.H_bo_star = llt.solve(d.Co * g.P_bo_star.transpose()).transpose();

  g.residual_oo = riccati_residual(d, R, g.P_oo_star);
  g.residual_bo = cross_covariance_residual(d, R, g.P_oo_star, g.P_bo_star);
  if (!(g.residual_oo <= options.residual_tolerance) ||
      !(g.residual_bo <= options.residual_tolerance)) {
    throw NumericalError("solve_stationary: fixed-point residuals " +
                         std::to_string(g.residual_oo) + ", " + std::to_string(g.residual_bo) +
                         " exceed tolerance");
  }
  if (observer_spectral_radius(d, g.H_o_star) >= 1.0) {
    throw NumericalError("solve_stationary: stationary observer is not stable");
  }
  return g;
}

MatrixXd unobservable_gain_from_observable(const Decomposition& d, const EnsembleWeight& q_inf,
                                           const MatrixXd& H_o) {
  if (!d.is_eem()) {
    throw UnsupportedOperation("unobservable_gain_from_observable: requires an EEM basis");
  }
  const MatrixXd vplus_inf = generalized_inverse(d.V, q_inf);
  const MatrixXd row = d.weight->vector().transpose() * vplus_inf;
  return lift2(row) * H_o;
}

MatrixXd cross_covariance_from_observable(const Decomposition& d, const EnsembleWeight& q_inf,
                                          const VectorXd& sigma1_sq, const MatrixXd& P_oo) {
  if (!d.is_eem()) {
    throw UnsupportedOperation("cross_covariance_from_observable: requires an EEM basis");
  }
  const auto n1 = static_cast<Eigen::Index>(d.N) - 1;
  if (sigma1_sq.size() != n1 + 1) {
    throw InvalidArgument("cross_covariance_from_observable: sigma1_sq must have N entries");
  }
  const MatrixXd vplus_inf = generalized_inverse(d.V, q_inf);
  const MatrixXd row = d.weight->vector().transpose() * vplus_inf;
  MatrixXd P = lift2(row) * P_oo;
  const VectorXd weighted = q_inf.vector().cwiseProduct(sigma1_sq);
  P.block(0, n1, 1, n1) -= (d.V * weighted).transpose();
  return P;
}

DecomposedEstimate stationary_kf_init(const Decomposition& d) {
  const auto m = static_cast<Eigen::Index>(d.observable_dim());
  DecomposedEstimate e;
  e.xi_o_prior = VectorXd::Zero(m);
  e.xi_o = VectorXd::Zero(m);
  return e;
}

void stationary_kf_update(const Decomposition& d, const StationaryGains& g,
                          DecomposedEstimate& est, const VectorXd& y) {
  check_vector(y, static_cast<Eigen::Index>(d.N) - 1,
               "stationary_kf_update: y must have N-1 entries");
  const VectorXd innovation = y - d.Co * est.xi_o_prior;
  est.xi_o = est.xi_o_prior + g.H_o_star * innovation;
  est.xi_obar = est.xi_obar_prior + g.H_bo_star * innovation;
}

DecomposedEstimate stationary_kf_step(const Decomposition& d, const StationaryGains& g,
                                      const DecomposedEstimate& est, const VectorXd& u_prev,
                                      const VectorXd& y) {
  DecomposedEstimate next = est;
  predict_estimate(d, next, u_prev);
  stationary_kf_update(d, g, next, y);
  return next;
}

void write_gains_json(std::ostream& os, const StationaryGains& g) {
  os << "{\n  \"P_oo_star\": ";
  write_matrix(os, g.P_oo_star);
  os << ",\n  \"P_bo_star\": ";
  write_matrix(os, g.P_bo_star);
  os << ",\n  \"H_o_star\": ";
  write_matrix(os, g.H_o_star);
  os << ",\n  \"H_bo_star\": ";
  write_matrix(os, g.H_bo_star);
  os << ",\n  \"residuals\": {\"P_oo\": " << csv::format_double(g.residual_oo)
     << ", \"P_bo\": " << csv::format_double(g.residual_bo) << "},\n  \"iterations\": "
     << g.iterations << "\n}\n";
}

namespace {

double increment_rel(const MatrixXd& now, const MatrixXd& before) {
  return relative_norm(now - before, now);
}

}  // namespace

StandardKFRun run_standard_kf(const EnsembleModel& truth, const EnsembleModel& filter_model,
                              std::size_t T, std::uint64_t seed, std::size_t increment_steps) {
  if (truth.N != filter_model.N) {
    throw InvalidArgument("run_standard_kf: truth and filter models differ in clock count");
  }
  const auto n = static_cast<Eigen::Index>(truth.N);
  const auto K = static_cast<Eigen::Index>(std::min(increment_steps, T));
  const NoiseSampler sampler(truth, seed);
  const VectorXd zero_u = VectorXd::Zero(n);

  StandardKFRun run;
  run.epsilon.resize(static_cast<Eigen::Index>(T));
  run.gain_increment_rel = VectorXd::Constant(K, std::numeric_limits<double>::quiet_NaN());
  run.prior_cov_increment = VectorXd::Constant(K, std::numeric_limits<double>::quiet_NaN());
  run.prior_cov_norm.resize(K);

  VectorXd x = VectorXd::Zero(2 * n);
  StandardKFState st = standard_kf_init(filter_model);
  for (std::size_t k = 0; k < T; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const VectorXd y = truth.bigC * x + sampler.measurement(k);
    StandardKFState next = standard_kf_step(filter_model, st, zero_u, y);
    run.epsilon(kk) = (x.head(n) - next.xhat.head(n)).mean();
    if (kk < K) {
      run.prior_cov_norm(kk) = next.P_minus.norm();
      if (k > 0) {
        run.gain_increment_rel(kk) = increment_rel(next.H, st.H);
        run.prior_cov_increment(kk) = (next.P_minus - st.P_minus).norm();
      }
    }
    st = std::move(next);
    x = step(truth, x, zero_u, sampler.process(k));
  }
  run.H_final = st.H;
  return run;
}

DeterminateKFRun run_determinate_kf(const EnsembleModel& truth, const Decomposition& d,
                                    std::size_t T, std::uint64_t seed,
                                    std::size_t increment_steps) {
  if (truth.N != d.N) {
    throw InvalidArgument("run_determinate_kf: model and decomposition differ in clock count");
  }
  const auto n = static_cast<Eigen::Index>(truth.N);
  const auto K = static_cast<Eigen::Index>(std::min(increment_steps, T));
  const NoiseSampler sampler(truth, seed);
  const VectorXd zero_u = VectorXd::Zero(n);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  DeterminateKFRun run;
  run.epsilon.resize(static_cast<Eigen::Index>(T));
  run.H_o_increment_rel = VectorXd::Constant(K, nan);
  run.P_oo_increment_rel = VectorXd::Constant(K, nan);
  run.H_bo_increment_rel = VectorXd::Constant(K, nan);
  run.P_bo_increment_rel = VectorXd::Constant(K, nan);

  VectorXd x = VectorXd::Zero(2 * n);
  DeterminateKFState st = determinate_kf_init(d);
  for (std::size_t k = 0; k < T; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const VectorXd y = truth.bigC * x + sampler.measurement(k);
    DeterminateKFState next = determinate_kf_step(d, truth.meas.R, st, zero_u, y);
    const VectorXd xhat = reconstruct_posterior(d, next.est);
    run.epsilon(kk) = (x.head(n) - xhat.head(n)).mean();
    if (kk < K && k > 0) {
      run.H_o_increment_rel(kk) = increment_rel(next.H_o, st.H_o);
      run.P_oo_increment_rel(kk) = increment_rel(next.P_oo_prior, st.P_oo_prior);
      run.H_bo_increment_rel(kk) = increment_rel(next.H_bo, st.H_bo);
      run.P_bo_increment_rel(kk) = increment_rel(next.P_bo_prior, st.P_bo_prior);
    }
    st = std::move(next);
    x = step(truth, x, zero_u, sampler.process(k));
  }
  run.final_state = std::move(st);
  return run;
}

StandardKFObserver::StandardKFObserver(EnsembleModel filter_model)
    : model_(std::move(filter_model)),
      state_(standard_kf_init(model_)),
      zero_(VectorXd::Zero(static_cast<Eigen::Index>(model_.N))) {}

VectorXd StandardKFObserver::input(std::size_t, const VectorXd& y) {
  state_ = standard_kf_step(model_, state_, zero_, y);
  return zero_;
}

}  // namespace eem
