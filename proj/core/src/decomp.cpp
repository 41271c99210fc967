#include "eem/decomp.hpp"

#include <algorithm>
#include <cmath>

#include "eem/errors.hpp"

namespace eem {
namespace {

constexpr double kStructureTol = 1e-10;

MatrixXd stacked_solve(const MatrixXd& stacked, const MatrixXd& rhs, const char* what) {
  Eigen::FullPivLU<MatrixXd> lu(stacked);
  if (!lu.isInvertible()) throw InvalidArgument(what);
  return lu.solve(rhs);
}

void fill_common(Decomposition& d, const EnsembleModel& model) {
  const auto n = static_cast<Eigen::Index>(model.N);
  const MatrixXd eye_o = MatrixXd::Identity(n - 1, n - 1);
  d.N = model.N;
  d.tau = model.tau;
  d.A = model.A();
  d.B = model.B();
  d.V = model.meas.V;
  d.Ao = kron(d.A, eye_o);
  d.Bo = kron(d.B, eye_o);
  d.Co = kron(Eigen::RowVector2d(1.0, 0.0), eye_o);

  const MatrixXd lv = lift2(d.V);
  d.T.resize(2 * n, 2 * n);
  d.T << lv, d.Ubar;
  d.Tinv.resize(2 * n, 2 * n);
  d.Tinv << d.U, lift2(ones(model.N));

  d.Qo = symmetrize(lv * model.bigQ * lv.transpose());
  d.Qbo = d.Ubar * model.bigQ * lv.transpose();
  d.Bo_in = lv * model.bigB;
  d.Bbo_in = d.Ubar * model.bigB;

  const MatrixXd identity = MatrixXd::Identity(2 * n, 2 * n);
  if ((d.T * d.Tinv - identity).cwiseAbs().maxCoeff() > kStructureTol) {
    throw NumericalError("decompose: T * Tinv deviates from identity");
  }
}

}  // namespace

MatrixXd generalized_inverse(const MatrixXd& V, const EnsembleWeight& q) {
  const Eigen::Index n = V.cols();
  if (V.rows() != n - 1 || static_cast<Eigen::Index>(q.size()) != n) {
    throw InvalidArgument("generalized_inverse: V must be (N-1)xN and q must have N entries");
  }
  MatrixXd stacked(n, n);
  stacked << V, q.vector().transpose();
  MatrixXd rhs = MatrixXd::Zero(n, n - 1);
  rhs.topRows(n - 1).setIdentity();
  const MatrixXd solved = stacked_solve(
      stacked, rhs,
      "generalized_inverse: [V; q^T] is singular (q^T annihilates the complement of ker V)");

  if (!is_star_measurement(V)) return solved;

  MatrixXd closed = MatrixXd::Zero(n, n - 1);
  closed.topRows(n - 1).setIdentity();
  for (Eigen::Index j = 0; j < n - 1; ++j) closed.col(j).array() -= q.vector()(j);
  const double scale = std::max(1.0, solved.cwiseAbs().maxCoeff());
  if ((closed - solved).cwiseAbs().maxCoeff() > kStructureTol * scale) {
    throw NumericalError("generalized_inverse: closed form disagrees with the linear solve");
  }
  return closed;
}

Decomposition decompose(const EnsembleModel& model, const EnsembleWeight& q) {
  if (q.size() != model.N) {
    throw InvalidArgument("decompose: weight length must equal the clock count");
  }
  Decomposition d;
  d.kind = BasisKind::ensemble_mean;
  d.weight = q;
  d.Vplus = generalized_inverse(model.meas.V, q);
  d.U = lift2(d.Vplus);
  d.Ubar = lift2(q.vector().transpose());
  d.Wbar = d.Ubar;
  fill_common(d, model);
  // (I₂⊗qᵀ)(A⊗I)(I₂⊗V⁺) = A ⊗ qᵀV⁺ = 0
  d.coupling = MatrixXd::Zero(2, d.Ao.cols());
  return d;
}

Decomposition decompose(const EnsembleModel& model, const MatrixXd& Wbar) {
  const auto n = static_cast<Eigen::Index>(model.N);
  if (Wbar.rows() != 2 || Wbar.cols() != 2 * n) {
    throw InvalidArgument("decompose: Wbar must be 2 x 2N");
  }
  if (numerical_rank(Wbar) != 2) {
    throw InvalidArgument("decompose: Wbar must have full row rank 2");
  }
  const MatrixXd mean_image = Wbar * lift2(ones(model.N));
  Eigen::FullPivLU<MatrixXd> mean_lu(mean_image);
  if (!mean_lu.isInvertible()) {
    throw InvalidArgument("decompose: Wbar (I2 kron 1_N) must be nonsingular");
  }
  MatrixXd stacked(2 * n, 2 * n);
  stacked << lift2(model.meas.V), Wbar;
  MatrixXd rhs = MatrixXd::Zero(2 * n, 2 * (n - 1));
  rhs.topRows(2 * (n - 1)).setIdentity();

  Decomposition d;
  d.kind = BasisKind::general;
  d.Wbar = Wbar;
  // U spans ker W̄ and satisfies (I₂⊗V) U = I.
  d.U = stacked_solve(stacked, rhs,
                      "decompose: ker Wbar and im(I2 kron 1_N) do not span R^{2N}");
  d.Ubar = mean_lu.solve(Wbar);
  fill_common(d, model);
  d.coupling = d.Ubar * model.bigA * d.U;
  return d;
}

ProjectedState project_state(const VectorXd& x, const Decomposition& d) {
  const auto n = static_cast<Eigen::Index>(d.N);
  if (x.size() != 2 * n) throw InvalidArgument("project_state: state must have 2N entries");
  ProjectedState p;
  p.xi_o.resize(2 * (n - 1));
  p.xi_o.head(n - 1) = d.V * x.head(n);
  p.xi_o.tail(n - 1) = d.V * x.tail(n);
  p.xi_obar = d.Ubar * x;
  return p;
}

VectorXd reconstruct_state(const VectorXd& xi_o, const Eigen::Vector2d& xi_obar,
                           const Decomposition& d) {
  const auto n = static_cast<Eigen::Index>(d.N);
  if (xi_o.size() != 2 * (n - 1)) {
    throw InvalidArgument("reconstruct_state: observable part must have 2(N-1) entries");
  }
  VectorXd x = d.U * xi_o;
  x.head(n).array() += xi_obar(0);
  x.tail(n).array() += xi_obar(1);
  return x;
}

VectorXd expand_input(const VectorXd& omega_o, double omega_obar, const Decomposition& d) {
  if (!d.is_eem()) {
    throw UnsupportedOperation("expand_input: requires an explicit ensemble mean basis");
  }
  if (omega_o.size() != static_cast<Eigen::Index>(d.N) - 1) {
    throw InvalidArgument("expand_input: omega_o must have N-1 entries");
  }
  VectorXd u = d.Vplus * omega_o;
  u.array() += omega_obar;
  return u;
}

DecomposedInput decompose_input(const VectorXd& u, const Decomposition& d) {
  if (!d.is_eem()) {
    throw UnsupportedOperation("decompose_input: requires an explicit ensemble mean basis");
  }
  if (u.size() != static_cast<Eigen::Index>(d.N)) {
    throw InvalidArgument("decompose_input: u must have N entries");
  }
  return {d.V * u, d.weight->vector().dot(u)};
}

}  // namespace eem
