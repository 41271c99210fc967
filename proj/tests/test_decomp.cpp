#include <gtest/gtest.h>

#include <random>

#include "eem/decomp.hpp"
#include "eem/errors.hpp"
#include "eem/linalg.hpp"
#include "eem/reference_ensemble.hpp"

using namespace eem;

namespace {

EnsembleWeight random_weight(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  VectorXd q(static_cast<Eigen::Index>(n));
  for (auto& v : q) v = u(rng);
  return EnsembleWeight(q / q.sum());
}

MatrixXd random_wbar(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatrixXd W(2, 2 * static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = g(rng);
  return W;
}

}  // namespace

TEST(GeneralizedInverse, DefiningProperties) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {2u, 3u, 5u, 10u}) {
    const MatrixXd V = star_measurement(n);
    const auto q = random_weight(n, rng);
    const MatrixXd Vp = generalized_inverse(V, q);
    const auto n1 = static_cast<Eigen::Index>(n) - 1;
    EXPECT_LT((V * Vp - MatrixXd::Identity(n1, n1)).norm(), 1e-14);
    EXPECT_LT((q.vector().transpose() * Vp).norm(), 1e-15);
  }
}

TEST(GeneralizedInverse, StarClosedFormByHand) {
  Eigen::VectorXd qv(3);
  qv << 0.2, 0.3, 0.5;
  const MatrixXd Vp = generalized_inverse(star_measurement(3), EnsembleWeight(qv));
  MatrixXd expected(3, 2);
  expected << 0.8, -0.3, -0.2, 0.7, -0.2, -0.3;
  EXPECT_LT((Vp - expected).norm(), 1e-15);
}

TEST(GeneralizedInverse, NonStarMeasurement) {
  MatrixXd V(2, 3);
  V << 1, -1, 0, 0, 1, -1;  // chain of pairs
  const auto q = EnsembleWeight::uniform(3);
  const MatrixXd Vp = generalized_inverse(V, q);
  EXPECT_LT((V * Vp - MatrixXd::Identity(2, 2)).norm(), 1e-14);
  EXPECT_LT((q.vector().transpose() * Vp).norm(), 1e-15);
}

TEST(Decompose, EemStructure) {
  const auto model = reference::ensemble(1.0);
  std::mt19937_64 rng(2);
  const auto q = random_weight(10, rng);
  const auto d = decompose(model, q);
  EXPECT_TRUE(d.is_eem());
  EXPECT_EQ(d.coupling.cwiseAbs().maxCoeff(), 0.0);
  // computed coupling also vanishes
  EXPECT_LT((d.Ubar * model.bigA * d.U).norm(), 1e-14);
  EXPECT_LT((d.T * d.Tinv - MatrixXd::Identity(20, 20)).norm(), 1e-12);
  // transformed system matrices
  const MatrixXd At = d.T * model.bigA * d.Tinv;
  EXPECT_LT((At.topLeftCorner(18, 18) - d.Ao).norm(), 1e-12);
  EXPECT_LT(At.topRightCorner(18, 2).norm(), 1e-12);
  EXPECT_LT((At.bottomRightCorner(2, 2) - d.A).norm(), 1e-12);
  const MatrixXd Ct = model.bigC * d.Tinv;
  EXPECT_LT((Ct.leftCols(18) - d.Co).norm(), 1e-12);
  EXPECT_LT(Ct.rightCols(2).norm(), 1e-12);
  // Bo_in = Bo V, Bbo_in = B qᵀ
  EXPECT_LT((d.Bo_in - d.Bo * model.meas.V).norm(), 1e-14);
  EXPECT_LT((d.Bbo_in - d.B * q.vector().transpose()).norm(), 1e-14);
}

TEST(Decompose, GeneralBasisStructure) {
  std::mt19937_64 rng(3);
  for (std::size_t n : {2u, 3u, 5u}) {
    const auto model = reference::ensemble_subset(n, 1.0);
    const MatrixXd W = random_wbar(n, rng);
    const auto d = decompose(model, W);
    EXPECT_FALSE(d.is_eem());
    const auto m = static_cast<Eigen::Index>(2 * n);
    EXPECT_LT((d.T * d.Tinv - MatrixXd::Identity(m, m)).norm(), 1e-10);
    EXPECT_LT((W * d.U).norm(), 1e-12);
    const MatrixXd At = d.T * model.bigA * d.Tinv;
    EXPECT_LT((At.bottomLeftCorner(2, m - 2) - d.coupling).norm(), 1e-10);
    EXPECT_LT(At.topRightCorner(m - 2, 2).norm(), 1e-10);
    EXPECT_GT(d.coupling.norm(), 1e-6);
  }
}

TEST(Decompose, RejectsBadWbar) {
  const auto model = reference::ensemble_subset(3, 1.0);
  MatrixXd rank1(2, 6);
  rank1 << 1, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0;
  EXPECT_THROW(decompose(model, rank1), InvalidArgument);
  // Wbar annihilates the synchronized direction of the phase block
  MatrixXd sing(2, 6);
  sing << 1, -1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0;
  EXPECT_THROW(decompose(model, sing), InvalidArgument);
  EXPECT_THROW(decompose(model, MatrixXd::Ones(2, 4)), InvalidArgument);
  EXPECT_THROW(decompose(model, EnsembleWeight::uniform(4)), InvalidArgument);
}

TEST(Decompose, ProjectReconstructRoundTrip) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  const auto model = reference::ensemble_subset(5, 1.0);
  const auto eem = decompose(model, random_weight(5, rng));
  const auto gen = decompose(model, random_wbar(5, rng));
  for (int t = 0; t < 20; ++t) {
    VectorXd x(10);
    for (auto& v : x) v = g(rng);
    for (const auto* d : {&eem, &gen}) {
      const auto p = project_state(x, *d);
      EXPECT_LT((reconstruct_state(p.xi_o, p.xi_obar, *d) - x).norm(), 1e-10 * x.norm());
    }
  }
}

TEST(Decompose, InputExpansion) {
  std::mt19937_64 rng(5);
  const auto model = reference::ensemble_subset(4, 1.0);
  const auto q = random_weight(4, rng);
  const auto d = decompose(model, q);
  VectorXd wo(3);
  wo << 0.1, -0.2, 0.3;
  const VectorXd u = expand_input(wo, 0.7, d);
  const auto back = decompose_input(u, d);
  EXPECT_LT((back.omega_o - wo).norm(), 1e-14);
  EXPECT_NEAR(back.omega_obar, 0.7, 1e-14);
  EXPECT_EQ(expand_input(VectorXd::Zero(3), 0.0, d), VectorXd::Zero(4));
  const auto gen = decompose(model, random_wbar(4, rng));
  EXPECT_THROW(expand_input(wo, 0.0, gen), UnsupportedOperation);
  EXPECT_THROW(expand_input(VectorXd::Zero(2), 0.0, d), InvalidArgument);
}

TEST(Decompose, SteeringWeightZeroesLastInput) {
  const auto model = reference::ensemble(1.0);
  const auto d = decompose(model, EnsembleWeight::unit(10, 9));
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    VectorXd wo(9);
    for (auto& v : wo) v = g(rng);
    EXPECT_EQ(expand_input(wo, 0.0, d)(9), 0.0);
  }
}
