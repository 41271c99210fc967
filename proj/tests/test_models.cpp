#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "eem/errors.hpp"
#include "eem/linalg.hpp"
#include "eem/models.hpp"
#include "eem/reference_ensemble.hpp"

using namespace eem;

namespace {

// Van Loan: exp([[-Ac, Qc], [0, Acᵀ]] τ) yields the discretized covariance
// without using the closed form.
Eigen::Matrix2d van_loan_q(double s1, double s2, double tau) {
  Eigen::Matrix2d Ac;
  Ac << 0, 1, 0, 0;
  Eigen::Matrix2d Qc = Eigen::Vector2d(s1 * s1, s2 * s2).asDiagonal();
  Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
  M.topLeftCorner<2, 2>() = -Ac;
  M.topRightCorner<2, 2>() = Qc;
  M.bottomRightCorner<2, 2>() = Ac.transpose();
  const Eigen::Matrix4d E = (M * tau).exp();
  const Eigen::Matrix2d Phi = E.bottomRightCorner<2, 2>().transpose();
  return Phi * E.topRightCorner<2, 2>();
}

// Composite Simpson on ∫₀^τ e^{Ac s} Qc e^{Acᵀ s} ds.
Eigen::Matrix2d quadrature_q(double s1, double s2, double tau) {
  const int n = 200;
  const double h = tau / n;
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  for (int i = 0; i <= n; ++i) {
    const double s = i * h;
    Eigen::Matrix2d E;
    E << 1, s, 0, 1;
    const Eigen::Matrix2d f = E * Eigen::Vector2d(s1 * s1, s2 * s2).asDiagonal() * E.transpose();
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * f;
  }
  return acc * h / 3.0;
}

}  // namespace

TEST(Discretize, WhiteFrequencyOnly) {
  const auto m = discretize({1.0, 0.0}, 1.0);
  EXPECT_EQ(m.Q, (Eigen::Matrix2d() << 1, 0, 0, 0).finished());
  EXPECT_EQ(m.A, (Eigen::Matrix2d() << 1, 1, 0, 1).finished());
  EXPECT_EQ(m.B, Eigen::Vector2d(1, 1));
  EXPECT_EQ(m.C, Eigen::RowVector2d(1, 0));
}

TEST(Discretize, RandomWalkOnly) {
  const auto m = discretize({0.0, 1.0}, 1.0);
  EXPECT_DOUBLE_EQ(m.Q(0, 0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.Q(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(m.Q(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(m.Q(1, 1), 1.0);
}

TEST(Discretize, ReferenceClockOne) {
  const auto m = discretize({0.17e-9, 0.1507e-12}, 1.0);
  const double expected = 0.17e-9 * 0.17e-9 + 0.1507e-12 * 0.1507e-12 / 3.0;
  EXPECT_NEAR(m.Q(0, 0), expected, 1e-15 * expected);
  EXPECT_NEAR(m.Q(0, 0), 2.89e-20, 0.01e-20);
}

TEST(Discretize, RejectsNonPositiveTau) {
  EXPECT_THROW(discretize({1.0, 1.0}, 0.0), InvalidArgument);
  EXPECT_THROW(discretize({1.0, 1.0}, -1.0), InvalidArgument);
}

TEST(Discretize, RejectsInvalidNoise) {
  EXPECT_THROW(discretize({0.0, 0.0}, 1.0), InvalidArgument);
  EXPECT_THROW(discretize({-1.0, 1.0}, 1.0), InvalidArgument);
}

TEST(Discretize, MatchesVanLoanAndQuadratureOnGrid) {
  const double s1s[] = {1e-12, 1e-10, 3e-9, 0.5, 2.0};
  const double s2s[] = {1e-15, 1e-13, 1e-11, 0.1, 1.5};
  const double taus[] = {1e-3, 0.1, 1.0, 60.0, 1e3};
  for (double s1 : s1s) {
    for (double s2 : s2s) {
      for (double tau : taus) {
        const auto Q = discretize({s1, s2}, tau).Q;
        const auto ref = van_loan_q(s1, s2, tau);
        const auto quad = quadrature_q(s1, s2, tau);
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            EXPECT_NEAR(Q(i, j), quad(i, j), 1e-9 * std::abs(quad(i, j)))
                << s1 << " " << s2 << " " << tau;
          }
        }
        EXPECT_LT((Q - ref).norm(), 1e-9 * ref.norm());
      }
    }
  }
}

TEST(StarMeasurement, SmallCases) {
  EXPECT_EQ(star_measurement(2), (MatrixXd(1, 2) << 1, -1).finished());
  EXPECT_EQ(star_measurement(3), (MatrixXd(2, 3) << 1, 0, -1, 0, 1, -1).finished());
  EXPECT_THROW(star_measurement(1), InvalidArgument);
}

TEST(StarMeasurement, AnnihilatesOnesAndHasFullRank) {
  for (std::size_t n = 2; n <= 12; ++n) {
    const MatrixXd V = star_measurement(n);
    EXPECT_EQ((V * ones(n)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(numerical_rank(V), n - 1);
    EXPECT_TRUE(is_star_measurement(V));
  }
}

TEST(BuildEnsemble, TwoClockWhiteOnly) {
  const std::vector<NoiseParams> p{{1.0, 0.0}, {1.0, 0.0}};
  const auto m = build_ensemble(p, star_measurement(2), MatrixXd::Identity(1, 1), 1.0);
  Eigen::VectorXd d(4);
  d << 1, 1, 0, 0;
  EXPECT_EQ(m.bigQ, MatrixXd(d.asDiagonal()));
}

TEST(BuildEnsemble, ReferenceModelIsValid) {
  const auto m = reference::ensemble(1.0);
  EXPECT_EQ(m.N, 10u);
  EXPECT_EQ(m.bigA.rows(), 20);
  EXPECT_EQ(m.bigC.rows(), 9);
  EXPECT_TRUE(is_symmetric_positive_definite(m.bigQ));
  EXPECT_NEAR(m.meas.R(0, 0), 0.4353e-14 * 0.4353e-14, 1e-45);
}

TEST(BuildEnsemble, BlockStructureMatchesKronecker) {
  const auto m = reference::ensemble_subset(4, 2.5);
  const MatrixXd I = MatrixXd::Identity(4, 4);
  EXPECT_EQ(m.bigA, kron(m.A(), I));
  EXPECT_EQ(m.bigB, kron(m.B(), I));
  EXPECT_EQ(m.bigC, kron(Eigen::RowVector2d(1, 0), m.meas.V));
  for (Eigen::Index i = 0; i < 4; ++i) {
    const auto q = discretize({std::sqrt(m.sigma1_sq(i)), std::sqrt(m.sigma2_sq(i))}, 2.5).Q;
    EXPECT_DOUBLE_EQ(m.bigQ(i, i), q(0, 0));
    EXPECT_DOUBLE_EQ(m.bigQ(i, i + 4), q(0, 1));
    EXPECT_DOUBLE_EQ(m.bigQ(i + 4, i + 4), q(1, 1));
  }
}

TEST(BuildEnsemble, SynchronizedSubspaceIsUnobservable) {
  const auto m = reference::ensemble(1.0);
  const MatrixXd basis = lift2(ones(m.N));
  EXPECT_EQ((m.bigC * basis).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((m.bigC * m.bigA * basis).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BuildEnsemble, QCholeskySucceeds) {
  const auto m = reference::ensemble(1.0);
  const MatrixXd L = psd_cholesky(m.bigQ);
  EXPECT_LT((L * L.transpose() - m.bigQ).norm(), 1e-12 * m.bigQ.norm());
}

TEST(BuildEnsemble, RejectsNonZeroRowSum) {
  const std::vector<NoiseParams> p{{1.0, 1.0}, {1.0, 1.0}};
  try {
    build_ensemble(p, (MatrixXd(1, 2) << 1, 1).finished(), MatrixXd::Identity(1, 1), 1.0);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("V"), std::string::npos);
  }
}

TEST(BuildEnsemble, RejectsRankDeficientV) {
  const std::vector<NoiseParams> p(3, {1.0, 1.0});
  MatrixXd V(2, 3);
  V << 1, -1, 0, 2, -2, 0;
  EXPECT_THROW(build_ensemble(p, V, MatrixXd::Identity(2, 2), 1.0), InvalidArgument);
}

TEST(BuildEnsemble, RejectsBadR) {
  const std::vector<NoiseParams> p(3, {1.0, 1.0});
  MatrixXd R(2, 2);
  R << 1, 2, 2, 1;
  EXPECT_THROW(build_ensemble(p, star_measurement(3), R, 1.0), InvalidArgument);
  EXPECT_THROW(build_ensemble(p, star_measurement(3), MatrixXd::Identity(3, 3), 1.0),
               InvalidArgument);
}

TEST(BuildEnsemble, RejectsDimensionMismatch) {
  const std::vector<NoiseParams> p(3, {1.0, 1.0});
  EXPECT_THROW(build_ensemble(p, star_measurement(4), MatrixXd::Identity(3, 3), 1.0),
               InvalidArgument);
}

TEST(EnsembleWeight, NormalizationEnforced) {
  Eigen::VectorXd q(3);
  q << 0.3, 0.3, 0.3;
  try {
    EnsembleWeight w(q);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("q^T 1 = 1"), std::string::npos);
  }
  EXPECT_NO_THROW(EnsembleWeight::uniform(7));
  const auto e = EnsembleWeight::unit(4, 3);
  EXPECT_EQ(e[3], 1.0);
  EXPECT_EQ(e[0], 0.0);
}

TEST(EnsembleWeight, RandomWeightsWithUnitSumAccepted) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd q(6);
    for (auto& v : q) v = g(rng);
    q /= q.sum();
    EXPECT_NO_THROW(EnsembleWeight w(q));
  }
}
