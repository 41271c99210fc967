#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "eem/errors.hpp"
#include "eem/reference_ensemble.hpp"
#include "eem/simkit.hpp"

using namespace eem;

namespace {

class ConstantPolicy final : public ControlPolicy {
 public:
  explicit ConstantPolicy(VectorXd u) : u_(std::move(u)) {}
  VectorXd input(std::size_t, const VectorXd&) override { return u_; }

 private:
  VectorXd u_;
};

class WrongSizePolicy final : public ControlPolicy {
 public:
  VectorXd input(std::size_t, const VectorXd&) override { return VectorXd::Zero(1); }
};

}  // namespace

TEST(NormalStream, ReplayableAndIndependent) {
  const NormalStream a(42, 1), b(42, 1), c(42, 2), d(43, 1);
  std::vector<double> x(5), y(5), z(5), w(5);
  a.fill(1000, x);
  b.fill(1000, y);
  c.fill(1000, z);
  d.fill(1000, w);
  EXPECT_EQ(x, y);
  EXPECT_NE(x, z);
  EXPECT_NE(x, w);
  std::vector<double> x2(5);
  a.fill(1001, x2);
  EXPECT_NE(x, x2);
}

TEST(NormalStream, MomentsAreStandardNormal) {
  const NormalStream s(7, 1);
  std::vector<double> buf(4);
  double sum = 0, sq = 0, quart = 0;
  const int steps = 50000;
  for (int k = 0; k < steps; ++k) {
    s.fill(static_cast<std::uint64_t>(k), buf);
    for (double v : buf) {
      sum += v;
      sq += v * v;
      quart += v * v * v * v;
    }
  }
  const double n = 4.0 * steps;
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
  EXPECT_NEAR(quart / n, 3.0, 0.06);
}

TEST(NoiseSampler, EmpiricalCovarianceMatchesQ) {
  const auto model = reference::ensemble_subset(3, 1.0);
  const NoiseSampler s(model, 11);
  MatrixXd acc = MatrixXd::Zero(6, 6);
  const int n = 60000;
  for (int k = 0; k < n; ++k) {
    const VectorXd v = s.process(static_cast<std::uint64_t>(k));
    acc += v * v.transpose();
  }
  acc /= n;
  for (Eigen::Index i = 0; i < 6; ++i) {
    EXPECT_NEAR(acc(i, i) / model.bigQ(i, i), 1.0, 0.03);
  }
  // phase/frequency correlation of each clock
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double rho = model.bigQ(i, i + 3) / std::sqrt(model.bigQ(i, i) * model.bigQ(i + 3, i + 3));
    const double emp = acc(i, i + 3) / std::sqrt(acc(i, i) * acc(i + 3, i + 3));
    EXPECT_NEAR(emp, rho, 0.02);
  }
}

TEST(Step, MatchesDenseForm) {
  const auto model = reference::ensemble_subset(4, 3.0);
  VectorXd x = VectorXd::LinSpaced(8, -1, 2);
  VectorXd u = VectorXd::LinSpaced(4, 0.5, -0.5);
  VectorXd v = VectorXd::LinSpaced(8, 0.1, 0.2);
  const VectorXd dense = model.bigA * x + model.bigB * u + v;
  EXPECT_LT((step(model, x, u, v) - dense).norm(), 1e-14);
  EXPECT_THROW(step(model, x, VectorXd::Zero(3), v), InvalidArgument);
}

TEST(Simulate, DeterministicForSeed) {
  const auto model = reference::ensemble_subset(3, 1.0);
  FreeRunPolicy p1(3), p2(3);
  SimulationOptions o;
  o.seed = 99;
  const auto a = simulate(model, p1, 200, o);
  const auto b = simulate(model, p2, 200, o);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  o.seed = 100;
  FreeRunPolicy p3(3);
  const auto c = simulate(model, p3, 200, o);
  EXPECT_NE(a.x, c.x);
}

TEST(Simulate, TimingConventionAndNoiseReplay) {
  const auto model = reference::ensemble_subset(3, 1.0);
  FreeRunPolicy p(3);
  SimulationOptions o;
  o.seed = 5;
  const auto rec = simulate(model, p, 50, o);
  const NoiseSampler s(model, 5);
  for (Eigen::Index k = 0; k < 50; ++k) {
    const auto kk = static_cast<std::uint64_t>(k);
    const VectorXd y = model.bigC * rec.x.col(k) + s.measurement(kk);
    EXPECT_LT((y - rec.y.col(k)).norm(), 1e-25);
    const VectorXd next = step(model, rec.x.col(k), VectorXd::Zero(3), s.process(kk));
    EXPECT_EQ(next, rec.x.col(k + 1));
  }
  EXPECT_EQ(rec.h, rec.x.topRows(3));
}

TEST(Simulate, NoiselessConstantInputIsDeterministicRamp) {
  const auto model = reference::ensemble_subset(2, 2.0);
  ConstantPolicy p(VectorXd::Constant(2, 1.0));
  SimulationOptions o;
  o.process_noise = false;
  o.measurement_noise = false;
  const auto rec = simulate(model, p, 10, o);
  // frequency grows by 1 per step, phase by τ(x2 + u)
  EXPECT_DOUBLE_EQ(rec.x(2, 10), 10.0);
  double phase = 0, freq = 0;
  for (int k = 0; k < 10; ++k) {
    phase += 2.0 * (freq + 1.0);
    freq += 1.0;
  }
  EXPECT_DOUBLE_EQ(rec.x(0, 10), phase);
}

TEST(Simulate, RejectsBadPolicy) {
  const auto model = reference::ensemble_subset(3, 1.0);
  WrongSizePolicy p;
  EXPECT_THROW(simulate(model, p, 10), InvalidArgument);
  FreeRunPolicy f(3);
  EXPECT_THROW(simulate(model, f, 0), InvalidArgument);
}

TEST(DigitalImitation, ReproducesPhysicalInputReadings) {
  const auto single = discretize({1e-10, 1e-12}, 1.0);
  const auto model = reference::ensemble_subset(2, 1.0);
  VectorXd u(30);
  for (Eigen::Index k = 0; k < u.size(); ++k) u(k) = std::sin(0.3 * static_cast<double>(k)) * 1e-12;

  // driven clock 1 vs free clock 1 plus adjustments on the same noise
  class Seq final : public ControlPolicy {
   public:
    explicit Seq(const VectorXd& u) : u_(u) {}
    VectorXd input(std::size_t k, const VectorXd&) override {
      VectorXd v = VectorXd::Zero(2);
      v(0) = u_(static_cast<Eigen::Index>(k));
      return v;
    }
    const VectorXd& u_;
  } driven(u);
  FreeRunPolicy free(2);
  SimulationOptions o;
  o.seed = 8;
  const auto a = simulate(model, driven, 30, o);
  const auto b = simulate(model, free, 30, o);
  const VectorXd adj = digital_imitation(single, u);
  for (Eigen::Index k = 0; k < 30; ++k) {
    EXPECT_NEAR(a.h(0, k), b.h(0, k) + adj(k), 1e-24);
  }
}

TEST(ReferenceTimescale, MeanOfPhaseBlock) {
  MatrixXd e(4, 2);
  e << 1, 2, 3, 4, 100, 100, 100, 100;
  const VectorXd r = reference_timescale(e, 2);
  EXPECT_DOUBLE_EQ(r(0), 2.0);
  EXPECT_DOUBLE_EQ(r(1), 3.0);
  EXPECT_THROW(reference_timescale(e, 3), InvalidArgument);
}

TEST(TrajectoryCsv, HeaderAndFinalRow) {
  const auto model = reference::ensemble_subset(2, 1.0);
  FreeRunPolicy p(2);
  const auto rec = simulate(model, p, 3);
  std::ostringstream os;
  write_trajectory_csv(os, rec);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "k,h_1,h_2,u_1,u_2");
  int rows = 0;
  std::string last;
  while (std::getline(is, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(last.substr(last.size() - 2), ",,");
}
