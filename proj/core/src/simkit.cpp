#include "eem/simkit.hpp"

#include <cmath>
#include <string>
#include <numbers>
#include <ostream>
#include <vector>

#include "eem/csv.hpp"
#include "eem/errors.hpp"

namespace eem {
namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform on the open interval (0, 1).
inline double to_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

constexpr std::uint64_t kProcessStream = 1;
constexpr std::uint64_t kMeasurementStream = 2;

}  // namespace

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed + kGamma) ^ (stream * 0xD1B54A32D192ED03ULL))) {}

void NormalStream::fill(std::uint64_t k, std::span<double> out) const {
  const std::uint64_t pairs = (out.size() + 1) / 2;
  // Two counters per pair; every step owns a disjoint counter range.
  std::uint64_t counter = k * 2 * pairs;
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const double u1 = to_unit(mix64(key_ + (counter++) * kGamma));
    const double u2 = to_unit(mix64(key_ + (counter++) * kGamma));
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[i] = radius * std::cos(angle);
    if (i + 1 < out.size()) out[i + 1] = radius * std::sin(angle);
  }
}

NoiseSampler::NoiseSampler(const EnsembleModel& model, std::uint64_t seed)
    : chol_q_(psd_cholesky(model.bigQ)),
      chol_r_(psd_cholesky(model.meas.R)),
      seed_(seed),
      process_stream_(seed, kProcessStream),
      measurement_stream_(seed, kMeasurementStream) {}

VectorXd NoiseSampler::process(std::uint64_t k) const {
  VectorXd z(chol_q_.rows());
  process_stream_.fill(k, {z.data(), static_cast<std::size_t>(z.size())});
  return chol_q_.triangularView<Eigen::Lower>() * z;
}

VectorXd NoiseSampler::measurement(std::uint64_t k) const {
  VectorXd z(chol_r_.rows());
  measurement_stream_.fill(k, {z.data(), static_cast<std::size_t>(z.size())});
  return chol_r_.triangularView<Eigen::Lower>() * z;
}

VectorXd step(const EnsembleModel& model, const VectorXd& x, const VectorXd& u,
              const VectorXd& v) {
  const auto n = static_cast<Eigen::Index>(model.N);
  if (x.size() != 2 * n || v.size() != 2 * n || u.size() != n) {
    throw InvalidArgument("step: dimension mismatch with ensemble model");
  }
  // bigA x = [x1 + tau x2; x2], bigB u = [tau u; u]
  VectorXd next(2 * n);
  next.head(n) = x.head(n) + model.tau * (x.tail(n) + u) + v.head(n);
  next.tail(n) = x.tail(n) + u + v.tail(n);
  return next;
}

TrajectoryRecord simulate(const EnsembleModel& model, ControlPolicy& policy, std::size_t T,
                          const SimulationOptions& options) {
  if (T < 1) throw InvalidArgument("simulate: horizon T must be at least 1");
  const auto n = static_cast<Eigen::Index>(model.N);
  const auto cols = static_cast<Eigen::Index>(T);

  VectorXd x = VectorXd::Zero(2 * n);
  if (options.x0) {
    if (options.x0->size() != 2 * n) throw InvalidArgument("simulate: x0 must have 2N entries");
    x = *options.x0;
  }

  NoiseSampler sampler(model, options.seed);

  TrajectoryRecord rec;
  rec.N = model.N;
  rec.T = T;
  rec.tau = model.tau;
  rec.h.resize(n, cols + 1);
  if (options.record_states) rec.x.resize(2 * n, cols + 1);
  if (options.record_measurements) rec.y.resize(n - 1, cols);
  if (options.record_inputs) rec.u.resize(n, cols);
  if (options.record_estimates) rec.xhat.resize(2 * n, cols);

  const VectorXd zero_v = VectorXd::Zero(2 * n);
  for (std::size_t k = 0; k < T; ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    rec.h.col(col) = x.head(n);
    if (options.record_states) rec.x.col(col) = x;

    VectorXd y = model.bigC * x;
    if (options.measurement_noise) y += sampler.measurement(k);
    if (options.record_measurements) rec.y.col(col) = y;

    const VectorXd u = policy.input(k, y);
    if (u.size() != n) {
      throw InvalidArgument("simulate: policy returned an input of dimension " +
                            std::to_string(u.size()) + ", expected " + std::to_string(n));
    }
    if (options.record_inputs) rec.u.col(col) = u;
    if (options.record_estimates) {
      auto est = policy.estimate();
      if (!est || est->size() != 2 * n) {
        throw InvalidArgument("simulate: estimates requested but policy provides none");
      }
      rec.xhat.col(col) = *est;
    }

    x = step(model, x, u, options.process_noise ? sampler.process(k) : zero_v);
  }
  rec.h.col(cols) = x.head(n);
  if (options.record_states) rec.x.col(cols) = x;
  return rec;
}

VectorXd digital_imitation(const DiscreteClockModel& model, const VectorXd& u) {
  VectorXd adjust(u.size());
  Eigen::Vector2d eps = Eigen::Vector2d::Zero();
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    adjust(k) = model.C * eps;
    eps = model.A * eps + model.B * u(k);
  }
  return adjust;
}

VectorXd reference_timescale(const MatrixXd& e, std::size_t N) {
  const auto n = static_cast<Eigen::Index>(N);
  if (N == 0 || e.rows() != 2 * n) {
    throw InvalidArgument("reference_timescale: error series must have 2N rows");
  }
  return e.topRows(n).colwise().mean().transpose();
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& record,
                          bool include_estimates) {
  const auto n = static_cast<Eigen::Index>(record.N);
  const bool with_u = record.u.cols() > 0;
  const bool with_est = include_estimates && record.has_estimates();

  std::vector<std::string> header{"k"};
  for (Eigen::Index i = 1; i <= n; ++i) header.push_back("h_" + std::to_string(i));
  for (Eigen::Index i = 1; i <= n; ++i) header.push_back("u_" + std::to_string(i));
  if (with_est) {
    for (Eigen::Index i = 1; i <= 2 * n; ++i) header.push_back("xhat_" + std::to_string(i));
  }
  csv::write_header(os, header);

  for (std::size_t k = 0; k <= record.T; ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    os << k;
    for (Eigen::Index i = 0; i < n; ++i) csv::write_field(os, record.h(i, col));
    const bool last = k == record.T;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (with_u && !last) {
        csv::write_field(os, record.u(i, col));
      } else {
        os << ',';
      }
    }
    if (with_est) {
      for (Eigen::Index i = 0; i < 2 * n; ++i) {
        if (!last) {
          csv::write_field(os, record.xhat(i, col));
        } else {
          os << ',';
        }
      }
    }
    os << '\n';
  }
}

}  // namespace eem
