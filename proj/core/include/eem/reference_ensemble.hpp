#pragma once

// Ten-clock ensemble used by the bundled scenarios and the test suites.
// Measurement pairs are (i, 10) for i = 1..9, i.e. the star measurement matrix.

#include <array>
#include <vector>

#include "eem/models.hpp"

namespace eem::reference {

inline constexpr std::size_t kClockCount = 10;

// White-FM standard deviations, units of 1e-9.
inline constexpr std::array<double, kClockCount> kSigma1 = {
    0.1700, 0.0886, 0.1221, 0.1273, 0.2185, 0.1063, 0.1805, 0.2168, 0.0930, 0.1801};

// Random-walk-FM standard deviations, units of 1e-12.
inline constexpr std::array<double, kClockCount> kSigma2 = {
    0.1507, 0.0532, 0.0167, 0.0771, 0.2940, 0.0492, 0.0407, 0.0829, 0.0520, 0.0566};

// Phase-difference measurement standard deviations for pairs (i, 10), units of 1e-14 s.
inline constexpr std::array<double, kClockCount - 1> kMeasurement = {
    0.4353, 0.0759, 0.4720, 0.1166, 0.4148, 0.0885, 0.0998, 0.2453, 0.0373};

inline std::vector<NoiseParams> clock_noise() {
  std::vector<NoiseParams> out;
  out.reserve(kClockCount);
  for (std::size_t i = 0; i < kClockCount; ++i) {
    out.push_back({kSigma1[i] * 1e-9, kSigma2[i] * 1e-12});
  }
  return out;
}

inline std::vector<double> measurement_stddev() {
  std::vector<double> out;
  out.reserve(kMeasurement.size());
  for (double s : kMeasurement) out.push_back(s * 1e-14);
  return out;
}

/// The full ten-clock model with star measurements.
inline EnsembleModel ensemble(double tau = 1.0) {
  const auto noise = clock_noise();
  const auto meas = measurement_stddev();
  return build_ensemble(noise, star_measurement(kClockCount),
                        diagonal_measurement_covariance(meas), tau);
}

/// The first n clocks (n >= 2) measured against the last of them, reusing the
/// first n-1 measurement deviations.
inline EnsembleModel ensemble_subset(std::size_t n, double tau = 1.0) {
  auto noise = clock_noise();
  noise.resize(n);
  auto meas = measurement_stddev();
  meas.resize(n - 1);
  return build_ensemble(noise, star_measurement(n), diagonal_measurement_covariance(meas), tau);
}

}  // namespace eem::reference
