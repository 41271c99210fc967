#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace eem::stats {

struct TrendResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  // HAC standard error
  double t_stat = 0.0;
  std::size_t bandwidth = 0;
};

/// OLS fit of series[i] = a + b·i with Newey–West (Bartlett kernel) standard
/// errors. The bandwidth comes from the Andrews AR(1) plug-in rule on the
/// residuals.
TrendResult linear_trend_test(const Eigen::VectorXd& series);

/// Mean of series over [begin, end).
double segment_mean(const Eigen::VectorXd& series, std::size_t begin, std::size_t end);

}  // namespace eem::stats
