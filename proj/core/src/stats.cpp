#include "eem/stats.hpp"

#include <algorithm>
#include <cmath>

#include "eem/errors.hpp"

namespace eem::stats {

TrendResult linear_trend_test(const Eigen::VectorXd& series) {
  const Eigen::Index n = series.size();
  if (n < 8) throw InvalidArgument("linear_trend_test: need at least 8 samples");

  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  const double tbar = t.mean();
  const double ybar = series.mean();
  const Eigen::VectorXd tc = t.array() - tbar;
  const double stt = tc.squaredNorm();

  TrendResult r;
  r.slope = tc.dot(series.array().matrix() - Eigen::VectorXd::Constant(n, ybar)) / stt;
  r.intercept = ybar - r.slope * tbar;
  const Eigen::VectorXd e = series - (Eigen::VectorXd::Constant(n, r.intercept) + r.slope * t);

  // AR(1) coefficient of the residuals.
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    num += e(i) * e(i - 1);
    den += e(i - 1) * e(i - 1);
  }
  double rho = den > 0.0 ? num / den : 0.0;
  rho = std::clamp(rho, -0.97, 0.97);
  const double a = 4.0 * rho * rho / ((1.0 - rho) * (1.0 - rho) * (1.0 + rho) * (1.0 + rho));
  const double L = 1.1447 * std::cbrt(a * static_cast<double>(n));
  r.bandwidth = std::min<std::size_t>(static_cast<std::size_t>(std::floor(L)),
                                      static_cast<std::size_t>(n - 2));

  // Meat: Σ_j w_j Σ_i g_i g_{i-j}, g_i = tc_i e_i.
  const Eigen::VectorXd g = tc.cwiseProduct(e);
  double meat = g.squaredNorm();
  for (std::size_t j = 1; j <= r.bandwidth; ++j) {
    const double w = 1.0 - static_cast<double>(j) / static_cast<double>(r.bandwidth + 1);
    const auto jj = static_cast<Eigen::Index>(j);
    meat += 2.0 * w * g.tail(n - jj).dot(g.head(n - jj));
  }
  meat = std::max(meat, 0.0);
  r.slope_se = std::sqrt(meat) / stt;
  r.t_stat = r.slope_se > 0.0 ? r.slope / r.slope_se
                              : (r.slope == 0.0 ? 0.0 : std::copysign(INFINITY, r.slope));
  return r;
}

double segment_mean(const Eigen::VectorXd& series, std::size_t begin, std::size_t end) {
  if (begin >= end || end > static_cast<std::size_t>(series.size())) {
    throw InvalidArgument("segment_mean: empty or out-of-range segment");
  }
  return series.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin))
      .mean();
}

}  // namespace eem::stats
