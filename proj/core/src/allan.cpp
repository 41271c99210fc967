#include "eem/allan.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <ostream>

#include "eem/csv.hpp"
#include "eem/errors.hpp"

namespace eem {
namespace {

void check_interval(double interval) {
  if (!(interval > 0.0) || !std::isfinite(interval)) {
    throw InvalidArgument("allan: averaging interval must be positive");
  }
}

void check_variances(const VectorXd& s1, const VectorXd& s2) {
  if (s1.size() == 0 || s1.size() != s2.size()) {
    throw InvalidArgument("allan: variance vectors must be non-empty and of equal length");
  }
  if ((s1.array() < 0.0).any() || (s2.array() < 0.0).any()) {
    throw InvalidArgument("allan: variances must be non-negative");
  }
}

EnsembleWeight normalized_inverse(const VectorXd& diag, const char* who) {
  if (diag.size() == 0 || (diag.array() <= 0.0).any()) {
    throw InvalidArgument(std::string(who) + ": variances must be positive");
  }
  const VectorXd inv = diag.cwiseInverse();
  return EnsembleWeight(inv / inv.sum());
}

}  // namespace

double analytical_allan_clock(const NoiseParams& noise, double interval) {
  noise.validate();
  check_interval(interval);
  return noise.sigma1 * noise.sigma1 / interval +
         interval * noise.sigma2 * noise.sigma2 / 3.0;
}

MatrixXd allan_gamma(const VectorXd& sigma1_sq, const VectorXd& sigma2_sq, double interval) {
  check_variances(sigma1_sq, sigma2_sq);
  check_interval(interval);
  const VectorXd diag =
      interval * sigma1_sq + (interval * interval * interval / 3.0) * sigma2_sq;
  return diag.asDiagonal();
}

double allan_pi(const EnsembleWeight& q, const VectorXd& sigma1_sq, const VectorXd& sigma2_sq,
                double interval) {
  if (static_cast<Eigen::Index>(q.size()) != sigma1_sq.size()) {
    throw InvalidArgument("allan_pi: weight length must equal the clock count");
  }
  const MatrixXd gamma = allan_gamma(sigma1_sq, sigma2_sq, interval);
  const VectorXd& v = q.vector();
  return v.dot(gamma * v) / (interval * interval);
}

double statistical_allan(const VectorXd& h, std::size_t m, double tau) {
  check_interval(tau);
  const auto T = static_cast<std::size_t>(h.size());
  if (m < 1 || T < 3 || m > (T - 1) / 2) {
    throw InvalidArgument("statistical_allan: interval multiplier must satisfy 1 <= m <= (T-1)/2");
  }
  const auto count = static_cast<Eigen::Index>(T - 2 * m);
  const auto mm = static_cast<Eigen::Index>(m);
  const auto d2 = h.segment(2 * mm, count) - 2.0 * h.segment(mm, count) + h.head(count);
  const double interval = static_cast<double>(m) * tau;
  return d2.squaredNorm() / (static_cast<double>(count) * 2.0 * interval * interval);
}

std::vector<std::size_t> log_spaced_intervals(std::size_t T, std::size_t per_decade) {
  if (T < 3) throw InvalidArgument("log_spaced_intervals: series needs at least 3 samples");
  if (per_decade == 0) throw InvalidArgument("log_spaced_intervals: per_decade must be positive");
  const std::size_t max_m = (T - 1) / 2;
  const double decades = std::log10(static_cast<double>(max_m));
  const auto points = static_cast<std::size_t>(std::ceil(decades * per_decade)) + 1;
  std::vector<std::size_t> out;
  out.reserve(points + 1);
  for (std::size_t i = 0; i < points; ++i) {
    const double e = decades * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(points - 1, 1));
    auto m = static_cast<std::size_t>(std::llround(std::pow(10.0, e)));
    m = std::clamp<std::size_t>(m, 1, max_m);
    if (out.empty() || m > out.back()) out.push_back(m);
  }
  if (out.back() != max_m) out.push_back(max_m);
  return out;
}

AllanCurve allan_curve(const VectorXd& h, double tau, const std::vector<std::size_t>& m_values) {
  AllanCurve c;
  c.interval.reserve(m_values.size());
  c.variance.reserve(m_values.size());
  for (std::size_t m : m_values) {
    c.interval.push_back(static_cast<double>(m) * tau);
    c.variance.push_back(statistical_allan(h, m, tau));
  }
  return c;
}

std::vector<AllanCurve> allan_curves(const MatrixXd& series, double tau,
                                     const std::vector<std::size_t>& m_values) {
  std::vector<AllanCurve> out;
  out.reserve(static_cast<std::size_t>(series.rows()));
  for (Eigen::Index i = 0; i < series.rows(); ++i) {
    out.push_back(allan_curve(series.row(i).transpose(), tau, m_values));
  }
  return out;
}

EnsembleWeight optimal_weight(const VectorXd& sigma1_sq, const VectorXd& sigma2_sq,
                              double interval) {
  const VectorXd diag = allan_gamma(sigma1_sq, sigma2_sq, interval).diagonal();
  return normalized_inverse(diag, "optimal_weight");
}

EnsembleWeight weight_short(const VectorXd& sigma1_sq) {
  return normalized_inverse(sigma1_sq, "weight_short");
}

EnsembleWeight weight_long(const VectorXd& sigma2_sq) {
  return normalized_inverse(sigma2_sq, "weight_long");
}

double loglog_slope(const AllanCurve& curve, double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < curve.interval.size(); ++i) {
    const double t = curve.interval[i];
    if (t < lo || t > hi || !(curve.variance[i] > 0.0)) continue;
    const double x = std::log10(t);
    const double y = std::log10(curve.variance[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw InvalidArgument("loglog_slope: fewer than two points in range");
  const double dn = static_cast<double>(n);
  const double den = dn * sxx - sx * sx;
  if (den == 0.0) throw InvalidArgument("loglog_slope: degenerate interval range");
  return (dn * sxy - sx * sy) / den;
}

void write_allan_csv(std::ostream& os, const AllanCurve& curve) {
  csv::write_header(os, {"interval_s", "allan_variance"});
  for (std::size_t i = 0; i < curve.interval.size(); ++i) {
    os << csv::format_double(curve.interval[i]);
    csv::write_field(os, curve.variance[i]);
    os << '\n';
  }
}

}  // namespace eem
