#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "eem/models.hpp"

namespace eem {

/// σ₁²/(mτ) + (mτ)σ₂²/3 for averaging interval mτ.
double analytical_allan_clock(const NoiseParams& noise, double interval);

/// Γ(interval) = interval Σ₁ + interval³ Σ₂ / 3 (diagonal, as a dense matrix).
MatrixXd allan_gamma(const VectorXd& sigma1_sq, const VectorXd& sigma2_sq, double interval);

/// Π(q) = qᵀ Γ q / interval²: Allan variance of the q-weighted ensemble mean.
double allan_pi(const EnsembleWeight& q, const VectorXd& sigma1_sq, const VectorXd& sigma2_sq,
                double interval);

/// Overlapping estimator
///   (1/(T−2m)) Σ_{k=0}^{T−2m−1} (h[k+2m] − 2h[k+m] + h[k])² / (2(mτ)²).
/// Requires 1 ≤ m ≤ ⌊(T−1)/2⌋ where T is the series length.
double statistical_allan(const VectorXd& h, std::size_t m, double tau);

/// About `per_decade` logarithmically spaced integer multipliers in
/// [1, ⌊(T−1)/2⌋], deduplicated and increasing.
std::vector<std::size_t> log_spaced_intervals(std::size_t T, std::size_t per_decade = 30);

struct AllanCurve {
  std::vector<double> interval;  // seconds
  std::vector<double> variance;
};

AllanCurve allan_curve(const VectorXd& h, double tau, const std::vector<std::size_t>& m_values);

/// One curve per row of `series` (e.g. h for every clock).
std::vector<AllanCurve> allan_curves(const MatrixXd& series, double tau,
                                     const std::vector<std::size_t>& m_values);

/// q_A = Γ⁻¹1 / (1ᵀΓ⁻¹1): minimizer of Π at the given interval.
EnsembleWeight optimal_weight(const VectorXd& sigma1_sq, const VectorXd& sigma2_sq,
                              double interval);

/// Short-term limit: weights ∝ 1/σ₁².
EnsembleWeight weight_short(const VectorXd& sigma1_sq);

/// Long-term limit: weights ∝ 1/σ₂².
EnsembleWeight weight_long(const VectorXd& sigma2_sq);

/// Least-squares slope of log10(variance) against log10(interval) for the
/// points whose interval lies in [lo, hi].
double loglog_slope(const AllanCurve& curve, double lo, double hi);

/// CSV `interval_s,allan_variance`.
void write_allan_csv(std::ostream& os, const AllanCurve& curve);

}  // namespace eem
