#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "windcast/core.hpp"
#include "windcast/special_functions.hpp"

namespace windcast::dists {

// ---------------------------------------------------------------------------
// Generalized Pareto tails

struct GpdTail {
  double psi = 1.0;  ///< scale
  double xi = 0.0;   ///< shape
  double eta = 0.0;  ///< location
  double threshold_quantile = 0.95;

  /// Upper end of the support (infinite unless xi < 0).
  double support_end() const;
};

inline constexpr double kGpdExponentialSwitch = 1e-10;

/// P(Z <= z). Throws ParameterError if psi <= 0. Values below eta give 0.
double gpd_cdf(double z, const GpdTail& tail);
/// Inverse of gpd_cdf for p in [0, 1).
double gpd_quantile(double p, const GpdTail& tail);

struct GpdFitOptions {
  std::size_t min_samples = 30;
  bool fit_location = false;  ///< estimate eta in [0, min z) instead of fixing it at 0
  double xi_min = -0.95;
  double xi_max = 0.95;
};

struct GpdFit {
  GpdTail tail;
  double log_likelihood = 0.0;
  int iterations = 0;
  std::size_t n = 0;
  bool fallback = false;  ///< exponential fallback used (too few samples or failed fit)
  std::string warning;
};

/// Maximum-likelihood GPD fit to nonnegative exceedances.
GpdFit fit_gpd_mle(std::span<const double> exceedances, const GpdFitOptions& opt = {});

/// Mean log-likelihood per sample; -inf outside the support.
double gpd_log_likelihood(std::span<const double> z, const GpdTail& tail);

// ---------------------------------------------------------------------------
// Monotone piecewise cubic Hermite interpolation

/// Shape-preserving cubic Hermite interpolant. Knot abscissae must be strictly increasing.
/// Each interval i carries its own endpoint values (left_end[i], right_start[i+1]) so
/// jumps at knots can be represented: value at knot k is `right[k]`, limit from the left
/// is `left[k]`. With left == right this is ordinary PCHIP.
class Pchip {
 public:
  Pchip(std::vector<double> x, std::vector<double> y);
  Pchip(std::vector<double> x, std::vector<double> left, std::vector<double> right);

  double operator()(double x) const;
  double left_limit(double x) const;
  const std::vector<double>& knots() const noexcept { return x_; }
  const std::vector<double>& slopes() const noexcept { return d_; }

 private:
  void build();
  double eval_segment(std::size_t i, double x) const;

  std::vector<double> x_, left_, right_, d_;
};

/// Fritsch-Butland / Brodlie weighted harmonic-mean interior slopes with the one-sided
/// three-point edge rule. Exposed for testing.
std::vector<double> pchip_slopes(std::span<const double> h, std::span<const double> delta);

// ---------------------------------------------------------------------------
// Bounded CDFs on [0, 1]

/// Unclipped distribution function; must be nondecreasing with values in [0, 1].
class CdfShape {
 public:
  virtual ~CdfShape() = default;
  virtual double raw(double x) const = 0;
  /// Vectorized raw(); xs is sorted ascending.
  virtual void raw_sorted(std::span<const double> xs, std::span<double> out) const;
};

/// Forecast CDF on [0, 1] with point masses omega0 at 0 and omega1 at 1:
/// F(x) = 0 for x < 0, raw(x) on [0, 1), 1 for x >= 1.
class BoundedCdf {
 public:
  explicit BoundedCdf(std::shared_ptr<const CdfShape> shape);

  double operator()(double x) const;
  /// lim_{t -> x-} F(t)
  double left_limit(double x) const;
  double omega0() const noexcept { return omega0_; }
  double omega1() const noexcept { return omega1_; }
  const CdfShape& shape() const noexcept { return *shape_; }
  std::shared_ptr<const CdfShape> shape_ptr() const noexcept { return shape_; }

 private:
  std::shared_ptr<const CdfShape> shape_;
  double omega0_, omega1_;
};

/// Point mass at c.
class StepShape final : public CdfShape {
 public:
  explicit StepShape(double c) : c_(c) {}
  double raw(double x) const override { return x >= c_ ? 1.0 : 0.0; }

 private:
  double c_;
};

/// PCHIP interior through (quantile value, tau) knots with GPD tails beyond the extreme knots.
class QuantileShape final : public CdfShape {
 public:
  /// Knot values must be nondecreasing (ContractViolation otherwise); equal values are
  /// merged into a jump. A missing tail puts the remaining tail mass on the extreme knot.
  QuantileShape(std::span<const double> levels, std::span<const double> values,
                std::optional<GpdTail> lower, std::optional<GpdTail> upper);
  double raw(double x) const override;

  double lowest_level() const noexcept { return tau_lo_; }
  double highest_level() const noexcept { return tau_hi_; }

 private:
  std::optional<Pchip> interior_;
  double q_lo_, q_hi_, tau_lo_, tau_hi_;
  std::optional<GpdTail> lower_, upper_;
};

class GammaShape final : public CdfShape {
 public:
  GammaShape(double alpha, double rate);
  double raw(double x) const override { return gamma_cdf(x, alpha_, rate_); }
  double alpha() const noexcept { return alpha_; }
  double rate() const noexcept { return rate_; }

 private:
  double alpha_, rate_;
};

BoundedCdf step_cdf(double c);
BoundedCdf quantiles_to_cdf(const core::QuantileSet& q, std::optional<GpdTail> lower_tail,
                            std::optional<GpdTail> upper_tail);
BoundedCdf quantiles_to_cdf(std::span<const double> levels, std::span<const double> values,
                            std::optional<GpdTail> lower_tail, std::optional<GpdTail> upper_tail);
BoundedCdf gamma_bounded_cdf(double alpha, double rate);

/// Generalized inverse inf{x : F(x) >= p}, resolved to 1e-9.
double cdf_quantile(const BoundedCdf& f, double p);

inline constexpr std::size_t kCrpsGridPoints = 2001;
inline constexpr std::size_t kCdfCheckPoints = 1001;

/// Integral over [0, 1] of (F(x) - H(x - y))^2 by trapezoid on a uniform grid with y as an
/// extra breakpoint.
double crps_numeric(const BoundedCdf& f, double y, std::size_t grid_points = kCrpsGridPoints);

/// Closed-form CRPS of Gamma(alpha, rate) at y >= 0.
double crps_gamma_closed(double alpha, double rate, double y);

/// Checks the BoundedCdf invariants on a uniform grid; returns an empty string when valid.
std::string validate_cdf(const BoundedCdf& f, std::size_t points = kCdfCheckPoints,
                         double slack = 1e-12);

}  // namespace windcast::dists
