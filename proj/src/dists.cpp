#include "windcast/dists.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "windcast/optim.hpp"

namespace windcast::dists {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sign(double v) { return (v > 0.0) - (v < 0.0); }

double before(double x) { return std::nextafter(x, -kInf); }

void check_tail(const GpdTail& t) {
  if (!(t.psi > 0.0) || !std::isfinite(t.psi)) throw ParameterError("GPD scale must be positive");
  if (!std::isfinite(t.xi) || !std::isfinite(t.eta)) throw ParameterError("non-finite GPD parameter");
}

}  // namespace

double GpdTail::support_end() const {
  return xi < -kGpdExponentialSwitch ? eta - psi / xi : kInf;
}

double gpd_cdf(double z, const GpdTail& tail) {
  check_tail(tail);
  if (!(z > tail.eta)) return 0.0;
  const double s = (z - tail.eta) / tail.psi;
  if (std::abs(tail.xi) < kGpdExponentialSwitch) return -std::expm1(-s);
  const double base = 1.0 + tail.xi * s;
  if (base <= 0.0) return 1.0;  // beyond the bounded endpoint
  return -std::expm1(-std::log1p(tail.xi * s) / tail.xi);
}

double gpd_quantile(double p, const GpdTail& tail) {
  check_tail(tail);
  if (!(p >= 0.0 && p < 1.0)) throw ParameterError("GPD quantile level outside [0,1)");
  const double l = -std::log1p(-p);
  if (std::abs(tail.xi) < kGpdExponentialSwitch) return tail.eta + tail.psi * l;
  return tail.eta + tail.psi * std::expm1(tail.xi * l) / tail.xi;
}

double gpd_log_likelihood(std::span<const double> z, const GpdTail& tail) {
  if (z.empty()) return 0.0;
  if (!(tail.psi > 0.0)) return -kInf;
  const double lpsi = std::log(tail.psi);
  double acc = 0.0;
  if (std::abs(tail.xi) < kGpdExponentialSwitch) {
    for (double v : z) {
      const double s = (v - tail.eta) / tail.psi;
      if (s < 0.0) return -kInf;
      acc -= s;
    }
  } else {
    const double c = 1.0 + 1.0 / tail.xi;
    for (double v : z) {
      const double s = (v - tail.eta) / tail.psi;
      const double base = 1.0 + tail.xi * s;
      if (s < 0.0 || base <= 0.0) return -kInf;
      acc -= c * std::log1p(tail.xi * s);
    }
  }
  return acc / static_cast<double>(z.size()) - lpsi;
}

GpdFit fit_gpd_mle(std::span<const double> exceedances, const GpdFitOptions& opt) {
  GpdFit out;
  out.n = exceedances.size();
  for (double v : exceedances)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("exceedances must be finite and >= 0");

  const double mean =
      exceedances.empty()
          ? 0.0
          : std::accumulate(exceedances.begin(), exceedances.end(), 0.0) / static_cast<double>(out.n);
  auto exponential = [&](std::string why) {
    out.fallback = true;
    out.warning = std::move(why);
    out.tail.xi = 0.0;
    out.tail.eta = 0.0;
    // A zero mean leaves no scale to estimate; keep the tail proper but negligible.
    out.tail.psi = mean > 0.0 ? mean : 1e-12;
    out.log_likelihood = gpd_log_likelihood(exceedances, out.tail) * static_cast<double>(out.n);
    return out;
  };
  if (out.n < opt.min_samples || out.n < 2)
    return exponential("only " + std::to_string(out.n) + " exceedances; exponential fallback");
  if (!(mean > 0.0)) return exponential("all exceedances are zero; exponential fallback");

  double var = 0.0;
  for (double v : exceedances) var += (v - mean) * (v - mean);
  var /= static_cast<double>(out.n - 1);
  const double zmax = *std::max_element(exceedances.begin(), exceedances.end());
  const double zmin = *std::min_element(exceedances.begin(), exceedances.end());

  // Method-of-moments start, pulled back inside the support if needed.
  double xi0 = var > 0.0 ? 0.5 * (1.0 - mean * mean / var) : 0.0;
  xi0 = std::clamp(xi0, opt.xi_min + 0.05, opt.xi_max - 0.05);
  double psi0 = 0.5 * mean * (mean * mean / var + 1.0);
  if (!(psi0 > 0.0) || !std::isfinite(psi0) || (xi0 < 0.0 && 1.0 + xi0 * zmax / psi0 <= 0.0)) {
    xi0 = 0.0;
    psi0 = mean;
  }

  auto unpack = [&](const std::vector<double>& p) {
    GpdTail t;
    t.psi = std::exp(p[0]);
    t.xi = std::clamp(p[1], opt.xi_min, opt.xi_max);
    if (opt.fit_location) t.eta = zmin / (1.0 + std::exp(-p[2]));
    return t;
  };
  auto objective = [&](const std::vector<double>& p) {
    if (p[1] < opt.xi_min - 0.5 || p[1] > opt.xi_max + 0.5) return kInf;
    return -gpd_log_likelihood(exceedances, unpack(p));
  };

  std::vector<double> x0{std::log(psi0), xi0};
  std::vector<double> step{0.2, 0.1};
  if (opt.fit_location) {
    x0.push_back(-4.0);
    step.push_back(1.0);
  }
  optim::NelderMeadOptions nm;
  nm.f_tolerance = 1e-12;
  nm.max_iterations = 2000;
  auto res = optim::nelder_mead(objective, x0, step, nm);
  int iterations = res.iterations;
  // A second pass from the optimum guards against premature simplex collapse.
  for (auto& s : step) s *= 0.25;
  auto res2 = optim::nelder_mead(objective, res.x, step, nm);
  iterations += res2.iterations;
  if (res2.value <= res.value) res = res2;

  if (!std::isfinite(res.value)) return exponential("GPD likelihood not finite; exponential fallback");
  out.tail = unpack(res.x);
  out.log_likelihood = -res.value * static_cast<double>(out.n);
  out.iterations = iterations;
  if (!res.converged) out.warning = "GPD fit stopped at iteration limit";
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> pchip_slopes(std::span<const double> h, std::span<const double> delta) {
  const std::size_t n = h.size() + 1;
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  if (n == 2) {
    d[0] = d[1] = delta[0];
    return d;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double d0 = delta[k - 1], d1 = delta[k];
    if (d0 == 0.0 || d1 == 0.0 || sign(d0) != sign(d1)) continue;
    const double w1 = 2.0 * h[k] + h[k - 1];
    const double w2 = h[k] + 2.0 * h[k - 1];
    d[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
  }
  auto edge = [](double h0, double h1, double m0, double m1) {
    double e = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if (sign(e) != sign(m0)) return 0.0;
    if (sign(m0) != sign(m1) && std::abs(e) > 3.0 * std::abs(m0)) return 3.0 * m0;
    return e;
  };
  d[0] = edge(h[0], h[1], delta[0], delta[1]);
  d[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  return d;
}

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), left_(y), right_(std::move(y)) {
  build();
}

Pchip::Pchip(std::vector<double> x, std::vector<double> left, std::vector<double> right)
    : x_(std::move(x)), left_(std::move(left)), right_(std::move(right)) {
  build();
}

void Pchip::build() {
  const std::size_t n = x_.size();
  if (n < 2 || left_.size() != n || right_.size() != n)
    throw ParameterError("PCHIP needs at least two knots with matching values");
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    if (!(h[i] > 0.0)) throw ParameterError("PCHIP knots must be strictly increasing");
    delta[i] = (left_[i + 1] - right_[i]) / h[i];
  }
  d_ = pchip_slopes(h, delta);
}

double Pchip::eval_segment(std::size_t i, double x) const {
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * right_[i] + h10 * h * d_[i] + h01 * left_[i + 1] + h11 * h * d_[i + 1];
}

double Pchip::operator()(double x) const {
  if (x < x_.front()) return left_.front();
  if (x >= x_.back()) return right_.back();
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const auto i = static_cast<std::size_t>(it - x_.begin()) - 1;
  if (x == x_[i]) return right_[i];
  return eval_segment(i, x);
}

double Pchip::left_limit(double x) const {
  const auto it = std::lower_bound(x_.begin(), x_.end(), x);
  if (it != x_.end() && *it == x) return left_[static_cast<std::size_t>(it - x_.begin())];
  return (*this)(x);
}

// ---------------------------------------------------------------------------

void CdfShape::raw_sorted(std::span<const double> xs, std::span<double> out) const {
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = raw(xs[i]);
}

BoundedCdf::BoundedCdf(std::shared_ptr<const CdfShape> shape) : shape_(std::move(shape)) {
  if (!shape_) throw ParameterError("null CDF shape");
  omega0_ = std::clamp(shape_->raw(0.0), 0.0, 1.0);
  omega1_ = 1.0 - std::clamp(shape_->raw(before(1.0)), 0.0, 1.0);
}

double BoundedCdf::operator()(double x) const {
  if (x < 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return std::clamp(shape_->raw(x), 0.0, 1.0);
}

double BoundedCdf::left_limit(double x) const {
  if (x <= 0.0) return 0.0;
  if (x > 1.0) return 1.0;
  return std::clamp(shape_->raw(before(x)), 0.0, 1.0);
}

QuantileShape::QuantileShape(std::span<const double> levels, std::span<const double> values,
                             std::optional<GpdTail> lower, std::optional<GpdTail> upper)
    : lower_(lower), upper_(upper) {
  if (levels.empty() || levels.size() != values.size())
    throw ContractViolation("quantile levels and values must be nonempty and aligned");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw ContractViolation("non-finite quantile value");
    if (i > 0 && values[i] < values[i - 1])
      throw ContractViolation("quantile values are not nondecreasing");
    if (i > 0 && !(levels[i] > levels[i - 1]))
      throw ContractViolation("quantile levels are not strictly increasing");
  }
  if (lower_) check_tail(*lower_);
  if (upper_) check_tail(*upper_);

  // Tied values become one knot whose left/right limits are the lowest/highest tied level.
  std::vector<double> x, left, right;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!x.empty() && values[i] == x.back()) {
      right.back() = levels[i];
    } else {
      x.push_back(values[i]);
      left.push_back(levels[i]);
      right.push_back(levels[i]);
    }
  }
  q_lo_ = x.front();
  q_hi_ = x.back();
  tau_lo_ = left.front();
  tau_hi_ = right.back();
  if (x.size() >= 2) interior_.emplace(std::move(x), std::move(left), std::move(right));
}

double QuantileShape::raw(double x) const {
  if (x < q_lo_) return lower_ ? tau_lo_ * (1.0 - gpd_cdf(q_lo_ - x, *lower_)) : 0.0;
  if (x >= q_hi_) return upper_ ? tau_hi_ + (1.0 - tau_hi_) * gpd_cdf(x - q_hi_, *upper_) : 1.0;
  return (*interior_)(x);
}

GammaShape::GammaShape(double alpha, double rate) : alpha_(alpha), rate_(rate) {
  if (!(alpha > 0.0) || !(rate > 0.0) || !std::isfinite(alpha) || !std::isfinite(rate))
    throw ParameterError("gamma parameters must be positive and finite");
}

BoundedCdf step_cdf(double c) { return BoundedCdf(std::make_shared<StepShape>(c)); }

BoundedCdf quantiles_to_cdf(std::span<const double> levels, std::span<const double> values,
                            std::optional<GpdTail> lower_tail, std::optional<GpdTail> upper_tail) {
  return BoundedCdf(std::make_shared<QuantileShape>(levels, values, lower_tail, upper_tail));
}

BoundedCdf quantiles_to_cdf(const core::QuantileSet& q, std::optional<GpdTail> lower_tail,
                            std::optional<GpdTail> upper_tail) {
  return quantiles_to_cdf(q.grid().levels(), q.values(), lower_tail, upper_tail);
}

BoundedCdf gamma_bounded_cdf(double alpha, double rate) {
  return BoundedCdf(std::make_shared<GammaShape>(alpha, rate));
}

double cdf_quantile(const BoundedCdf& f, double p) {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("probability level outside (0,1)");
  if (p <= f.omega0()) return 0.0;
  if (p >= 1.0 - f.omega1()) return 1.0;
  // Smallest cell of the 1001-point grid whose right end reaches p.
  const std::size_t n = kCdfCheckPoints - 1;
  std::size_t lo = 0, hi = n;  // F(lo/n) < p <= F(hi/n)
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (f(static_cast<double>(mid) / n) >= p) hi = mid; else lo = mid;
  }
  double a = static_cast<double>(lo) / n, b = static_cast<double>(hi) / n;
  while (b - a > 1e-10) {
    const double mid = 0.5 * (a + b);
    if (f(mid) >= p) b = mid; else a = mid;
  }
  return b;
}

double crps_numeric(const BoundedCdf& f, double y, std::size_t grid_points) {
  if (!(y >= 0.0 && y <= 1.0)) throw ParameterError("observation outside [0,1]");
  if (grid_points < 2) throw ParameterError("CRPS grid needs at least two points");
  const std::size_t n = grid_points - 1;
  const double step = 1.0 / static_cast<double>(n);

  // Grid with y inserted; the last abscissa is evaluated as the limit from the left of 1.
  std::vector<double> xs;
  xs.reserve(grid_points + 1);
  std::size_t y_at = 0;
  bool y_inserted = false;
  for (std::size_t i = 0; i <= n; ++i) {
    const double x = static_cast<double>(i) * step;
    if (!y_inserted && y <= x) {
      y_at = xs.size();
      y_inserted = true;
      if (y < x) xs.push_back(y);
    }
    xs.push_back(x);
  }
  std::vector<double> eval_x(xs);
  eval_x.back() = before(1.0);
  std::vector<double> F(xs.size());
  f.shape().raw_sorted(eval_x, F);
  for (auto& v : F) v = std::clamp(v, 0.0, 1.0);
  const double f_y_left = f.left_limit(y);

  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
    const double w = xs[j + 1] - xs[j];
    if (j + 1 <= y_at) {
      const double fl = F[j];
      const double fr = (j + 1 == y_at) ? f_y_left : F[j + 1];
      acc += 0.5 * w * (fl * fl + fr * fr);
    } else {
      const double gl = 1.0 - F[j], gr = 1.0 - F[j + 1];
      acc += 0.5 * w * (gl * gl + gr * gr);
    }
  }
  return acc;
}

double crps_gamma_closed(double alpha, double rate, double y) {
  if (!(alpha > 0.0) || !(rate > 0.0) || !std::isfinite(alpha) || !std::isfinite(rate))
    throw ParameterError("gamma parameters must be positive and finite");
  if (!(y >= 0.0)) throw ParameterError("gamma CRPS needs y >= 0");
  const double f0 = gamma_p(alpha, rate * y);
  const double f1 = gamma_p(alpha + 1.0, rate * y);
  // (alpha / (rate * pi)) * B(alpha + 1/2, 1/2), via log-gamma for large alpha
  const double spread =
      std::exp(log_gamma(alpha + 0.5) - log_gamma(alpha) - 0.5 * std::log(kPi)) / rate;
  return y * (2.0 * f0 - 1.0) - (alpha / rate) * (2.0 * f1 - 1.0) - spread;
}

std::string validate_cdf(const BoundedCdf& f, std::size_t points, double slack) {
  std::ostringstream err;
  if (f.omega0() < 0.0 || f.omega1() < 0.0) err << "negative boundary mass; ";
  if (f(1.0) != 1.0) err << "F(1) != 1; ";
  if (f.left_limit(0.0) != 0.0) err << "F(0-) != 0; ";
  if (std::abs(f(0.0) - f.omega0()) > 1e-9) err << "F(0) != omega0; ";
  if (std::abs(f.left_limit(1.0) + f.omega1() - 1.0) > 1e-9) err << "mass does not sum to 1; ";
  double prev = -kInf;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(points - 1);
    const double v = f(x);
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      err << "F(" << x << ") = " << v << " outside [0,1]; ";
      break;
    }
    if (v + slack < prev) {
      err << "F decreases at x = " << x << "; ";
      break;
    }
    prev = v;
  }
  return err.str();
}

}  // namespace windcast::dists
