#include "windcast/special_functions.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "windcast/core.hpp"

namespace windcast::dists {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 5000;

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_continued_fraction(double x, double a, double b) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

void check_beta_params(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw ParameterError("beta parameters must be positive and finite");
}

}  // namespace

double log_gamma(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

double beta_function(double a, double b) {
  check_beta_params(a, b);
  return std::exp(log_beta(a, b));
}

FastNormalCdf::FastNormalCdf() {
  constexpr double step = 1.0 / kPerUnit;
  const int n = static_cast<int>(kFastNormalRange * kPerUnit) + 1;
  std::vector<double> value(n), slope(n);
  for (int i = 0; i < n; ++i) {
    const double z = -kFastNormalRange + i * step;
    value[i] = normal_cdf(z);
    slope[i] = normal_pdf(z) * step;
  }
  cells_.reserve(4 * (n - 1));
  for (int i = 0; i + 1 < n; ++i) cells_.insert(cells_.end(), {value[i], slope[i], value[i + 1], slope[i + 1]});
  last_ = static_cast<std::size_t>(n - 2);
}

const FastNormalCdf& FastNormalCdf::instance() {
  static const FastNormalCdf table;
  return table;
}

BetaCdf::BetaCdf(double a, double b) : a_(a), b_(b) {
  check_beta_params(a, b);
  log_norm_ = -log_beta(a, b);
  split_ = (a + 1.0) / (a + b + 2.0);
  identity_ = (a == 1.0 && b == 1.0);
}

double BetaCdf::operator()(double x) const {
  if (!(x > 0.0)) return 0.0;
  if (!(x < 1.0)) return 1.0;
  if (identity_) return x;
  const double front = std::exp(log_norm_ + a_ * std::log(x) + b_ * std::log1p(-x));
  if (x < split_) return front * beta_continued_fraction(x, a_, b_) / a_;
  return 1.0 - front * beta_continued_fraction(1.0 - x, b_, a_) / b_;
}

double beta_cdf(double x, double a, double b) { return BetaCdf(a, b)(x); }

double gamma_p(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("gamma shape must be positive");
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double log_front = -x + a * std::log(x) - log_gamma(a);
  if (x < a + 1.0) {
    double ap = a, del = 1.0 / a, sum = del;
    for (int n = 0; n < kMaxIter; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    return std::min(1.0, sum * std::exp(log_front));
  }
  // Upper tail by continued fraction, then complement.
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_front) * h);
}

double gamma_cdf(double x, double alpha, double rate) {
  if (!(alpha > 0.0) || !(rate > 0.0)) throw ParameterError("gamma parameters must be positive");
  return gamma_p(alpha, rate * x);
}

}  // namespace windcast::dists
