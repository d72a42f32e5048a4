#include "test_support.hpp"
#include <algorithm>

namespace testsupport {

double normal_crps(double mu, double sigma, double y) {
  const double z = (y - mu) / sigma;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return sigma * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(M_PI));
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

double crps_quadrature(const std::function<double(double)>& cdf, double y, double lo, double hi,
                       int n_per_side) {
  double total = 0.0;
  if (y > lo) {
    total += simpson([&](double x) { const double v = cdf(x); return v * v; }, lo, y, n_per_side);
  }
  if (y < hi) {
    total += simpson([&](double x) { const double v = 1.0 - cdf(x); return v * v; }, y, hi,
                     n_per_side);
  }
  return total;
}

std::vector<double> sample_gpd(std::mt19937_64& rng, std::size_t n, double psi, double xi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& z : out) {
    const double v = 1.0 - u(rng);  // (0, 1]
    z = std::abs(xi) < 1e-12 ? -psi * std::log(v) : psi * (std::pow(v, -xi) - 1.0) / xi;
  }
  return out;
}

}  // namespace testsupport

namespace testsupport {

namespace {
double beta_draw(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng), z = gb(rng);
  return x / (x + z);
}
}  // namespace

PoolSample simulate_pool(std::mt19937_64& rng, std::size_t n, std::size_t m, double lambda0, double lambda1,
                         double a, double b) {
  std::uniform_real_distribution<double> centre(0.1, 0.9), width(0.03, 0.2), spread(0.02, 0.12);
  std::normal_distribution<double> z(0.0, 1.0);
  PoolSample s;
  s.members = m;
  std::vector<double> mu(m), sigma(m);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = centre(rng);
    const double sp = spread(rng);
    for (std::size_t j = 0; j < m; ++j) {
      const double med = c + sp * z(rng);
      const double w = width(rng);
      s.q25.push_back(med - 0.5 * w);
      s.q50.push_back(med);
      s.q75.push_back(med + 0.5 * w);
      mu[j] = med;
      sigma[j] = lambda0 + lambda1 * w;
    }
    const double p = beta_draw(rng, a, b);
    auto pool = [&](double x) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += 0.5 * std::erfc(-(x - mu[j]) / (sigma[j] * std::sqrt(2.0)));
      return acc / static_cast<double>(m);
    };
    double lo = -10.0, hi = 11.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
      const double mid = 0.5 * (lo + hi);
      (pool(mid) < p ? lo : hi) = mid;
    }
    s.y.push_back(std::clamp(0.5 * (lo + hi), 0.0, 1.0));
  }
  return s;
}

EmosSample simulate_emos(std::mt19937_64& rng, std::size_t n, std::size_t m, double c0, double c1, double c2,
                         double c3) {
  std::uniform_real_distribution<double> centre(0.05, 0.8), spread(0.0, 0.15);
  std::normal_distribution<double> z(0.0, 1.0);
  EmosSample s;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = centre(rng), sp = spread(rng);
    std::vector<double> mem(m);
    for (auto& v : mem) v = std::clamp(c + sp * z(rng), 0.0, 1.0);
    double mean = 0.0;
    for (double v : mem) mean += v;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double v : mem) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(m));
    const double mu = c0 + c1 * mean, sigma = c2 + c3 * sd;
    std::gamma_distribution<double> g(mu * mu / (sigma * sigma), sigma * sigma / mu);
    s.members.push_back(std::move(mem));
    s.y.push_back(std::clamp(g(rng), 0.0, 1.0));
  }
  return s;
}

}  // namespace testsupport
