#include <gtest/gtest.h>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <random>

#include "test_support.hpp"
#include "windcast/dists.hpp"
#include "windcast/optim.hpp"

using namespace windcast;
using namespace windcast::dists;
using testsupport::make_cdf;

// ---------------------------------------------------------------------------
// Special functions

TEST(SpecialFunctions, BetaCdfClosedForms) {
  for (double z : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    EXPECT_NEAR(beta_cdf(z, 1.0, 1.0), z, 1e-15);
    EXPECT_NEAR(beta_cdf(z, 2.0, 1.0), z * z, 1e-14);
  }
  EXPECT_NEAR(beta_cdf(0.5, 2.0, 2.0), 0.5, 1e-14);
  EXPECT_EQ(beta_cdf(-0.1, 2.0, 3.0), 0.0);
  EXPECT_EQ(beta_cdf(1.1, 2.0, 3.0), 1.0);
  EXPECT_THROW(beta_cdf(0.5, 0.0, 1.0), ParameterError);
  EXPECT_THROW(beta_cdf(0.5, 1.0, -2.0), ParameterError);
}

TEST(SpecialFunctions, BetaCdfMatchesBoost) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> la(std::log(0.05), std::log(40.0)), z(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const double a = std::exp(la(rng)), b = std::exp(la(rng)), x = z(rng);
    const double ref = boost::math::ibeta(a, b, x);
    worst = std::max(worst, std::abs(beta_cdf(x, a, b) - ref));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(SpecialFunctions, GammaCdfMatchesBoost) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> la(std::log(0.05), std::log(2000.0)), u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const double a = std::exp(la(rng));
    // Spread evaluation points across the bulk and tails of the distribution.
    const double x = a * std::exp(4.0 * (u(rng) - 0.5));
    worst = std::max(worst, std::abs(gamma_p(a, x) - boost::math::gamma_p(a, x)));
  }
  EXPECT_LT(worst, 1e-10);
  EXPECT_NEAR(gamma_cdf(1.0, 1.0, 1.0), 1.0 - std::exp(-1.0), 1e-14);
  EXPECT_EQ(gamma_cdf(0.0, 2.0, 1.0), 0.0);
  EXPECT_THROW(gamma_cdf(1.0, 0.0, 1.0), ParameterError);
}

TEST(SpecialFunctions, NormalCdfAndFastTable) {
  EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-16);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
  double worst = 0.0;
  for (int i = -100000; i <= 100000; ++i) {
    const double z = i * 9.0e-5 + 1e-7;
    worst = std::max(worst, std::abs(normal_cdf_fast(z) - normal_cdf(z)));
  }
  EXPECT_LT(worst, 1e-13);
  EXPECT_EQ(normal_cdf_fast(-9.0), 0.0);
  EXPECT_EQ(normal_cdf_fast(9.0), 1.0);
  // Tabulated Phi must stay monotone across cell boundaries.
  double prev = 0.0;
  for (int i = -9000; i <= 9000; ++i) {
    const double v = normal_cdf_fast(i * 1e-3);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(SpecialFunctions, BetaFunction) {
  EXPECT_NEAR(beta_function(2.0, 3.0), 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(beta_function(0.5, 0.5), kPi, 1e-13);
}

// ---------------------------------------------------------------------------
// Nelder-Mead

TEST(NelderMead, Rosenbrock) {
  auto f = [](const std::vector<double>& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  optim::NelderMeadOptions o;
  o.f_tolerance = 1e-14;
  o.max_iterations = 5000;
  auto r = optim::nelder_mead(f, {-1.2, 1.0}, {0.5, 0.5}, o);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-3);
  EXPECT_NEAR(r.x[1], 1.0, 2e-3);
}

TEST(NelderMead, InfiniteRegionsAreAvoided) {
  auto f = [](const std::vector<double>& x) {
    return x[0] < 0 ? std::numeric_limits<double>::quiet_NaN() : (x[0] - 2) * (x[0] - 2);
  };
  auto r = optim::nelder_mead(f, {1.0}, {-2.0});
  EXPECT_NEAR(r.x[0], 2.0, 2e-3);
}

// ---------------------------------------------------------------------------
// GPD

TEST(Gpd, CdfExamples) {
  EXPECT_NEAR(gpd_cdf(1.0, {1.0, 0.0, 0.0}), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_NEAR(gpd_cdf(1.0, {1.0, 0.0, 0.0}), 0.6321, 1e-4);
  EXPECT_EQ(gpd_cdf(0.0, {1.0, 0.3, 0.0}), 0.0);
  EXPECT_EQ(gpd_cdf(0.7, {1.0, 0.3, 0.7}), 0.0);
  const GpdTail bounded{1.0, -0.5, 0.0};
  EXPECT_DOUBLE_EQ(bounded.support_end(), 2.0);
  EXPECT_EQ(gpd_cdf(2.0, bounded), 1.0);
  EXPECT_EQ(gpd_cdf(3.0, bounded), 1.0);
  EXPECT_LT(gpd_cdf(1.999, bounded), 1.0);
  EXPECT_THROW(gpd_cdf(1.0, {0.0, 0.1, 0.0}), ParameterError);
  EXPECT_THROW(gpd_cdf(1.0, {-1.0, 0.1, 0.0}), ParameterError);
}

TEST(Gpd, CdfContinuousInShape) {
  for (int i = 0; i <= 400; ++i) {
    const double z = i * 0.025;
    const double a = gpd_cdf(z, {0.7, 1e-8, 0.0});
    const double b = gpd_cdf(z, {0.7, 0.0, 0.0});
    const double c = gpd_cdf(z, {0.7, -1e-8, 0.0});
    EXPECT_LT(std::abs(a - b), 1e-6);
    EXPECT_LT(std::abs(c - b), 1e-6);
  }
}

TEST(Gpd, QuantileInvertsCdf) {
  for (double xi : {-0.4, 0.0, 0.25}) {
    const GpdTail t{0.3, xi, 0.1};
    for (double p : {0.01, 0.3, 0.5, 0.9, 0.999})
      EXPECT_NEAR(gpd_cdf(gpd_quantile(p, t), t), p, 1e-12);
  }
}

struct GpdRecoveryCase {
  double psi, xi;
};

class GpdRecovery : public ::testing::TestWithParam<GpdRecoveryCase> {};

TEST_P(GpdRecovery, SimulateAndRefit) {
  const auto c = GetParam();
  std::mt19937_64 rng(1234);
  const auto z = testsupport::sample_gpd(rng, 50000, c.psi, c.xi);
  const auto fit = fit_gpd_mle(z);
  EXPECT_FALSE(fit.fallback);
  EXPECT_NEAR(fit.tail.psi, c.psi, 0.01);
  EXPECT_NEAR(fit.tail.xi, c.xi, 0.05);
  EXPECT_EQ(fit.tail.eta, 0.0);
  EXPECT_GT(fit.iterations, 0);
  // The fit is a local maximum: nudging either parameter lowers the likelihood.
  const double ll = gpd_log_likelihood(z, fit.tail);
  for (double d : {-1e-3, 1e-3}) {
    auto t = fit.tail;
    t.psi *= 1.0 + d;
    EXPECT_LE(gpd_log_likelihood(z, t), ll + 1e-12);
    t = fit.tail;
    t.xi += d;
    EXPECT_LE(gpd_log_likelihood(z, t), ll + 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Shapes, GpdRecovery,
                         ::testing::Values(GpdRecoveryCase{0.1, 0.1}, GpdRecoveryCase{0.1, 0.0},
                                           GpdRecoveryCase{0.1, -0.2}, GpdRecoveryCase{0.2, 0.0}));

TEST(Gpd, ExponentialData) {
  std::mt19937_64 rng(99);
  std::exponential_distribution<double> e(1.0 / 0.2);
  std::vector<double> z(50000);
  for (auto& v : z) v = e(rng);
  const auto fit = fit_gpd_mle(z);
  EXPECT_NEAR(fit.tail.xi, 0.0, 0.05);
  EXPECT_NEAR(fit.tail.psi, 0.2, 0.01);
}

TEST(Gpd, SmallSampleFallback) {
  std::vector<double> z{0.1, 0.2, 0.05, 0.3, 0.0, 0.15, 0.12, 0.4, 0.02, 0.06};
  const auto fit = fit_gpd_mle(z);
  EXPECT_TRUE(fit.fallback);
  EXPECT_FALSE(fit.warning.empty());
  EXPECT_EQ(fit.tail.xi, 0.0);
  EXPECT_NEAR(fit.tail.psi, 0.14, 1e-15);
  GpdFitOptions lower_floor;
  lower_floor.min_samples = 5;
  EXPECT_FALSE(fit_gpd_mle(z, lower_floor).fallback);
}

TEST(Gpd, OptionalLocationFit) {
  std::mt19937_64 rng(7);
  auto z = testsupport::sample_gpd(rng, 20000, 0.1, 0.05);
  for (auto& v : z) v += 0.03;
  GpdFitOptions o;
  o.fit_location = true;
  const auto fit = fit_gpd_mle(z, o);
  EXPECT_NEAR(fit.tail.eta, 0.03, 0.003);
  EXPECT_NEAR(fit.tail.psi, 0.1, 0.01);
  EXPECT_LE(fit.tail.eta, *std::min_element(z.begin(), z.end()));
}

// ---------------------------------------------------------------------------
// PCHIP

TEST(Pchip, MatchesReferenceValues) {
  // Reference values from an independent PCHIP implementation (SciPy PchipInterpolator).
  Pchip p({0.0, 0.1, 0.25, 0.3, 0.6, 0.9}, {0.05, 0.2, 0.2, 0.5, 0.8, 0.95});
  const std::vector<double> xs{0.03, 0.05, 0.12, 0.2, 0.27, 0.45, 0.55, 0.75, 0.88};
  const std::vector<double> want{0.11327000000000001, 0.15125000000000002, 0.2, 0.2,
                                 0.29568524590163947, 0.7024590163934427, 0.7689738919247118,
                                 0.890625,           0.9445629629629629};
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_NEAR(p(xs[i]), want[i], 1e-13) << xs[i];
  const std::vector<double> slopes{2.1, 0.0, 0.0, 2.0655737704918034, 0.6666666666666665,
                                   0.24999999999999933};
  for (std::size_t i = 0; i < slopes.size(); ++i) EXPECT_NEAR(p.slopes()[i], slopes[i], 1e-12);

  Pchip two({0.1, 0.4}, {0.3, 0.9});
  EXPECT_NEAR(two(0.2), 0.5, 1e-14);
  EXPECT_NEAR(two(0.35), 0.8, 1e-14);
}

TEST(Pchip, NeverOvershootsProperty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(u(rng) * 20);
    std::vector<double> x(n), y(n);
    double xv = u(rng), yv = u(rng);
    for (int i = 0; i < n; ++i) {
      xv += 1e-3 + u(rng) * (u(rng) < 0.2 ? 1e-3 : 0.3);
      yv += u(rng) < 0.3 ? 0.0 : u(rng) * 0.2;
      x[i] = xv;
      y[i] = yv;
    }
    Pchip p(x, y);
    for (int i = 0; i < n; ++i) EXPECT_EQ(p(x[i]), y[i]);
    for (int i = 0; i + 1 < n; ++i) {
      double prev = y[i];
      for (int k = 1; k < 50; ++k) {
        const double v = p(x[i] + (x[i + 1] - x[i]) * k / 50.0);
        EXPECT_GE(v, y[i] - 1e-15);
        EXPECT_LE(v, y[i + 1] + 1e-15);
        EXPECT_GE(v, prev - 1e-15);
        prev = v;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Quantile CDFs

namespace {

const std::vector<double> kStd19 = [] {
  std::vector<double> v;
  for (int i = 1; i <= 19; ++i) v.push_back(i * 0.05);
  return v;
}();

std::vector<double> normal_quantiles(double mu, double sigma) {
  std::vector<double> q;
  for (double t : kStd19) q.push_back(mu + sigma * std::sqrt(2.0) * boost::math::erf_inv(2.0 * t - 1.0));
  return q;
}

}  // namespace

TEST(QuantileCdf, PassesThroughKnots) {
  const auto q = normal_quantiles(0.5, 0.1);
  const GpdTail lo{0.05, 0.0, 0.0, 0.05}, hi{0.05, 0.0, 0.0, 0.95};
  const auto f = quantiles_to_cdf(kStd19, q, lo, hi);
  EXPECT_EQ(f(q[9]), 0.5);
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(f(q[i]), kStd19[i], 1e-15);
  EXPECT_EQ(validate_cdf(f), "");
}

TEST(QuantileCdf, TailFormulas) {
  const auto q = normal_quantiles(0.5, 0.1);
  const GpdTail lo{0.04, 0.1, 0.0, 0.05}, hi{0.03, -0.2, 0.0, 0.95};
  const auto f = quantiles_to_cdf(kStd19, q, lo, hi);
  for (double x : {0.2, 0.25, 0.3}) EXPECT_NEAR(f(x), 0.05 * (1.0 - gpd_cdf(q[0] - x, lo)), 1e-15);
  for (double x : {0.7, 0.75, 0.8}) EXPECT_NEAR(f(x), 0.95 + 0.05 * gpd_cdf(x - q[18], hi), 1e-15);
}

TEST(QuantileCdf, EqualKnotsGiveStep) {
  std::vector<double> q(19, 0.4);
  const GpdTail tiny{1e-14, 0.0, 0.0};
  const auto f = quantiles_to_cdf(kStd19, q, tiny, tiny);
  EXPECT_EQ(f(0.39), 0.0);
  EXPECT_NEAR(f(0.4), 0.95, 1e-15);
  EXPECT_NEAR(f(0.41), 1.0, 1e-15);
  const auto g = quantiles_to_cdf(kStd19, q, std::nullopt, std::nullopt);
  EXPECT_EQ(g(std::nextafter(0.4, 0.0)), 0.0);
  EXPECT_EQ(g(0.4), 1.0);
  EXPECT_NEAR(crps_numeric(g, 0.4), 0.0, 1e-15);
}

TEST(QuantileCdf, TiesBecomeJumps) {
  const std::vector<double> lev{0.25, 0.5, 0.75};
  const auto f = quantiles_to_cdf(lev, std::vector<double>{0.2, 0.2, 0.6}, std::nullopt, std::nullopt);
  EXPECT_EQ(f(0.2), 0.5);
  EXPECT_EQ(f.left_limit(0.2), 0.0);
  EXPECT_EQ(f(0.6), 1.0);
  EXPECT_NEAR(f.left_limit(0.6), 0.75, 1e-15);
  EXPECT_EQ(validate_cdf(f), "");
}

TEST(QuantileCdf, LowerTailFoldsOntoZero) {
  auto q = normal_quantiles(0.2, 0.1);
  q[0] = 0.0;
  std::sort(q.begin(), q.end());
  for (auto& v : q) v = std::max(v, 0.0);
  const auto f = quantiles_to_cdf(kStd19, q, GpdTail{0.02, 0.0, 0.0}, GpdTail{0.02, 0.0, 0.0});
  EXPECT_GE(f.omega0(), 0.05);
  EXPECT_EQ(validate_cdf(f), "");
}

TEST(QuantileCdf, NonMonotoneIsContractViolation) {
  EXPECT_THROW(quantiles_to_cdf(std::vector<double>{0.25, 0.5, 0.75},
                                std::vector<double>{0.3, 0.2, 0.5}, std::nullopt, std::nullopt),
               ContractViolation);
  EXPECT_THROW(quantiles_to_cdf(std::vector<double>{0.25, 0.5},
                                std::vector<double>{0.3, std::nan("")}, std::nullopt, std::nullopt),
               ContractViolation);
}

TEST(QuantileCdf, RandomSetsAreValidCdfs) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> q(19);
    double v = u(rng) * 0.6 - 0.2;
    for (auto& x : q) {
      v += u(rng) < 0.2 ? 0.0 : u(rng) * 0.08;
      x = std::clamp(v, 0.0, 1.0);
    }
    const GpdTail lo{0.01 + u(rng) * 0.2, -0.9 + 1.8 * u(rng), 0.0};
    const GpdTail hi{0.01 + u(rng) * 0.2, -0.9 + 1.8 * u(rng), 0.0};
    const auto f = quantiles_to_cdf(kStd19, q, lo, hi);
    ASSERT_EQ(validate_cdf(f), "") << "trial " << trial;
    EXPECT_NEAR(f.omega0() + (f.left_limit(1.0) - f.omega0()) + f.omega1(), 1.0, 1e-9);
    // Interior values stay within the bounds of the neighbouring knots.
    for (std::size_t i = 0; i + 1 < q.size(); ++i) {
      if (q[i] == q[i + 1] || q[i] <= 0.0 || q[i + 1] >= 1.0) continue;
      for (int k = 1; k < 10; ++k) {
        const double x = q[i] + (q[i + 1] - q[i]) * k / 10.0;
        EXPECT_GE(f(x), kStd19[i] - 1e-15);
        EXPECT_LE(f(x), kStd19[i + 1] + 1e-15);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Inversion

TEST(CdfQuantile, Examples) {
  EXPECT_NEAR(cdf_quantile(step_cdf(0.4), 0.2), 0.4, 1e-9);
  const auto uniform = make_cdf(std::make_shared<testsupport::UniformShape>());
  EXPECT_NEAR(cdf_quantile(uniform, 0.73), 0.73, 1e-6);
  // omega0 = 0.1: CDF jumps to 0.1 at zero.
  class MassAtZero final : public CdfShape {
   public:
    double raw(double x) const override { return 0.1 + 0.9 * x; }
  };
  const auto f = make_cdf(std::make_shared<MassAtZero>());
  EXPECT_NEAR(f.omega0(), 0.1, 1e-15);
  EXPECT_EQ(cdf_quantile(f, 0.05), 0.0);
  EXPECT_NEAR(cdf_quantile(f, 0.55), 0.5, 1e-8);
  EXPECT_THROW(cdf_quantile(f, 0.0), ParameterError);
}

TEST(CdfQuantile, UpperMassReturnsOne) {
  const auto f = gamma_bounded_cdf(50.0, 50.0);  // mean 1: half the mass beyond rated power
  EXPECT_GT(f.omega1(), 0.4);
  EXPECT_EQ(cdf_quantile(f, 0.9), 1.0);
  EXPECT_LT(cdf_quantile(f, 0.3), 1.0);
}

TEST(CdfQuantile, GeneralizedInverseProperty) {
  const auto q = normal_quantiles(0.4, 0.15);
  const auto f = quantiles_to_cdf(kStd19, q, GpdTail{0.05, 0.1, 0.0}, GpdTail{0.05, -0.1, 0.0});
  for (int i = 1; i < 100; ++i) {
    const double p = i / 100.0;
    const double x = cdf_quantile(f, p);
    EXPECT_GE(f(x), p - 1e-12);
    if (x > 1e-8) EXPECT_LT(f(x - 1e-8), p + 1e-12);
  }
}

// ---------------------------------------------------------------------------
// CRPS

TEST(Crps, StepAtObservationIsZero) {
  for (double y : {0.0, 0.123, 0.5, 1.0}) EXPECT_EQ(crps_numeric(step_cdf(y), y), 0.0);
}

TEST(Crps, UniformExamples) {
  const auto f = make_cdf(std::make_shared<testsupport::UniformShape>());
  EXPECT_NEAR(crps_numeric(f, 0.0), 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(crps_numeric(f, 1.0), 1.0 / 3.0, 1e-6);
  // y^3/3 + (1-y)^3/3 at y = 0.3
  EXPECT_NEAR(crps_numeric(f, 0.3), (0.027 + 0.343) / 3.0, 1e-6);
}

TEST(Crps, StepAwayFromObservation) {
  // |c - y| for a point forecast, up to half a grid cell where the jump falls between nodes.
  const double cell = 1.0 / (kCrpsGridPoints - 1);
  EXPECT_NEAR(crps_numeric(step_cdf(0.7), 0.2), 0.5, 0.5 * cell);
  EXPECT_NEAR(crps_numeric(step_cdf(0.2), 0.7), 0.5, 0.5 * cell);
  EXPECT_NEAR(crps_numeric(step_cdf(0.0), 1.0), 1.0, 1e-12);
  EXPECT_NEAR(crps_numeric(step_cdf(0.71234), 0.2), 0.51234, 0.5 * cell);
}

TEST(Crps, NormalMatchesClosedForm) {
  const double closed = testsupport::normal_crps(0.5, 0.1, 0.5);
  EXPECT_NEAR(closed, 0.1 * (std::sqrt(2.0) - 1.0) / std::sqrt(kPi), 1e-15);
  EXPECT_NEAR(closed, 0.02336, 1e-5);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double mu = 0.3 + 0.4 * u(rng), sigma = 0.02 + 0.06 * u(rng);
    const double y = std::clamp(mu + (u(rng) - 0.5) * 4.0 * sigma, 0.0, 1.0);
    const auto f = make_cdf(std::make_shared<testsupport::NormalShape>(mu, sigma));
    EXPECT_NEAR(crps_numeric(f, y), testsupport::normal_crps(mu, sigma, y), 2e-4);
  }
}

TEST(Crps, ProperScoreSanity) {
  // Observations drawn from F score better under F than under fixed alternatives.
  const auto q = normal_quantiles(0.45, 0.12);
  const auto f = quantiles_to_cdf(kStd19, q, GpdTail{0.05, 0.0, 0.0}, GpdTail{0.05, 0.0, 0.0});
  std::vector<BoundedCdf> alternatives{
      quantiles_to_cdf(kStd19, normal_quantiles(0.55, 0.12), GpdTail{0.05, 0.0, 0.0}, GpdTail{0.05, 0.0, 0.0}),
      quantiles_to_cdf(kStd19, normal_quantiles(0.45, 0.05), GpdTail{0.02, 0.0, 0.0}, GpdTail{0.02, 0.0, 0.0}),
      quantiles_to_cdf(kStd19, normal_quantiles(0.45, 0.25), GpdTail{0.1, 0.0, 0.0}, GpdTail{0.1, 0.0, 0.0}),
      make_cdf(std::make_shared<testsupport::UniformShape>()),
      step_cdf(0.45)};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(1e-9, 1.0 - 1e-9);
  const int n = 10000;
  std::vector<double> own(n);
  std::vector<std::vector<double>> alt(alternatives.size(), std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    const double y = cdf_quantile(f, u(rng));
    own[i] = crps_numeric(f, y, 401);
    for (std::size_t a = 0; a < alternatives.size(); ++a) alt[a][i] = crps_numeric(alternatives[a], y, 401);
  }
  for (std::size_t a = 0; a < alternatives.size(); ++a) {
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = alt[a][i] - own[i];
      mean += d;
      sq += d * d;
    }
    mean /= n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    EXPECT_GT(mean + 3.0 * se, 0.0) << "alternative " << a;
    EXPECT_GT(mean, 0.0) << "alternative " << a;
  }
}

TEST(Crps, RejectsObservationOutsideUnitInterval) {
  EXPECT_THROW(crps_numeric(step_cdf(0.5), -0.1), ParameterError);
  EXPECT_THROW(crps_numeric(step_cdf(0.5), 1.1), ParameterError);
}

// ---------------------------------------------------------------------------
// Gamma CRPS

namespace {

double gamma_crps_by_quadrature(double alpha, double rate, double y) {
  auto cdf = [&](double x) { return x <= 0 ? 0.0 : boost::math::gamma_p(alpha, rate * x); };
  const double hi = std::max(y, boost::math::gamma_p_inv(alpha, 1.0 - 1e-15) / rate) * 1.05;
  return testsupport::crps_quadrature(cdf, y, 0.0, hi, 20000);
}

}  // namespace

TEST(GammaCrps, MatchesQuadrature) {
  EXPECT_NEAR(crps_gamma_closed(2.0, 3.0, 0.5), gamma_crps_by_quadrature(2.0, 3.0, 0.5), 1e-5);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double alpha = std::exp(std::log(0.5) + u(rng) * std::log(200.0));
    const double rate = std::exp(std::log(1.0) + u(rng) * std::log(100.0));
    const double y = u(rng) * 1.5 * alpha / rate + 1e-6;
    EXPECT_NEAR(crps_gamma_closed(alpha, rate, y), gamma_crps_by_quadrature(alpha, rate, y), 1e-5)
        << alpha << " " << rate << " " << y;
  }
}

TEST(GammaCrps, MatchesMonteCarlo) {
  std::mt19937_64 rng(31);
  std::gamma_distribution<double> g(1.0, 1.0);
  const int n = 1000000;
  double mean = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = g(rng), x2 = g(rng);
    const double t = std::abs(x - 0.0) - 0.5 * std::abs(x - x2);
    mean += t;
    sq += t * t;
  }
  mean /= n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_NEAR(crps_gamma_closed(1.0, 1.0, 0.0), mean, 3.0 * se);
  EXPECT_NEAR(crps_gamma_closed(1.0, 1.0, 0.0), 0.5, 1e-12);  // Exp(1) at 0: E X - E|X-X'|/2
}

TEST(GammaCrps, ScaleEquivariance) {
  for (double y : {0.0, 0.2, 0.7, 2.5}) {
    const double a = crps_gamma_closed(2.3, 4.0, y);
    const double b = crps_gamma_closed(2.3, 4.0 / 2.0, 2.0 * y) / 2.0;
    EXPECT_NEAR(a, b, 1e-13);
  }
}

TEST(GammaCrps, ParameterErrors) {
  EXPECT_THROW(crps_gamma_closed(0.0, 1.0, 0.5), ParameterError);
  EXPECT_THROW(crps_gamma_closed(1.0, -1.0, 0.5), ParameterError);
  EXPECT_THROW(crps_gamma_closed(1.0, 1.0, -0.5), ParameterError);
}

TEST(GammaCdfBounded, BoundaryMasses) {
  const auto f = gamma_bounded_cdf(4.0, 8.0);
  EXPECT_EQ(f.omega0(), 0.0);
  EXPECT_NEAR(f.omega1(), 1.0 - boost::math::gamma_p(4.0, 8.0), 1e-12);
  EXPECT_EQ(validate_cdf(f), "");
}
