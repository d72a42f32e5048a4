#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "test_support.hpp"
#include "windcast/qgbt.hpp"

namespace {

using namespace windcast;
using namespace windcast::qgbt;
using features::FeatureMatrix;

struct Dataset {
  FeatureMatrix x;
  std::vector<double> y;
};

// y | x ~ Uniform(0, x) with x ~ Uniform(0.5, 1), plus optional pure-noise columns.
Dataset uniform_law(std::size_t n, std::uint64_t seed, int noise_cols = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::string> names{"x"};
  for (int j = 0; j < noise_cols; ++j) names.push_back("noise" + std::to_string(j));
  Dataset d{FeatureMatrix(names), {}};
  const auto t0 = core::make_utc(2020, 1, 1);
  std::vector<double> row(names.size());
  for (std::size_t i = 0; i < n; ++i) {
    row[0] = 0.5 + 0.5 * u01(rng);
    for (int j = 0; j < noise_cols; ++j) row[static_cast<std::size_t>(j) + 1] = u01(rng);
    d.x.append(t0 + core::Hours{static_cast<long>(i)}, row);
    d.y.push_back(row[0] * u01(rng));
  }
  return d;
}

GbtHyperparams quick() {
  GbtHyperparams hp;
  hp.max_depth = 5;
  hp.min_samples_split = 40;
  hp.min_samples_leaf = 20;
  hp.n_estimators = 100;
  return hp;
}

TEST(Pinball, Examples) {
  EXPECT_DOUBLE_EQ(pinball(0.0, 1.0, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(pinball(0.3, 0.3, 0.2), 0.0);
  EXPECT_DOUBLE_EQ(pinball(0.0, 1.0, 0.9), 0.9);
  EXPECT_DOUBLE_EQ(pinball(1.0, 0.0, 0.9), 0.1);
  EXPECT_THROW(pinball(0.0, 1.0, 1.0), ParameterError);
}

TEST(Rearrange, SortsAndClips) {
  const core::QuantileGrid g = core::QuantileGrid::iqr();
  const auto a = rearrange(g, {0.3, 0.2, 0.5});
  EXPECT_EQ(std::vector<double>(a.values().begin(), a.values().end()), (std::vector<double>{0.2, 0.3, 0.5}));
  const auto b = rearrange(g, {0.1, 0.2, 0.3});
  EXPECT_EQ(std::vector<double>(b.values().begin(), b.values().end()), (std::vector<double>{0.1, 0.2, 0.3}));
  const auto c = rearrange(g, {-0.2, 0.5, 1.07});
  EXPECT_EQ(c.values()[0], 0.0);
  EXPECT_EQ(c.values()[2], 1.0);
  EXPECT_THROW(rearrange(g, {0.1, 0.2}), SchemaError);
}

TEST(Fit, ConstantTarget) {
  auto d = uniform_law(500, 1, 2);
  std::fill(d.y.begin(), d.y.end(), 0.4);
  for (double tau : {0.05, 0.5, 0.95}) {
    const auto m = fit_quantile_gbt(d.x, d.y, tau, quick(), 3);
    for (std::size_t i = 0; i < d.x.rows(); i += 17) EXPECT_DOUBLE_EQ(m.predict(d.x.row(i)), 0.4);
  }
}

TEST(Fit, Errors) {
  const auto d = uniform_law(30, 2);
  EXPECT_THROW(fit_quantile_gbt(d.x, d.y, 0.5, quick(), 1), FitError);  // 30 < 2 x 20
  auto bad = uniform_law(200, 2);
  bad.y[3] = 1.5;
  EXPECT_THROW(fit_quantile_gbt(bad.x, bad.y, 0.5, quick(), 1), FitError);
  EXPECT_THROW(fit_quantile_gbt(bad.x, std::vector<double>(5, 0.1), 0.5, quick(), 1), FitError);
  GbtHyperparams hp = quick();
  hp.subsample = 0.0;
  EXPECT_THROW(fit_quantile_gbt(d.x, d.y, 0.5, hp, 1), ParameterError);
}

TEST(Fit, MedianRecoveryOnUniformLaw) {
  const auto train = uniform_law(20000, 10);
  const auto test = uniform_law(5000, 11);
  GbtHyperparams hp;  // defaults
  const auto q50 = fit_quantile_gbt(train.x, train.y, 0.5, hp, 5);
  double mad = 0.0;
  for (std::size_t i = 0; i < test.x.rows(); ++i) mad += std::abs(q50.predict(test.x.row(i)) - 0.5 * test.x.at(i, 0));
  mad /= static_cast<double>(test.x.rows());
  EXPECT_LT(mad, 0.05);
  // The analytic conditional quantile at tau is tau * x.
  const auto q90 = fit_quantile_gbt(train.x, train.y, 0.9, hp, 5);
  const auto q10 = fit_quantile_gbt(train.x, train.y, 0.1, hp, 5);
  std::size_t ordered = 0;
  double mad90 = 0.0;
  for (std::size_t i = 0; i < test.x.rows(); ++i) {
    const double hi = q90.predict(test.x.row(i)), lo = q10.predict(test.x.row(i));
    ordered += hi >= lo;
    mad90 += std::abs(hi - 0.9 * test.x.at(i, 0));
  }
  EXPECT_GE(static_cast<double>(ordered) / static_cast<double>(test.x.rows()), 0.98);
  EXPECT_LT(mad90 / static_cast<double>(test.x.rows()), 0.05);
}

TEST(Fit, SingleStumpMatchesBruteForce) {
  // One full-data, unit-rate round: the chosen split maximizes the reduction in squared error of
  // the pinball gradients, and each leaf holds the type-1 quantile of its residuals.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 60;
    FeatureMatrix x({"a", "b"});
    std::vector<double> y;
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> r{std::round(u01(rng) * 20) / 20, u01(rng)};
      x.append(core::make_utc(2020, 1, 1) + core::Hours{static_cast<long>(i)}, r);
      y.push_back(std::clamp(0.3 * r[0] + 0.5 * r[1] * u01(rng), 0.0, 1.0));
    }
    const double tau = 0.3;
    GbtHyperparams hp;
    hp.max_depth = 1;
    hp.min_samples_split = 2;
    hp.min_samples_leaf = 5;
    hp.n_estimators = 1;
    hp.learning_rate = 1.0;
    hp.subsample = 1.0;
    hp.sqrt_features = false;
    const auto m = fit_quantile_gbt(x, y, tau, hp, 9);

    std::vector<double> sorted = y;
    std::sort(sorted.begin(), sorted.end());
    const double f0 = sorted[static_cast<std::size_t>(std::ceil(n * tau - 1e-9)) - 1];
    EXPECT_DOUBLE_EQ(m.f0, f0);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = tau - (y[i] < f0 ? 1.0 : 0.0);
    auto sse = [&](const std::vector<std::size_t>& ids) {
      double mean = 0.0;
      for (auto i : ids) mean += g[i];
      mean /= static_cast<double>(ids.size());
      double s = 0.0;
      for (auto i : ids) s += (g[i] - mean) * (g[i] - mean);
      return s;
    };
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    const double root = sse(all);
    double best_gain = 1e-12;
    int best_f = -1;
    double best_thr = 0.0;
    for (int f = 0; f < 2; ++f) {
      std::vector<double> vals;
      for (std::size_t i = 0; i < n; ++i) vals.push_back(x.at(i, static_cast<std::size_t>(f)));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
        const double thr = 0.5 * (vals[k] + vals[k + 1]);
        std::vector<std::size_t> l, r;
        for (std::size_t i = 0; i < n; ++i) (x.at(i, static_cast<std::size_t>(f)) <= thr ? l : r).push_back(i);
        if (l.size() < 5 || r.size() < 5) continue;
        const double gain = root - sse(l) - sse(r);
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_f = f;
          best_thr = thr;
        }
      }
    }
    const auto& nodes = m.trees.at(0).nodes();
    ASSERT_EQ(nodes[0].feature, best_f) << "rep " << rep;
    if (best_f < 0) continue;
    EXPECT_DOUBLE_EQ(nodes[0].threshold, best_thr);
    for (bool left : {true, false}) {
      std::vector<double> res;
      for (std::size_t i = 0; i < n; ++i)
        if ((x.at(i, static_cast<std::size_t>(best_f)) <= best_thr) == left) res.push_back(y[i] - f0);
      std::sort(res.begin(), res.end());
      const double leaf = res[static_cast<std::size_t>(std::ceil(res.size() * tau - 1e-9)) - 1];
      EXPECT_DOUBLE_EQ(nodes[static_cast<std::size_t>(left ? nodes[0].left : nodes[0].right)].value, leaf);
    }
  }
}

TEST(Fit, OneGreedyTreeNeverWorsensTrainingLoss) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    const auto d = uniform_law(300 + 20 * static_cast<std::size_t>(rep), 100 + static_cast<std::uint64_t>(rep), 3);
    const double tau = 0.05 + 0.9 * u01(rng);
    GbtHyperparams hp;
    hp.max_depth = 1 + rep % 6;
    hp.min_samples_split = 2 + rep;
    hp.min_samples_leaf = 1 + rep % 7;
    hp.n_estimators = 1;
    hp.learning_rate = 1.0;
    hp.subsample = 1.0;
    const auto m = fit_quantile_gbt(d.x, d.y, tau, hp, static_cast<std::uint64_t>(rep));
    double constant = 0.0;
    for (double y : d.y) constant += pinball(m.f0, y, tau);
    constant /= static_cast<double>(d.y.size());
    EXPECT_LE(mean_pinball(m, view_of(d.x), d.y), constant + 1e-15) << "rep " << rep;
  }
}

TEST(Fit, RowPermutationInvariantWithoutSubsampling) {
  const auto d = uniform_law(2000, 21, 4);
  GbtHyperparams hp = quick();
  hp.subsample = 1.0;
  hp.n_estimators = 30;
  const auto m = fit_quantile_gbt(d.x, d.y, 0.7, hp, 77);

  std::vector<std::size_t> perm(d.y.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(5);
  std::shuffle(perm.begin(), perm.end(), rng);
  FeatureMatrix xs(d.x.names);
  std::vector<double> ys;
  for (std::size_t i : perm) {
    xs.append(d.x.times[0], {d.x.row(i), d.x.cols()});
    ys.push_back(d.y[i]);
  }
  const auto ms = fit_quantile_gbt(xs, ys, 0.7, hp, 77);
  const auto test = uniform_law(500, 22, 4);
  for (std::size_t i = 0; i < test.x.rows(); ++i) ASSERT_EQ(m.predict(test.x.row(i)), ms.predict(test.x.row(i)));
}

TEST(Fit, Deterministic) {
  const auto d = uniform_law(3000, 31, 5);
  const auto a = fit_quantile_gbt(d.x, d.y, 0.25, quick(), 123);
  const auto b = fit_quantile_gbt(d.x, d.y, 0.25, quick(), 123);
  const auto c = fit_quantile_gbt(d.x, d.y, 0.25, quick(), 124);
  bool any_diff = false;
  for (std::size_t i = 0; i < d.x.rows(); ++i) {
    ASSERT_NEAR(a.predict(d.x.row(i)), b.predict(d.x.row(i)), 1e-15);
    any_diff = any_diff || a.predict(d.x.row(i)) != c.predict(d.x.row(i));
  }
  EXPECT_TRUE(any_diff);
}

TEST(Fit, TreesRespectLimits) {
  const auto d = uniform_law(3000, 41, 5);
  GbtHyperparams hp = quick();
  hp.max_depth = 3;
  hp.min_samples_leaf = 50;
  const auto m = fit_quantile_gbt(d.x, d.y, 0.5, hp, 1);
  ASSERT_EQ(m.trees.size(), 100u);
  for (const auto& t : m.trees) EXPECT_LE(t.depth(), 3);
}

TEST(Model, PredictRearrangesAndChecksSchema) {
  const auto d = uniform_law(3000, 51, 2);
  QGbtFitOptions opt;
  opt.hyperparams = quick();
  opt.hyperparams.n_estimators = 20;
  const auto model = fit_qgbt(d.x, d.y, core::QuantileGrid::standard(), opt, 3);
  EXPECT_EQ(model.models().size(), 19u);
  const auto test = uniform_law(1000, 52, 2);
  const auto sets = model.predict(test.x);
  ASSERT_EQ(sets.size(), 1000u);
  for (const auto& s : sets)
    for (std::size_t k = 1; k < s.size(); ++k) ASSERT_LE(s.values()[k - 1], s.values()[k]);

  // Reordered columns give the same answer; unknown or missing columns are schema errors.
  FeatureMatrix swapped({"noise1", "x", "noise0"});
  for (std::size_t i = 0; i < test.x.rows(); ++i)
    swapped.append(test.x.times[i], std::vector<double>{test.x.at(i, 2), test.x.at(i, 0), test.x.at(i, 1)});
  EXPECT_EQ(model.predict_raw(swapped), model.predict_raw(test.x));
  FeatureMatrix extra({"x", "noise0", "noise1", "other"});
  extra.append(test.x.times[0], std::vector<double>{0.7, 0.1, 0.2, 0.3});
  EXPECT_THROW(model.predict(extra), SchemaError);
  FeatureMatrix missing({"x", "noise0"});
  missing.append(test.x.times[0], std::vector<double>{0.7, 0.1});
  EXPECT_THROW(model.predict(missing), SchemaError);
}

TEST(Model, JsonRoundTrip) {
  const auto d = uniform_law(2000, 61, 3);
  QGbtFitOptions opt;
  opt.hyperparams = quick();
  opt.hyperparams.n_estimators = 15;
  const auto model = fit_qgbt(d.x, d.y, core::QuantileGrid::iqr(), opt, 9);
  const auto dir = std::filesystem::temp_directory_path() / "windcast_test_qgbt";
  std::filesystem::create_directories(dir);
  model.save(dir / "m.json");
  const auto back = QGbtModel::load(dir / "m.json");
  EXPECT_EQ(back.feature_names(), model.feature_names());
  EXPECT_EQ(back.grid(), model.grid());
  EXPECT_EQ(back.predict_raw(d.x), model.predict_raw(d.x));
  EXPECT_EQ(back.models()[1].hyperparams, model.models()[1].hyperparams);
  const auto j = model.to_json();
  EXPECT_EQ(j.at("version"), 1);
  EXPECT_TRUE(j.at("models")[0].at("trees")[0].contains("left") || j.at("models")[0].at("trees")[0].contains("leaf"));
  auto broken = j;
  broken["version"] = 99;
  EXPECT_THROW(QGbtModel::from_json(broken), FormatError);
  EXPECT_THROW(QGbtModel::load(dir / "absent.json"), MissingArtifactError);
}

TEST(Tuning, BudgetRules) {
  const auto d = uniform_law(600, 71, 2);
  TuningOptions opt;
  opt.budget = 0;
  EXPECT_THROW(tune_hyperparams(view_of(d.x), d.y, 0.5, opt, 1), ConfigError);
  opt.budget = 1;
  const auto one = tune_hyperparams(view_of(d.x), d.y, 0.5, opt, 1);
  ASSERT_EQ(one.history.size(), 1u);
  EXPECT_EQ(one.best, one.history[0].first);
  EXPECT_GE(one.best.max_depth, 5);
  EXPECT_LE(one.best.max_depth, 9);
  EXPECT_LE(one.best.min_samples_leaf, 150);  // half of a 300-row fold
}

TEST(Tuning, DeterministicAndInsideBox) {
  const auto d = uniform_law(800, 72, 2);
  TuningOptions opt;
  opt.budget = 14;  // surrogate path
  opt.surrogate_candidates = 200;
  const auto a = tune_hyperparams(view_of(d.x), d.y, 0.5, opt, 5);
  const auto b = tune_hyperparams(view_of(d.x), d.y, 0.5, opt, 5);
  ASSERT_EQ(a.history.size(), 14u);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].first, b.history[i].first);
    EXPECT_EQ(a.history[i].second, b.history[i].second);
  }
  EXPECT_EQ(a.best, b.best);
  const auto s = SearchSpace::standard();
  for (const auto& [hp, score] : a.history) {
    EXPECT_GE(hp.max_depth, s.depth_lo);
    EXPECT_LE(hp.max_depth, s.depth_hi);
    EXPECT_LE(hp.min_samples_leaf, 200);  // leaf box shrunk to half a fold
    EXPECT_LE(hp.n_estimators, s.estimators_hi);
  }
  // The selected candidate is the earliest minimum of the history.
  std::size_t arg = 0;
  for (std::size_t i = 1; i < a.history.size(); ++i)
    if (a.history[i].second < a.history[arg].second) arg = i;
  EXPECT_EQ(a.best, a.history[arg].first);
  EXPECT_EQ(a.best_score, a.history[arg].second);
}

TEST(Tuning, TunedNotWorseThanDefault) {
  // Paired over five seeds: held-out pinball of the tuned model against the untuned default.
  std::vector<double> diff;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto train = uniform_law(3000, 200 + s, 3);
    const auto test = uniform_law(3000, 300 + s, 3);
    TuningOptions opt;
    opt.budget = 12;
    opt.surrogate_candidates = 200;
    const auto tuned_hp = tune_hyperparams(view_of(train.x), train.y, 0.5, opt, s).best;
    const auto tuned = fit_quantile_gbt(train.x, train.y, 0.5, tuned_hp, s);
    const auto plain = fit_quantile_gbt(train.x, train.y, 0.5, SearchSpace::standard().defaults(), s);
    diff.push_back(mean_pinball(tuned, view_of(test.x), test.y) - mean_pinball(plain, view_of(test.x), test.y));
  }
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / 5.0;
  double var = 0.0;
  for (double v : diff) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / 4.0 / 5.0);
  EXPECT_LE(mean, 2.0 * se + 1e-4) << "mean paired difference " << mean;
}

TEST(SearchSpaces, Ranges) {
  const auto s = SearchSpace::standard();
  EXPECT_EQ(s.depth_lo, 5);
  EXPECT_EQ(s.depth_hi, 9);
  EXPECT_EQ(s.split_hi, 350);
  EXPECT_EQ(s.leaf_lo, 2);
  EXPECT_EQ(s.estimators_hi, 150);
  const auto h = SearchSpace::deterministic();
  EXPECT_EQ(h.split_lo, 10);
  EXPECT_EQ(h.leaf_hi, 110);
  EXPECT_EQ(h.estimators_lo, 50);
  EXPECT_EQ(h.estimators_hi, 400);
  EXPECT_TRUE(s.contains(s.defaults()));
  EXPECT_TRUE(h.contains(h.defaults()));
  const GbtHyperparams hp;
  EXPECT_DOUBLE_EQ(hp.learning_rate, 0.1);
  EXPECT_DOUBLE_EQ(hp.subsample, 0.8);
  EXPECT_TRUE(hp.sqrt_features);
}

}  // namespace
