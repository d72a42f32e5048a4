#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "windcast/core.hpp"
#include "windcast/features.hpp"

namespace windcast::qgbt {

struct GbtHyperparams {
  int max_depth = 6;
  int min_samples_split = 40;
  int min_samples_leaf = 20;
  int n_estimators = 100;
  double learning_rate = 0.1;
  double subsample = 0.8;
  bool sqrt_features = true;  ///< features drawn per split: sqrt(p) if set, else all

  void validate() const;
  bool operator==(const GbtHyperparams&) const = default;
};

/// Integer box searched by tuning.
struct SearchSpace {
  int depth_lo, depth_hi;
  int split_lo, split_hi;
  int leaf_lo, leaf_hi;
  int estimators_lo, estimators_hi;

  /// Ranges for the shared weather-to-power model.
  static SearchSpace standard();
  /// Ranges for the per-horizon deterministic-NWP models.
  static SearchSpace deterministic();
  bool contains(const GbtHyperparams& hp) const;
  /// Untuned fallback inside this box.
  GbtHyperparams defaults() const;
};

/// Row-major design matrix view.
struct DesignView {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  const double* row(std::size_t i) const { return data + i * cols; }
};

inline DesignView view_of(const features::FeatureMatrix& fm) { return {fm.values.data(), fm.rows(), fm.cols()}; }

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  double predict(const double* row) const {
    int i = 0;
    while (nodes_[i].feature >= 0) i = row[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    return nodes_[i].value;
  }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::vector<Node>& nodes() noexcept { return nodes_; }
  int depth() const;

 private:
  std::vector<Node> nodes_;
};

/// Additive quantile model F(x) = F0 + lr * sum of trees for one probability level.
struct BoostedQuantileModel {
  double tau = 0.5;
  double f0 = 0.0;
  GbtHyperparams hyperparams;
  std::vector<RegressionTree> trees;

  double predict(const double* row) const;
};

/// Fits a boosted ensemble to the pinball loss at `tau`. Targets must lie in [0, 1].
BoostedQuantileModel fit_quantile_gbt(const DesignView& x, std::span<const double> y, double tau,
                                      const GbtHyperparams& hp, std::uint64_t seed);
BoostedQuantileModel fit_quantile_gbt(const features::FeatureMatrix& x, std::span<const double> y, double tau,
                                      const GbtHyperparams& hp, std::uint64_t seed);

double pinball(double q, double y, double tau);
double mean_pinball(const BoostedQuantileModel& model, const DesignView& x, std::span<const double> y);

struct TuningOptions {
  int budget = 20;
  SearchSpace space = SearchSpace::standard();
  int surrogate_threshold = 12;    ///< budgets at or above this use the surrogate search
  int surrogate_candidates = 500;  ///< random box points scored by expected improvement per step
};

struct TuningResult {
  GbtHyperparams best;
  double best_score = 0.0;
  std::vector<std::pair<GbtHyperparams, double>> history;  ///< in evaluation order
};

/// Selects hyperparameters by mean pinball loss under seeded 2-fold random-permutation CV.
TuningResult tune_hyperparams(const DesignView& x, std::span<const double> y, double tau,
                              const TuningOptions& options, std::uint64_t seed);

/// Sorts raw per-level outputs ascending and clips to [0, 1].
core::QuantileSet rearrange(const core::QuantileGrid& grid, std::vector<double> raw);

/// One boosted model per level of a quantile grid, bound to named features.
class QGbtModel {
 public:
  QGbtModel(core::QuantileGrid grid, std::vector<std::string> feature_names,
            std::vector<BoostedQuantileModel> models);

  const core::QuantileGrid& grid() const noexcept { return grid_; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }
  const std::vector<BoostedQuantileModel>& models() const noexcept { return models_; }

  /// Raw per-level outputs (no sorting, no clipping), row-major [row][level].
  std::vector<double> predict_raw(const features::FeatureMatrix& x) const;
  std::vector<core::QuantileSet> predict(const features::FeatureMatrix& x) const;

  nlohmann::json to_json() const;
  static QGbtModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static QGbtModel load(const std::filesystem::path& path);

 private:
  std::vector<std::size_t> column_map(const features::FeatureMatrix& x) const;

  core::QuantileGrid grid_;
  std::vector<std::string> names_;
  std::vector<BoostedQuantileModel> models_;
};

struct QGbtFitOptions {
  GbtHyperparams hyperparams{};
  bool tune = false;
  TuningOptions tuning{};
};

/// Fits one boosted model per grid level (each tuned separately when requested).
QGbtModel fit_qgbt(const features::FeatureMatrix& x, std::span<const double> y, const core::QuantileGrid& grid,
                   const QGbtFitOptions& options, std::uint64_t seed);

}  // namespace windcast::qgbt
