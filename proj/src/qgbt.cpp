#include "windcast/qgbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "windcast/dataio.hpp"
#include "windcast/special_functions.hpp"

namespace windcast::qgbt {

namespace {

enum Stream : std::uint64_t { kSubsample = 11, kFeatures, kFoldSplit, kCandidates, kFoldFit, kLevel };

constexpr double kMinGain = 1e-12;
constexpr int kFormatVersion = 1;

// Type-1 empirical quantile (inverse ECDF): the ceil(n tau)-th order statistic.
double quantile_type1(std::vector<double>& v, double tau) {
  const double n = static_cast<double>(v.size());
  auto k = static_cast<std::size_t>(std::ceil(n * tau - 1e-9));
  k = std::clamp<std::size_t>(k, 1, v.size()) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

class TreeBuilder {
 public:
  TreeBuilder(const DesignView& x, std::span<const double> y, std::span<const double> f, double tau,
              const GbtHyperparams& hp, std::uint64_t seed)
      : x_(x), y_(y), f_(f), tau_(tau), hp_(hp), seed_(seed) {
    const std::size_t p = x.cols;
    n_features_ = hp.sqrt_features ? std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p))))
                                   : p;
    n_features_ = std::min(n_features_, p);
  }

  RegressionTree build(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    neg_.assign(x_.rows, 0);
    for (std::size_t i : rows_) neg_[i] = y_[i] < f_[i] ? 1 : 0;
    RegressionTree tree;
    nodes_ = &tree.nodes();
    node_counter_ = 0;
    grow(0, rows_.size(), 0);
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = kMinGain;
  };

  int grow(std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(nodes_->size());
    nodes_->emplace_back();
    const std::uint64_t node_key = node_counter_++;
    const std::size_t n = end - begin;

    Split best;
    if (depth < hp_.max_depth && n >= static_cast<std::size_t>(hp_.min_samples_split) &&
        n >= 2 * static_cast<std::size_t>(hp_.min_samples_leaf))
      best = find_split(begin, end, node_key);

    if (best.feature < 0) {
      std::vector<double> r;
      r.reserve(n);
      for (std::size_t k = begin; k < end; ++k) r.push_back(y_[rows_[k]] - f_[rows_[k]]);
      (*nodes_)[id].value = quantile_type1(r, tau_);
      return id;
    }
    const auto f = static_cast<std::size_t>(best.feature);
    const auto mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                           rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                           [&](std::size_t i) { return x_.row(i)[f] <= best.threshold; });
    const auto split_at = static_cast<std::size_t>(mid - rows_.begin());
    const int left = grow(begin, split_at, depth + 1);
    const int right = grow(split_at, end, depth + 1);
    auto& node = (*nodes_)[id];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  std::vector<std::size_t> draw_features(std::uint64_t node_key) const {
    std::vector<std::size_t> all(x_.cols);
    std::iota(all.begin(), all.end(), 0);
    if (n_features_ >= x_.cols) return all;
    std::mt19937_64 rng(core::derive_seed(seed_, {kFeatures, node_key}));
    for (std::size_t i = 0; i < n_features_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    all.resize(n_features_);
    std::sort(all.begin(), all.end());
    return all;
  }

  // Variance reduction of the pinball gradient tau - 1{y < F}; sums follow from counts alone.
  Split find_split(std::size_t begin, std::size_t end, std::uint64_t node_key) {
    const std::size_t n = end - begin;
    const auto leaf = static_cast<std::size_t>(hp_.min_samples_leaf);
    std::size_t neg_total = 0;
    for (std::size_t k = begin; k < end; ++k) neg_total += neg_[rows_[k]];
    const double total = tau_ * static_cast<double>(n) - static_cast<double>(neg_total);
    const double parent = total * total / static_cast<double>(n);

    Split best;
    buf_.resize(n);
    for (std::size_t f : draw_features(node_key)) {
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = rows_[begin + k];
        buf_[k] = {x_.row(i)[f], neg_[i]};
      }
      std::sort(buf_.begin(), buf_.end());
      std::size_t neg_left = 0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        neg_left += buf_[k].second;
        const std::size_t nl = k + 1, nr = n - nl;
        if (nl < leaf) continue;
        if (nr < leaf) break;
        const double a = buf_[k].first, b = buf_[k + 1].first;
        if (!(a < b)) continue;
        const double sl = tau_ * static_cast<double>(nl) - static_cast<double>(neg_left);
        const double sr = total - sl;
        const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) - parent;
        if (gain > best.gain) {
          double thr = a + 0.5 * (b - a);
          if (!(thr < b)) thr = a;
          best = {static_cast<int>(f), thr, gain};
        }
      }
    }
    return best;
  }

  const DesignView& x_;
  std::span<const double> y_;
  std::span<const double> f_;
  double tau_;
  const GbtHyperparams& hp_;
  std::uint64_t seed_;
  std::size_t n_features_ = 1;

  std::vector<std::size_t> rows_;
  std::vector<char> neg_;
  std::vector<std::pair<double, char>> buf_;
  std::vector<RegressionTree::Node>* nodes_ = nullptr;
  std::uint64_t node_counter_ = 0;
};

GbtHyperparams draw_candidate(std::mt19937_64& rng, const SearchSpace& s) {
  auto draw = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  GbtHyperparams hp;
  hp.max_depth = draw(s.depth_lo, s.depth_hi);
  hp.min_samples_split = draw(s.split_lo, s.split_hi);
  hp.min_samples_leaf = draw(s.leaf_lo, s.leaf_hi);
  hp.n_estimators = draw(s.estimators_lo, s.estimators_hi);
  return hp;
}

Eigen::Vector4d unit_coords(const GbtHyperparams& hp, const SearchSpace& s) {
  auto u = [](int v, int lo, int hi) { return hi > lo ? static_cast<double>(v - lo) / (hi - lo) : 0.0; };
  return {u(hp.max_depth, s.depth_lo, s.depth_hi), u(hp.min_samples_split, s.split_lo, s.split_hi),
          u(hp.min_samples_leaf, s.leaf_lo, s.leaf_hi), u(hp.n_estimators, s.estimators_lo, s.estimators_hi)};
}

// Gaussian-process surrogate with an RBF kernel; length scale picked by marginal likelihood.
class Surrogate {
 public:
  Surrogate(const std::vector<Eigen::Vector4d>& x, const std::vector<double>& score) : x_(x) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = score[static_cast<std::size_t>(i)];
    mean_ = y.mean();
    const double var = (y.array() - mean_).square().mean();
    scale_ = var > 0 ? std::sqrt(var) : 1.0;
    y_ = (y.array() - mean_) / scale_;

    double best_ll = -std::numeric_limits<double>::infinity();
    for (double ell : {0.1, 0.2, 0.4, 0.8}) {
      Eigen::MatrixXd k = kernel_matrix(ell);
      Eigen::LLT<Eigen::MatrixXd> llt(k);
      if (llt.info() != Eigen::Success) continue;
      const Eigen::VectorXd alpha = llt.solve(y_);
      const Eigen::MatrixXd l = llt.matrixL();
      const double ll = -0.5 * y_.dot(alpha) - l.diagonal().array().log().sum();
      if (ll > best_ll) {
        best_ll = ll;
        ell_ = ell;
        alpha_ = alpha;
        llt_ = llt;
      }
    }
    ok_ = std::isfinite(best_ll);
  }

  bool ok() const { return ok_; }

  /// Expected improvement (minimization) in standardized units.
  double expected_improvement(const Eigen::Vector4d& u, double best_standardized) const {
    Eigen::VectorXd k(static_cast<Eigen::Index>(x_.size()));
    for (std::size_t i = 0; i < x_.size(); ++i) k[static_cast<Eigen::Index>(i)] = rbf(u, x_[i], ell_);
    const double mu = k.dot(alpha_);
    const double var = std::max(1.0 - k.dot(llt_.solve(k)), 1e-12);
    const double sd = std::sqrt(var);
    const double imp = best_standardized - mu - 0.01;
    const double z = imp / sd;
    return imp * dists::normal_cdf(z) + sd * dists::normal_pdf(z);
  }

  double standardize(double s) const { return (s - mean_) / scale_; }

 private:
  static double rbf(const Eigen::Vector4d& a, const Eigen::Vector4d& b, double ell) {
    return std::exp(-0.5 * (a - b).squaredNorm() / (ell * ell));
  }
  Eigen::MatrixXd kernel_matrix(double ell) const {
    const auto n = static_cast<Eigen::Index>(x_.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        k(i, j) = rbf(x_[static_cast<std::size_t>(i)], x_[static_cast<std::size_t>(j)], ell);
    k.diagonal().array() += 1e-6;
    return k;
  }

  const std::vector<Eigen::Vector4d>& x_;
  Eigen::VectorXd y_, alpha_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double mean_ = 0.0, scale_ = 1.0, ell_ = 0.2;
  bool ok_ = false;
};

}  // namespace

void GbtHyperparams::validate() const {
  if (max_depth < 1 || min_samples_split < 2 || min_samples_leaf < 1 || n_estimators < 1)
    throw ParameterError("tree hyperparameters out of range");
  if (!(learning_rate > 0.0) || !(subsample > 0.0 && subsample <= 1.0))
    throw ParameterError("learning rate must be positive and subsample in (0, 1]");
}

SearchSpace SearchSpace::standard() { return {5, 9, 2, 350, 2, 350, 2, 150}; }
SearchSpace SearchSpace::deterministic() { return {5, 9, 10, 160, 10, 110, 50, 400}; }

bool SearchSpace::contains(const GbtHyperparams& hp) const {
  return hp.max_depth >= depth_lo && hp.max_depth <= depth_hi && hp.min_samples_split >= split_lo &&
         hp.min_samples_split <= split_hi && hp.min_samples_leaf >= leaf_lo && hp.min_samples_leaf <= leaf_hi &&
         hp.n_estimators >= estimators_lo && hp.n_estimators <= estimators_hi;
}

GbtHyperparams SearchSpace::defaults() const {
  GbtHyperparams hp;
  hp.max_depth = std::clamp(6, depth_lo, depth_hi);
  hp.min_samples_split = std::clamp(40, split_lo, split_hi);
  hp.min_samples_leaf = std::clamp(20, leaf_lo, leaf_hi);
  hp.n_estimators = std::clamp(100, estimators_lo, estimators_hi);
  return hp;
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return best;
}

double BoostedQuantileModel::predict(const double* row) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(row);
  return f0 + hyperparams.learning_rate * s;
}

double pinball(double q, double y, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("tau must lie in (0, 1)");
  return y >= q ? tau * (y - q) : (1.0 - tau) * (q - y);
}

double mean_pinball(const BoostedQuantileModel& model, const DesignView& x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) s += pinball(model.predict(x.row(i)), y[i], model.tau);
  return s / static_cast<double>(x.rows);
}

BoostedQuantileModel fit_quantile_gbt(const DesignView& x, std::span<const double> y, double tau,
                                      const GbtHyperparams& hp, std::uint64_t seed) {
  hp.validate();
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("tau must lie in (0, 1)");
  if (y.size() != x.rows) throw FitError("feature rows and targets differ in length");
  if (x.rows < 2 * static_cast<std::size_t>(hp.min_samples_leaf) || x.rows == 0)
    throw FitError("too few rows (" + std::to_string(x.rows) + ") for min_samples_leaf " +
                   std::to_string(hp.min_samples_leaf));
  for (double v : y)
    if (!(v >= 0.0 && v <= 1.0)) throw FitError("targets must lie in [0, 1]");
  for (std::size_t i = 0; i < x.rows * x.cols; ++i)
    if (!std::isfinite(x.data[i])) throw FitError("non-finite feature value");

  BoostedQuantileModel model;
  model.tau = tau;
  model.hyperparams = hp;
  std::vector<double> tmp(y.begin(), y.end());
  model.f0 = quantile_type1(tmp, tau);

  std::vector<double> f(x.rows, model.f0);
  const std::size_t n_sub =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(hp.subsample * static_cast<double>(x.rows))));
  std::vector<std::size_t> all(x.rows);
  std::iota(all.begin(), all.end(), 0);

  for (int m = 0; m < hp.n_estimators; ++m) {
    std::vector<std::size_t> rows = all;
    if (n_sub < x.rows) {
      std::mt19937_64 rng(core::derive_seed(seed, {kSubsample, static_cast<std::uint64_t>(m)}));
      for (std::size_t i = 0; i < n_sub; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
        std::swap(rows[i], rows[pick(rng)]);
      }
      rows.resize(n_sub);
      std::sort(rows.begin(), rows.end());
    }
    TreeBuilder builder(x, y, f, tau, hp, core::derive_seed(seed, {static_cast<std::uint64_t>(m)}));
    model.trees.push_back(builder.build(std::move(rows)));
    const auto& tree = model.trees.back();
    for (std::size_t i = 0; i < x.rows; ++i) f[i] += hp.learning_rate * tree.predict(x.row(i));
  }
  return model;
}

BoostedQuantileModel fit_quantile_gbt(const features::FeatureMatrix& x, std::span<const double> y, double tau,
                                      const GbtHyperparams& hp, std::uint64_t seed) {
  return fit_quantile_gbt(view_of(x), y, tau, hp, seed);
}

TuningResult tune_hyperparams(const DesignView& x, std::span<const double> y, double tau,
                              const TuningOptions& options, std::uint64_t seed) {
  if (options.budget < 1) throw ConfigError("hyperparameter search budget must be at least 1");
  if (y.size() != x.rows) throw FitError("feature rows and targets differ in length");

  // Fixed random 50/50 split shared by every candidate.
  std::vector<std::size_t> perm(x.rows);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 split_rng(core::derive_seed(seed, {kFoldSplit}));
  std::shuffle(perm.begin(), perm.end(), split_rng);
  const std::size_t half = x.rows / 2;
  std::vector<std::size_t> fold[2] = {{perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half)},
                                      {perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end()}};
  std::vector<double> fx[2], fy[2];
  for (int k = 0; k < 2; ++k) {
    std::sort(fold[k].begin(), fold[k].end());
    for (std::size_t i : fold[k]) {
      fx[k].insert(fx[k].end(), x.row(i), x.row(i) + x.cols);
      fy[k].push_back(y[i]);
    }
  }
  const DesignView fv[2] = {{fx[0].data(), fy[0].size(), x.cols}, {fx[1].data(), fy[1].size(), x.cols}};
  const std::size_t smallest = std::min(fy[0].size(), fy[1].size());
  if (smallest < 2) throw FitError("too few rows for cross-validation");

  // Leaf sizes larger than half a fold cannot be fitted; shrink the box to what the data allow.
  SearchSpace space = options.space;
  const int feasible_leaf = static_cast<int>(smallest / 2);
  space.leaf_hi = std::max(space.leaf_lo, std::min(space.leaf_hi, feasible_leaf));
  space.leaf_lo = std::min(space.leaf_lo, space.leaf_hi);

  auto score = [&](const GbtHyperparams& hp) {
    double total = 0.0;
    for (int k = 0; k < 2; ++k) {
      try {
        const auto m = fit_quantile_gbt(fv[k], fy[k], tau, hp, core::derive_seed(seed, {kFoldFit, static_cast<std::uint64_t>(k)}));
        total += mean_pinball(m, fv[1 - k], fy[1 - k]);
      } catch (const FitError&) {
        return std::numeric_limits<double>::infinity();
      }
    }
    return 0.5 * total;
  };

  TuningResult out;
  std::vector<Eigen::Vector4d> coords;
  std::vector<double> scores;
  auto evaluate = [&](const GbtHyperparams& hp) {
    const double s = score(hp);
    out.history.emplace_back(hp, s);
    coords.push_back(unit_coords(hp, space));
    scores.push_back(s);
  };

  std::mt19937_64 cand_rng(core::derive_seed(seed, {kCandidates}));
  const bool surrogate = options.budget >= options.surrogate_threshold;
  const int n_initial = surrogate ? std::max(5, options.budget / 3) : options.budget;
  for (int i = 0; i < std::min(n_initial, options.budget); ++i) evaluate(draw_candidate(cand_rng, space));

  while (static_cast<int>(out.history.size()) < options.budget) {
    std::vector<Eigen::Vector4d> fx_coords;
    std::vector<double> fx_scores;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (std::isfinite(scores[i])) {
        fx_coords.push_back(coords[i]);
        fx_scores.push_back(scores[i]);
      }
    GbtHyperparams next = draw_candidate(cand_rng, space);
    if (fx_scores.size() >= 2) {
      const Surrogate gp(fx_coords, fx_scores);
      if (gp.ok()) {
        const double best = gp.standardize(*std::min_element(fx_scores.begin(), fx_scores.end()));
        double best_ei = -1.0;
        for (int c = 0; c < options.surrogate_candidates; ++c) {
          const auto hp = draw_candidate(cand_rng, space);
          const bool seen = std::any_of(out.history.begin(), out.history.end(),
                                        [&](const auto& h) { return h.first == hp; });
          if (seen) continue;
          const double ei = gp.expected_improvement(unit_coords(hp, space), best);
          if (ei > best_ei) {
            best_ei = ei;
            next = hp;
          }
        }
      }
    }
    evaluate(next);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] < scores[best]) best = i;
  if (!std::isfinite(scores[best])) throw FitError("no feasible hyperparameter candidate");
  out.best = out.history[best].first;
  out.best_score = scores[best];
  return out;
}

core::QuantileSet rearrange(const core::QuantileGrid& grid, std::vector<double> raw) {
  if (raw.size() != grid.size()) throw SchemaError("raw quantile count does not match grid");
  std::sort(raw.begin(), raw.end());
  for (auto& v : raw) v = std::clamp(v, 0.0, 1.0);
  return core::QuantileSet(grid, std::move(raw));
}

QGbtModel::QGbtModel(core::QuantileGrid grid, std::vector<std::string> feature_names,
                     std::vector<BoostedQuantileModel> models)
    : grid_(std::move(grid)), names_(std::move(feature_names)), models_(std::move(models)) {
  if (models_.size() != grid_.size()) throw SchemaError("one boosted model per quantile level required");
  for (std::size_t i = 0; i < models_.size(); ++i)
    if (std::abs(models_[i].tau - grid_[i]) > 1e-9) throw SchemaError("model levels do not match grid");
}

std::vector<std::size_t> QGbtModel::column_map(const features::FeatureMatrix& x) const {
  if (x.cols() != names_.size()) {
    for (const auto& n : x.names)
      if (std::find(names_.begin(), names_.end(), n) == names_.end())
        throw SchemaError("unknown feature '" + n + "'");
  }
  std::vector<std::size_t> map;
  for (const auto& n : names_) map.push_back(x.column(n));
  return map;
}

std::vector<double> QGbtModel::predict_raw(const features::FeatureMatrix& x) const {
  const auto map = column_map(x);
  bool identity = true;
  for (std::size_t j = 0; j < map.size(); ++j) identity = identity && map[j] == j;
  std::vector<double> row(names_.size());
  std::vector<double> out(x.rows() * models_.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* r = x.row(i);
    if (!identity) {
      for (std::size_t j = 0; j < map.size(); ++j) row[j] = r[map[j]];
      r = row.data();
    }
    for (std::size_t k = 0; k < models_.size(); ++k) out[i * models_.size() + k] = models_[k].predict(r);
  }
  return out;
}

std::vector<core::QuantileSet> QGbtModel::predict(const features::FeatureMatrix& x) const {
  const auto raw = predict_raw(x);
  const std::size_t q = models_.size();
  std::vector<core::QuantileSet> out;
  out.reserve(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    out.push_back(rearrange(grid_, std::vector<double>(raw.begin() + static_cast<std::ptrdiff_t>(i * q),
                                                       raw.begin() + static_cast<std::ptrdiff_t>((i + 1) * q))));
  return out;
}

namespace {

nlohmann::json node_json(const std::vector<RegressionTree::Node>& nodes, int i) {
  const auto& n = nodes[static_cast<std::size_t>(i)];
  if (n.feature < 0) return {{"leaf", n.value}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", node_json(nodes, n.left)},
          {"right", node_json(nodes, n.right)}};
}

int node_from_json(const nlohmann::json& j, std::vector<RegressionTree::Node>& nodes, int depth) {
  if (depth > 64) throw FormatError("tree nesting too deep");
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  if (j.contains("leaf")) {
    nodes[static_cast<std::size_t>(id)].value = j.at("leaf").get<double>();
    return id;
  }
  const int feature = j.at("feature").get<int>();
  const double threshold = j.at("threshold").get<double>();
  const int left = node_from_json(j.at("left"), nodes, depth + 1);
  const int right = node_from_json(j.at("right"), nodes, depth + 1);
  auto& n = nodes[static_cast<std::size_t>(id)];
  n.feature = feature;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
  return id;
}

nlohmann::json hp_json(const GbtHyperparams& hp) {
  return {{"max_depth", hp.max_depth},         {"min_samples_split", hp.min_samples_split},
          {"min_samples_leaf", hp.min_samples_leaf}, {"n_estimators", hp.n_estimators},
          {"learning_rate", hp.learning_rate}, {"subsample", hp.subsample},
          {"max_features", hp.sqrt_features ? "sqrt" : "all"}};
}

GbtHyperparams hp_from_json(const nlohmann::json& j) {
  GbtHyperparams hp;
  hp.max_depth = j.at("max_depth").get<int>();
  hp.min_samples_split = j.at("min_samples_split").get<int>();
  hp.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  hp.n_estimators = j.at("n_estimators").get<int>();
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.subsample = j.at("subsample").get<double>();
  hp.sqrt_features = j.at("max_features").get<std::string>() == "sqrt";
  return hp;
}

}  // namespace

nlohmann::json QGbtModel::to_json() const {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : models_) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : m.trees) trees.push_back(node_json(t.nodes(), 0));
    models.push_back({{"tau", m.tau}, {"f0", m.f0}, {"hyperparams", hp_json(m.hyperparams)}, {"trees", trees}});
  }
  return {{"format", "windcast-qgbt"},
          {"version", kFormatVersion},
          {"levels", std::vector<double>(grid_.levels().begin(), grid_.levels().end())},
          {"features", names_},
          {"models", models}};
}

QGbtModel QGbtModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "windcast-qgbt") throw FormatError("not a quantile GBT model");
    if (j.at("version").get<int>() != kFormatVersion) throw FormatError("unsupported model version");
    core::QuantileGrid grid(j.at("levels").get<std::vector<double>>());
    std::vector<BoostedQuantileModel> models;
    for (const auto& jm : j.at("models")) {
      BoostedQuantileModel m;
      m.tau = jm.at("tau").get<double>();
      m.f0 = jm.at("f0").get<double>();
      m.hyperparams = hp_from_json(jm.at("hyperparams"));
      for (const auto& jt : jm.at("trees")) {
        RegressionTree t;
        node_from_json(jt, t.nodes(), 0);
        m.trees.push_back(std::move(t));
      }
      models.push_back(std::move(m));
    }
    return QGbtModel(std::move(grid), j.at("features").get<std::vector<std::string>>(), std::move(models));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model JSON: ") + e.what());
  }
}

void QGbtModel::save(const std::filesystem::path& path) const { dataio::atomic_write(path, to_json().dump()); }

QGbtModel QGbtModel::load(const std::filesystem::path& path) {
  const auto text = dataio::read_text(path);
  try {
    return from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

QGbtModel fit_qgbt(const features::FeatureMatrix& x, std::span<const double> y, const core::QuantileGrid& grid,
                   const QGbtFitOptions& options, std::uint64_t seed) {
  std::vector<BoostedQuantileModel> models;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const std::uint64_t level_seed = core::derive_seed(seed, {kLevel, k});
    GbtHyperparams hp = options.hyperparams;
    if (options.tune) {
      hp = tune_hyperparams(view_of(x), y, grid[k], options.tuning, level_seed).best;
      hp.learning_rate = options.hyperparams.learning_rate;
      hp.subsample = options.hyperparams.subsample;
      hp.sqrt_features = options.hyperparams.sqrt_features;
    }
    models.push_back(fit_quantile_gbt(x, y, grid[k], hp, level_seed));
  }
  return QGbtModel(grid, x.names, std::move(models));
}

}  // namespace windcast::qgbt
