#include "windcast/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace windcast::features {

using dataio::DeterministicForecast;
using dataio::EnsembleForecast;
using dataio::GridPoint;
using dataio::NwpGrid;

namespace {

// Mean and population stddev, shifted by the first value so constant inputs give exact results.
std::pair<double, double> mean_std(std::span<const double> x) {
  const double s0 = x.front();
  double ds = 0.0, dsq = 0.0;
  for (double v : x) {
    ds += v - s0;
    dsq += (v - s0) * (v - s0);
  }
  const double n = static_cast<double>(x.size());
  return {s0 + ds / n, std::sqrt(std::max(0.0, (dsq - ds * ds / n) / n))};
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::vector<std::string> column_names) : names(std::move(column_names)) {}

std::size_t FeatureMatrix::column(std::string_view name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw SchemaError("unknown feature '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names.begin());
}

void FeatureMatrix::append(core::Timestamp t, std::span<const double> row_values) {
  if (row_values.size() != cols()) throw SchemaError("feature row width mismatch");
  times.push_back(t);
  values.insert(values.end(), row_values.begin(), row_values.end());
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> row_ids) const {
  FeatureMatrix out(names);
  out.times.reserve(row_ids.size());
  out.values.reserve(row_ids.size() * cols());
  for (std::size_t i : row_ids) out.append(times.at(i), {row(i), cols()});
  return out;
}

void FeatureMatrix::validate() const {
  std::set<std::string> seen;
  for (const auto& n : names)
    if (!seen.insert(n).second) throw SchemaError("duplicate feature name '" + n + "'");
  if (values.size() != rows() * cols()) throw SchemaError("feature matrix size mismatch");
  for (double v : values)
    if (!std::isfinite(v)) throw SchemaError("non-finite feature value");
  if (!std::is_sorted(times.begin(), times.end())) throw SchemaError("feature rows not chronological");
}

double wind_direction(double u, double v) {
  if (u == 0.0 && v == 0.0) return 0.0;
  return std::atan2(v, u);
}

std::vector<std::size_t> rank_grid_points(const NwpGrid& grid, const GridPoint& site) {
  std::vector<std::size_t> idx(grid.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> dist(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) dist[i] = dataio::great_circle_km(grid.points[i], site);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return grid.points[a] < grid.points[b];
  });
  return idx;
}

const std::vector<std::string>& w2p_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (std::size_t r = 1; r <= kW2pPoints; ++r)
      for (const char* v : {"u10", "v10", "t2", "w10", "d10", "w10cube"})
        n.push_back("p" + std::to_string(r) + "_" + v);
    return n;
  }();
  return names;
}

void w2p_row(const W2pWeather& weather, std::span<double, kW2pColumns> out) {
  for (std::size_t r = 0; r < kW2pPoints; ++r) {
    const double u = weather[r * 3], v = weather[r * 3 + 1], t = weather[r * 3 + 2];
    const double w = std::hypot(u, v);
    double* o = out.data() + r * 6;
    o[0] = u;
    o[1] = v;
    o[2] = t;
    o[3] = w;
    o[4] = wind_direction(u, v);
    o[5] = w * w * w;
  }
}

FeatureMatrix w2p_features(std::span<const core::Timestamp> times, std::span<const W2pWeather> weather) {
  if (times.size() != weather.size()) throw SchemaError("times and weather rows differ in length");
  FeatureMatrix fm(w2p_feature_names());
  fm.times.assign(times.begin(), times.end());
  fm.values.resize(times.size() * kW2pColumns);
  for (std::size_t i = 0; i < weather.size(); ++i)
    w2p_row(weather[i], std::span<double, kW2pColumns>(fm.values.data() + i * kW2pColumns, kW2pColumns));
  return fm;
}

W2pExtractor::W2pExtractor(const EnsembleForecast& prototype, const GridPoint& site) {
  if (!prototype.grid || prototype.grid->size() < kW2pPoints)
    throw SchemaError("weather-to-power inputs need four grid points");
  const auto ranked = rank_grid_points(*prototype.grid, site);
  for (std::size_t r = 0; r < kW2pPoints; ++r) {
    points_[r] = ranked[r];
    ranked_.push_back(prototype.grid->points[ranked[r]]);
  }
  vars_ = {prototype.var_index("u10"), prototype.var_index("v10"), prototype.var_index("t2")};
}

void W2pExtractor::check(const EnsembleForecast& f) const {
  for (std::size_t r = 0; r < kW2pPoints; ++r)
    if (points_[r] >= f.n_points() || f.grid->points[points_[r]] != ranked_[r])
      throw SchemaError("ensemble grid lacks one of the four nearest points");
}

W2pWeather W2pExtractor::member(const EnsembleForecast& f, std::size_t m) const {
  check(f);
  W2pWeather w{};
  for (std::size_t r = 0; r < kW2pPoints; ++r)
    for (std::size_t v = 0; v < kW2pDirect; ++v) w[r * 3 + v] = f.at(m, points_[r], vars_[v]);
  return w;
}

W2pWeather W2pExtractor::median(const EnsembleForecast& f) const {
  check(f);
  W2pWeather w{};
  std::vector<double> buf(f.members);
  for (std::size_t r = 0; r < kW2pPoints; ++r)
    for (std::size_t v = 0; v < kW2pDirect; ++v) {
      for (std::size_t m = 0; m < f.members; ++m) buf[m] = f.at(m, points_[r], vars_[v]);
      std::sort(buf.begin(), buf.end());
      const std::size_t n = buf.size();
      w[r * 3 + v] = n % 2 ? buf[n / 2] : 0.5 * (buf[n / 2 - 1] + buf[n / 2]);
    }
  return w;
}

TrainingInputs ensemble_training_inputs(std::span<const EnsembleForecast> forecasts, const GridPoint& site) {
  TrainingInputs out;
  out.features = FeatureMatrix(w2p_feature_names());
  if (forecasts.empty()) return out;
  const W2pExtractor ex(forecasts.front(), site);

  // valid time -> (priority, forecast); analysis wins over +6h.
  std::map<core::Timestamp, std::pair<int, const EnsembleForecast*>> chosen;
  std::set<core::Timestamp> expected;
  for (const auto& f : forecasts) {
    const int h = f.index.horizon_hours;
    if (h != 0 && h != 6) continue;
    expected.insert(f.index.base_time);
    expected.insert(f.index.base_time + core::Hours{6});
    const int priority = h == 0 ? 0 : 1;
    auto [it, inserted] = chosen.try_emplace(f.index.valid_time(), priority, &f);
    if (!inserted && priority < it->second.first) it->second = {priority, &f};
  }
  for (const auto& t : expected)
    if (!chosen.count(t)) ++out.gaps;

  std::vector<core::Timestamp> times;
  std::vector<W2pWeather> weather;
  for (const auto& [t, pick] : chosen) {
    times.push_back(t);
    weather.push_back(ex.median(*pick.second));
  }
  out.features = w2p_features(times, weather);
  return out;
}

HresRecipe HresRecipe::full() { return {}; }

HresRecipe HresRecipe::constrained() {
  HresRecipe r;
  r.levels = {"10"};
  r.step_hours = 6;
  r.max_lag_hours = 6;
  r.center_temperature = true;
  return r;
}

void HresRecipe::validate() const {
  if (levels.empty()) throw ConfigError("feature recipe needs at least one level");
  if (step_hours <= 0 || max_lag_hours < 0 || max_lag_hours % step_hours)
    throw ConfigError("feature recipe lag set must be multiples of the step");
}

std::vector<std::string> hres_feature_names(const HresRecipe& recipe) {
  recipe.validate();
  std::vector<std::string> n;
  for (const auto& lvl : recipe.levels) {
    const std::string w = "w" + lvl;
    n.push_back(w + "_center");
    n.push_back("d" + lvl + "_center");
    n.push_back(w + "cube_center");
    for (const char* s : {"_mean", "_std", "_min", "_max"}) n.push_back(w + s);
    for (int l = recipe.max_lag_hours; l >= recipe.step_hours; l -= recipe.step_hours)
      n.push_back(w + "_lag" + std::to_string(l));
    for (int l = recipe.step_hours; l <= recipe.max_lag_hours; l += recipe.step_hours)
      n.push_back(w + "_lead" + std::to_string(l));
    n.push_back(w + "_rollstd");
  }
  if (recipe.center_temperature) n.push_back("t2_center");
  return n;
}

HresFeatureSet hres_features(std::span<const DeterministicForecast> run, const GridPoint& site,
                             const HresRecipe& recipe, std::span<const int> horizons) {
  HresFeatureSet out;
  out.features = FeatureMatrix(hres_feature_names(recipe));
  if (run.empty()) {
    out.dropped = horizons.size();
    return out;
  }
  const auto& grid = *run.front().grid;
  const std::size_t P = grid.size();
  const std::size_t center = rank_grid_points(grid, site).front();

  std::map<int, const DeterministicForecast*> by_h;
  for (const auto& f : run) {
    if (f.index.base_time != run.front().index.base_time) throw SchemaError("deterministic run mixes base times");
    if (f.grid->points != grid.points) throw SchemaError("deterministic run mixes grids");
    by_h[f.index.horizon_hours] = &f;
  }

  struct Level {
    std::size_t u, v;
  };
  std::vector<Level> levels;
  for (const auto& lvl : recipe.levels)
    levels.push_back({run.front().var_index("u" + lvl), run.front().var_index("v" + lvl)});
  const std::size_t t2 = recipe.center_temperature ? run.front().var_index("t2") : 0;

  // Domain-mean speed per (horizon, level), cached.
  std::map<std::pair<int, std::size_t>, double> mean_cache;
  auto domain_mean = [&](const DeterministicForecast& f, std::size_t li) {
    const auto key = std::make_pair(f.index.horizon_hours, li);
    if (auto it = mean_cache.find(key); it != mean_cache.end()) return it->second;
    std::vector<double> speeds(P);
    for (std::size_t p = 0; p < P; ++p) speeds[p] = std::hypot(f.at(p, levels[li].u), f.at(p, levels[li].v));
    return mean_cache[key] = mean_std(speeds).first;
  };

  std::vector<double> row;
  for (int h : horizons) {
    bool ok = by_h.count(h) > 0;
    for (int l = recipe.step_hours; ok && l <= recipe.max_lag_hours; l += recipe.step_hours)
      ok = by_h.count(h - l) && by_h.count(h + l);
    if (!ok) {
      ++out.dropped;
      continue;
    }
    const auto& f = *by_h.at(h);
    row.clear();
    for (std::size_t li = 0; li < levels.size(); ++li) {
      const double u = f.at(center, levels[li].u), v = f.at(center, levels[li].v);
      const double w = std::hypot(u, v);
      row.push_back(w);
      row.push_back(wind_direction(u, v));
      row.push_back(w * w * w);

      std::vector<double> speeds(P);
      for (std::size_t p = 0; p < P; ++p) speeds[p] = std::hypot(f.at(p, levels[li].u), f.at(p, levels[li].v));
      const auto [mean, sd] = mean_std(speeds);
      row.push_back(mean);
      row.push_back(sd);
      row.push_back(*std::min_element(speeds.begin(), speeds.end()));
      row.push_back(*std::max_element(speeds.begin(), speeds.end()));

      std::vector<double> window{domain_mean(f, li)};
      for (int l = recipe.max_lag_hours; l >= recipe.step_hours; l -= recipe.step_hours) {
        row.push_back(domain_mean(*by_h.at(h - l), li));
        window.push_back(row.back());
      }
      for (int l = recipe.step_hours; l <= recipe.max_lag_hours; l += recipe.step_hours) {
        row.push_back(domain_mean(*by_h.at(h + l), li));
        window.push_back(row.back());
      }
      row.push_back(mean_std(window).second);
    }
    if (recipe.center_temperature) row.push_back(f.at(center, t2));
    out.features.append(f.index.valid_time(), row);
    out.horizons.push_back(h);
  }
  return out;
}

}  // namespace windcast::features
