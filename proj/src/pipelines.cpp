#include "windcast/pipelines.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "windcast/eval.hpp"

namespace windcast::pipelines {

namespace {

constexpr std::uint64_t kTagW2p = 0x7732;
constexpr std::uint64_t kTagHres = 0x4852;
constexpr std::uint64_t kTagHresc = 0x4843;
constexpr std::uint64_t kTagCombination = 0x434d;
constexpr int kFormatVersion = 1;

const std::vector<MethodSpec> kMethods = {
    {Method::EnsGbtNone, "ENS-GBT-None", NwpSource::Ensemble, W2pGrid::Median, Combiner::None, true, false},
    {Method::EnsQgbtNone, "ENS-QGBT-None", NwpSource::Ensemble, W2pGrid::Configured, Combiner::None, true, false},
    {Method::HresQgbtNone, "HRES-QGBT-None", NwpSource::Deterministic, W2pGrid::Configured, Combiner::None, true,
     true},
    {Method::HrescQgbtNone, "HRESc-QGBT-None", NwpSource::DeterministicConstrained, W2pGrid::Configured,
     Combiner::None, true, true},
    {Method::EnsGbtEmos, "ENS-GBT-EMOS", NwpSource::Ensemble, W2pGrid::Median, Combiner::Emos, false, false},
    {Method::EnsQgbtBmm, "ENS-QGBT-BMM", NwpSource::Ensemble, W2pGrid::Iqr, Combiner::BetaPool, false, false},
};

bool has(std::span<const Method> ms, Method m) { return std::find(ms.begin(), ms.end(), m) != ms.end(); }

std::string level_file(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%.4f.json", tau);
  return buf;
}

std::string horizon_file(int h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "h%03d.json", h);
  return buf;
}

nlohmann::json tail_json(const std::optional<dists::GpdTail>& t) {
  if (!t) return nullptr;
  return {{"psi", t->psi}, {"xi", t->xi}, {"eta", t->eta}, {"threshold_quantile", t->threshold_quantile}};
}

std::optional<dists::GpdTail> tail_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  dists::GpdTail t;
  t.psi = j.at("psi").get<double>();
  t.xi = j.at("xi").get<double>();
  t.eta = j.at("eta").get<double>();
  t.threshold_quantile = j.at("threshold_quantile").get<double>();
  return t;
}

nlohmann::json read_json(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw MissingArtifactError("missing artifact " + p.string());
  try {
    return nlohmann::json::parse(dataio::read_text(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::filesystem::create_directories(p.parent_path());
  dataio::atomic_write(p, j.dump(1));
}

/// Splits a multi-level model into one single-level model per level.
std::vector<qgbt::QGbtModel> split_levels(const qgbt::QGbtModel& m) {
  std::vector<qgbt::QGbtModel> out;
  for (std::size_t k = 0; k < m.grid().size(); ++k)
    out.emplace_back(core::QuantileGrid({m.grid()[k]}), m.feature_names(),
                     std::vector<qgbt::BoostedQuantileModel>{m.models()[k]});
  return out;
}

qgbt::QGbtModel merge_levels(const std::vector<qgbt::QGbtModel>& parts) {
  if (parts.empty()) throw FormatError("no weather-to-power levels");
  std::vector<double> levels;
  std::vector<qgbt::BoostedQuantileModel> models;
  for (const auto& p : parts) {
    if (p.feature_names() != parts.front().feature_names()) throw SchemaError("level models disagree on features");
    for (std::size_t k = 0; k < p.grid().size(); ++k) {
      levels.push_back(p.grid()[k]);
      models.push_back(p.models()[k]);
    }
  }
  return qgbt::QGbtModel(core::QuantileGrid(levels), parts.front().feature_names(), std::move(models));
}

struct TailSamples {
  std::vector<double> lower, upper;
  double tau_lo = 0.05, tau_hi = 0.95;
};

void add_tail_sample(TailSamples& s, double q_lo, double q_hi, double y) {
  if (y < q_lo) s.lower.push_back(q_lo - y);
  if (y > q_hi) s.upper.push_back(y - q_hi);
}

/// Deterministic runs grouped by base time (contiguous, sorted by horizon).
class RunIndex {
 public:
  explicit RunIndex(std::span<const dataio::DeterministicForecast> all) {
    bool sorted = std::is_sorted(all.begin(), all.end(),
                                 [](const auto& a, const auto& b) { return a.index < b.index; });
    std::span<const dataio::DeterministicForecast> src = all;
    if (!sorted) {
      owned_.assign(all.begin(), all.end());
      std::sort(owned_.begin(), owned_.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
      src = owned_;
    }
    std::size_t i = 0;
    while (i < src.size()) {
      std::size_t j = i;
      while (j < src.size() && src[j].index.base_time == src[i].index.base_time) ++j;
      runs_.emplace(src[i].index.base_time, src.subspan(i, j - i));
      i = j;
    }
  }
  std::optional<std::span<const dataio::DeterministicForecast>> find(core::Timestamp base) const {
    const auto it = runs_.find(base);
    if (it == runs_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<dataio::DeterministicForecast> owned_;
  std::map<core::Timestamp, std::span<const dataio::DeterministicForecast>> runs_;
};

std::map<core::ForecastIndex, const dataio::EnsembleForecast*> index_ensemble(
    std::span<const dataio::EnsembleForecast> all) {
  std::map<core::ForecastIndex, const dataio::EnsembleForecast*> out;
  for (const auto& f : all) out.emplace(f.index, &f);
  return out;
}

std::vector<double> column_values(std::span<const core::QuantileSet> qs, double tau) {
  std::vector<double> v;
  v.reserve(qs.size());
  for (const auto& q : qs) v.push_back(q.at(tau));
  return v;
}

features::HresRecipe recipe_for(Method m) {
  return m == Method::HresQgbtNone ? features::HresRecipe::full() : features::HresRecipe::constrained();
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t MethodSpec::gbt_count(std::size_t n_levels, std::size_t n_horizons) const {
  std::size_t levels = 0;
  switch (w2p_grid) {
    case W2pGrid::Median: levels = 1; break;
    case W2pGrid::Iqr: levels = 3; break;
    case W2pGrid::Configured: levels = n_levels; break;
  }
  return per_horizon_w2p ? levels * n_horizons : levels;
}

const std::vector<MethodSpec>& method_table() { return kMethods; }

const MethodSpec& method_spec(Method m) {
  for (const auto& s : kMethods)
    if (s.method == m) return s;
  throw ContractViolation("unknown method");
}

const MethodSpec& method_spec(std::string_view name) {
  for (const auto& s : kMethods)
    if (s.name == name) return s;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view method_name(Method m) { return method_spec(m).name; }

std::vector<Method> all_methods() {
  std::vector<Method> out;
  for (const auto& s : kMethods) out.push_back(s.method);
  return out;
}

// ---------------------------------------------------------------------------

Observations::Observations(std::span<const core::PowerRecord> records) {
  for (const auto& r : records) {
    if (r.curtailed()) {
      curtailed_[r.timestamp] = true;
      values_.erase(r.timestamp);
    } else if (!curtailed_.count(r.timestamp)) {
      values_[r.timestamp] = core::normalize_power(r);
    }
  }
}

Observations::Status Observations::status(core::Timestamp t) const {
  if (curtailed_.count(t)) return Status::Curtailed;
  return values_.count(t) ? Status::Available : Status::Missing;
}

std::optional<double> Observations::value(core::Timestamp t) const {
  const auto it = values_.find(t);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

features::FeatureMatrix member_features(const dataio::EnsembleForecast& f, const features::W2pExtractor& ex) {
  std::vector<core::Timestamp> times(f.members, f.index.valid_time());
  std::vector<features::W2pWeather> weather;
  weather.reserve(f.members);
  for (std::size_t m = 0; m < f.members; ++m) weather.push_back(ex.member(f, m));
  return features::w2p_features(times, weather);
}

std::vector<core::QuantileSet> member_quantiles(const qgbt::QGbtModel& model, const features::FeatureMatrix& members) {
  return model.predict(members);
}

std::vector<double> member_medians(const qgbt::QGbtModel& median_model, const features::FeatureMatrix& members) {
  if (!median_model.grid().contains(0.5)) throw PipelineError("single-value model lacks the 50% level");
  return column_values(median_model.predict(members), 0.5);
}

core::QuantileSet average_quantiles(std::span<const core::QuantileSet> members) {
  if (members.empty()) throw PipelineError("no members to average");
  const auto& grid = members.front().grid();
  std::vector<double> acc(grid.size(), 0.0);
  for (const auto& q : members) {
    if (!(q.grid() == grid)) throw PipelineError("members use different quantile grids");
    for (std::size_t k = 0; k < grid.size(); ++k) acc[k] += q.values()[k];
  }
  for (auto& v : acc) v /= static_cast<double>(members.size());
  return qgbt::rearrange(grid, std::move(acc));
}

std::pair<std::vector<double>, std::vector<double>> plotting_position_knots(std::span<const double> values) {
  const std::size_t m = values.size();
  if (m < 2) throw PipelineError("member-as-quantile mapping needs at least two members");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  std::vector<double> levels(m);
  for (std::size_t i = 0; i < m; ++i) levels[i] = static_cast<double>(i + 1) / static_cast<double>(m + 1);
  return {std::move(levels), std::move(v)};
}

dists::BoundedCdf run_ens_qgbt_bmm(std::span<const core::QuantileSet> members, const combine::HorizonCoefficients& c) {
  return combine::pool_cdf(combine::dress_kernels(members, c.lambda0, c.lambda1), c.a, c.b);
}

dists::BoundedCdf run_ens_gbt_none(std::span<const double> member_medians, const TailPair& tails) {
  const auto [levels, values] = plotting_position_knots(member_medians);
  return dists::quantiles_to_cdf(levels, values, tails.lower, tails.upper);
}

dists::BoundedCdf run_ens_qgbt_none(std::span<const core::QuantileSet> members, const TailPair& tails) {
  return dists::quantiles_to_cdf(average_quantiles(members), tails.lower, tails.upper);
}

dists::BoundedCdf run_hres_qgbt(const core::QuantileSet& quantiles, const TailPair& tails) {
  return dists::quantiles_to_cdf(quantiles, tails.lower, tails.upper);
}

dists::BoundedCdf run_ens_gbt_emos(std::span<const double> member_medians, const combine::EmosHorizonCoefficients& c,
                                   std::string* warning) {
  return combine::emos_predict(c, member_medians, warning);
}

// ---------------------------------------------------------------------------

PipelineConfig PipelineConfig::standard() {
  PipelineConfig c;
  c.ens_w2p.tuning.space = qgbt::SearchSpace::standard();
  c.ens_w2p.hyperparams = c.ens_w2p.tuning.space.defaults();
  c.hres_w2p.tuning.space = qgbt::SearchSpace::deterministic();
  c.hres_w2p.hyperparams = c.hres_w2p.tuning.space.defaults();
  return c;
}

void PipelineConfig::validate() const {
  case_study.validate();
  ens_w2p.hyperparams.validate();
  hres_w2p.hyperparams.validate();
  if (horizons.first() <= 0) throw ConfigError("forecast horizons must be positive");
  if (combination.n_starts < 1) throw ConfigError("combination fit needs at least one start");
}

FarmData farm_data(std::uint64_t farm_id, dataio::SyntheticFarmData synthetic) {
  FarmData d;
  d.farm_id = farm_id;
  d.site = std::move(synthetic.site);
  d.power = std::move(synthetic.power);
  d.ensemble = std::move(synthetic.ensemble);
  d.deterministic = std::move(synthetic.deterministic);
  return d;
}

core::EstimationTestSplit<core::Timestamp> split_base_times(const FarmData& d, const core::CaseStudy& cs) {
  std::set<core::Timestamp> bases;
  for (const auto& f : d.ensemble) bases.insert(f.index.base_time);
  for (const auto& f : d.deterministic) bases.insert(f.index.base_time);
  return core::split_by_case_study(std::vector<core::Timestamp>(bases.begin(), bases.end()), cs,
                                   [](core::Timestamp t) { return t; });
}

std::vector<core::Timestamp> test_base_times(const FarmData& d, const core::CaseStudy& cs) {
  return split_base_times(d, cs).test;
}

// ---------------------------------------------------------------------------

const TailPair& TailTable::at(int horizon) const {
  const auto it = by_horizon.find(horizon);
  if (it == by_horizon.end()) throw PipelineError("tail fits missing for horizon " + std::to_string(horizon));
  return it->second;
}

nlohmann::json TailTable::to_json() const {
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& [h, t] : by_horizon) rows[std::to_string(h)] = {{"lower", tail_json(t.lower)}, {"upper", tail_json(t.upper)}};
  return {{"format", "windcast-tails"}, {"version", kFormatVersion}, {"horizons", rows}};
}

TailTable TailTable::from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "windcast-tails" || j.value("version", 0) != kFormatVersion)
    throw FormatError("not a tail table");
  TailTable t;
  try {
    for (const auto& [k, v] : j.at("horizons").items())
      t.by_horizon[std::stoi(k)] = {tail_from_json(v.at("lower")), tail_from_json(v.at("upper"))};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("tail table: ") + e.what());
  }
  return t;
}

nlohmann::json FitReport::to_json() const {
  return {{"gbt_counts", gbt_counts},
          {"warnings", warnings},
          {"fallback", fallback},
          {"training_rows_w2p", training_rows_w2p},
          {"combination_pairs", combination_pairs}};
}

FitReport FitReport::from_json(const nlohmann::json& j) {
  FitReport r;
  try {
    r.gbt_counts = j.at("gbt_counts").get<std::map<std::string, std::size_t>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.fallback = j.at("fallback").get<bool>();
    r.training_rows_w2p = j.value("training_rows_w2p", std::size_t{0});
    r.combination_pairs = j.value("combination_pairs", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fit report: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------

void FarmModels::save(const std::filesystem::path& dir) const {
  nlohmann::json manifest = {{"format", "windcast-models"}, {"version", kFormatVersion}};
  std::vector<std::string> names;
  for (auto m : methods) names.emplace_back(method_name(m));
  manifest["methods"] = names;

  const auto save_levels = [&](const std::optional<qgbt::QGbtModel>& model, const std::string& sub) {
    if (!model) return;
    std::vector<std::string> files;
    for (const auto& part : split_levels(*model)) {
      const auto rel = sub + "/" + level_file(part.grid()[0]);
      write_json(dir / rel, part.to_json());
      files.push_back(rel);
    }
    manifest[sub] = files;
  };
  save_levels(w2p_median, "w2p_median");
  save_levels(w2p_full, "w2p_full");
  save_levels(w2p_iqr, "w2p_iqr");

  const auto save_horizons = [&](const std::map<int, qgbt::QGbtModel>& models, const std::string& sub) {
    if (models.empty()) return;
    nlohmann::json files = nlohmann::json::object();
    for (const auto& [h, m] : models) {
      const auto rel = sub + "/" + horizon_file(h);
      write_json(dir / rel, m.to_json());
      files[std::to_string(h)] = rel;
    }
    manifest[sub] = files;
  };
  save_horizons(hres, "hres");
  save_horizons(hresc, "hresc");

  if (bmm) {
    write_json(dir / "combination.json", bmm->to_json());
    manifest["combination"] = "combination.json";
  }
  if (emos) {
    write_json(dir / "emos.json", emos->to_json());
    manifest["emos"] = "emos.json";
  }
  nlohmann::json tail_files = nlohmann::json::object();
  for (const auto& [m, t] : tails) {
    const auto rel = "tails_" + std::string(method_name(m)) + ".json";
    write_json(dir / rel, t.to_json());
    tail_files[std::string(method_name(m))] = rel;
  }
  manifest["tails"] = tail_files;
  write_json(dir / "fit_report.json", report.to_json());
  write_json(dir / "models.json", manifest);
}

FarmModels FarmModels::load(const std::filesystem::path& dir, std::span<const Method> methods) {
  const auto manifest = read_json(dir / "models.json");
  FarmModels out;
  out.methods.assign(methods.begin(), methods.end());
  out.report = FitReport::from_json(read_json(dir / "fit_report.json"));
  const auto need = [&](const char* key) {
    if (!manifest.contains(key)) throw MissingArtifactError(std::string("fitted models lack ") + key + " in " + dir.string());
    return manifest.at(key);
  };
  const auto load_levels = [&](const char* key) {
    std::vector<qgbt::QGbtModel> parts;
    for (const auto& rel : need(key)) parts.push_back(qgbt::QGbtModel::from_json(read_json(dir / rel.get<std::string>())));
    return merge_levels(parts);
  };
  const auto load_horizons = [&](const char* key) {
    std::map<int, qgbt::QGbtModel> models;
    const auto files = need(key);
    for (const auto& [h, rel] : files.items())
      models.emplace(std::stoi(h), qgbt::QGbtModel::from_json(read_json(dir / rel.get<std::string>())));
    return models;
  };
  if (has(methods, Method::EnsGbtNone) || has(methods, Method::EnsGbtEmos)) out.w2p_median = load_levels("w2p_median");
  if (has(methods, Method::EnsQgbtNone)) out.w2p_full = load_levels("w2p_full");
  if (has(methods, Method::EnsQgbtBmm)) {
    out.w2p_iqr = load_levels("w2p_iqr");
    out.bmm = combine::CombinationCoefficients::from_json(read_json(dir / need("combination").get<std::string>()));
  }
  if (has(methods, Method::EnsGbtEmos))
    out.emos = combine::EmosCoefficients::from_json(read_json(dir / need("emos").get<std::string>()));
  if (has(methods, Method::HresQgbtNone)) out.hres = load_horizons("hres");
  if (has(methods, Method::HrescQgbtNone)) out.hresc = load_horizons("hresc");
  for (auto m : methods) {
    if (!method_spec(m).gpd_tails) continue;
    const auto tails = need("tails");
    const std::string name(method_name(m));
    if (!tails.contains(name)) throw MissingArtifactError("tail fits for " + name + " missing in " + dir.string());
    out.tails[m] = TailTable::from_json(read_json(dir / tails.at(name).get<std::string>()));
  }
  return out;
}

// ---------------------------------------------------------------------------

FarmModels fit_farm(const FarmData& d, const PipelineConfig& cfg, std::span<const Method> methods) {
  cfg.validate();
  if (methods.empty()) throw ConfigError("no methods to fit");
  FarmModels out;
  out.methods.assign(methods.begin(), methods.end());
  auto& report = out.report;

  const Observations obs(d.power);
  const auto split = split_base_times(d, cfg.case_study);
  if (split.half_a.empty() || split.half_b.empty())
    throw PipelineError("farm " + d.site.name + " has no estimation-period forecasts");
  const auto& hours = cfg.horizons.hours();
  const auto ens = index_ensemble(d.ensemble);
  const auto find_ens = [&](core::Timestamp base, int h) -> const dataio::EnsembleForecast* {
    const auto it = ens.find({base, h});
    return it == ens.end() ? nullptr : it->second;
  };

  const bool need_median = has(methods, Method::EnsGbtNone) || has(methods, Method::EnsGbtEmos);
  const bool need_full = has(methods, Method::EnsQgbtNone);
  const bool need_iqr = has(methods, Method::EnsQgbtBmm);
  const bool any_ens = need_median || need_full || need_iqr;

  // Shared weather-to-power models on half-A analysis rows.
  std::optional<features::W2pExtractor> ex;
  std::size_t n_members = 0;
  if (any_ens) {
    if (d.ensemble.empty()) throw PipelineError("ensemble forecasts missing for " + d.site.name);
    ex.emplace(d.ensemble.front(), d.site.location);
    n_members = d.ensemble.front().members;
    std::vector<dataio::EnsembleForecast> early;
    for (const auto base : split.half_a)
      for (int h : {0, 6})
        if (const auto* f = find_ens(base, h)) early.push_back(*f);
    const auto ti = features::ensemble_training_inputs(early, d.site.location);
    std::vector<std::size_t> keep;
    std::vector<double> y;
    for (std::size_t i = 0; i < ti.features.rows(); ++i)
      if (const auto v = obs.value(ti.features.times[i])) {
        keep.push_back(i);
        y.push_back(*v);
      }
    const auto x = ti.features.select(keep);
    report.training_rows_w2p = x.rows();
    if (ti.gaps) report.warnings.push_back(std::to_string(ti.gaps) + " analysis valid times without a field");
    const auto fit = [&](const core::QuantileGrid& grid, std::uint64_t tag) {
      return qgbt::fit_qgbt(x, y, grid, cfg.ens_w2p, core::derive_seed(cfg.seed, {kTagW2p, d.farm_id, tag}));
    };
    if (need_median) out.w2p_median = fit(core::QuantileGrid::median(), 0);
    if (need_full) out.w2p_full = fit(cfg.quantiles, 1);
    if (need_iqr) out.w2p_iqr = fit(core::QuantileGrid::iqr(), 2);
  }

  // Per-horizon deterministic models on half A.
  const RunIndex runs(d.deterministic);
  for (const Method m : {Method::HresQgbtNone, Method::HrescQgbtNone}) {
    if (!has(methods, m)) continue;
    const auto recipe = recipe_for(m);
    const auto names = features::hres_feature_names(recipe);
    std::map<int, features::FeatureMatrix> xs;
    std::map<int, std::vector<double>> ys;
    for (const auto base : split.half_a) {
      const auto run = runs.find(base);
      if (!run) continue;
      const auto fs = features::hres_features(*run, d.site.location, recipe, hours);
      for (std::size_t i = 0; i < fs.features.rows(); ++i) {
        const int h = fs.horizons[i];
        const auto v = obs.value(base + core::Hours{h});
        if (!v) continue;
        auto [it, inserted] = xs.try_emplace(h, names);
        it->second.append(fs.features.times[i], std::span(fs.features.row(i), fs.features.cols()));
        ys[h].push_back(*v);
      }
    }
    auto& target = m == Method::HresQgbtNone ? out.hres : out.hresc;
    const std::uint64_t tag = m == Method::HresQgbtNone ? kTagHres : kTagHresc;
    for (int h : hours) {
      const auto it = xs.find(h);
      if (it == xs.end())
        throw PipelineError(std::string(method_name(m)) + ": no training rows at horizon " + std::to_string(h));
      target.emplace(h, qgbt::fit_qgbt(it->second, ys[h], cfg.quantiles, cfg.hres_w2p,
                                       core::derive_seed(cfg.seed, {tag, d.farm_id, static_cast<std::uint64_t>(h)})));
    }
  }

  // Half B: combination / calibration coefficients and tail samples.
  std::map<int, combine::CombinationTrainingSet> comb;
  std::map<int, combine::EmosTrainingSet> emos;
  std::map<Method, std::map<int, TailSamples>> tails;
  for (int h : hours) {
    if (need_iqr) comb.emplace(h, combine::CombinationTrainingSet(n_members));
    if (has(methods, Method::EnsGbtEmos)) emos.emplace(h, combine::EmosTrainingSet{});
    for (auto m : methods)
      if (method_spec(m).gpd_tails) {
        auto& s = tails[m][h];
        if (m == Method::EnsGbtNone) {
          s.tau_lo = 1.0 / static_cast<double>(n_members + 1);
          s.tau_hi = static_cast<double>(n_members) / static_cast<double>(n_members + 1);
        } else {
          s.tau_lo = cfg.quantiles[0];
          s.tau_hi = cfg.quantiles[cfg.quantiles.size() - 1];
        }
      }
  }
  if (any_ens) {
    for (const auto base : split.half_b) {
      for (int h : hours) {
        const auto* f = find_ens(base, h);
        if (!f) continue;
        const auto y = obs.value(f->index.valid_time());
        if (!y) continue;
        const auto mf = member_features(*f, *ex);
        if (need_median) {
          const auto med = member_medians(*out.w2p_median, mf);
          if (has(methods, Method::EnsGbtEmos)) emos[h].add(med, *y);
          if (has(methods, Method::EnsGbtNone)) {
            const auto [lo, hi] = std::minmax_element(med.begin(), med.end());
            add_tail_sample(tails[Method::EnsGbtNone][h], *lo, *hi, *y);
          }
        }
        if (need_full) {
          const auto qs = member_quantiles(*out.w2p_full, mf);
          const auto avg = average_quantiles(qs);
          add_tail_sample(tails[Method::EnsQgbtNone][h], avg.values().front(), avg.values().back(), *y);
        }
        if (need_iqr) comb[h].add(member_quantiles(*out.w2p_iqr, mf), *y);
      }
    }
  }
  for (const Method m : {Method::HresQgbtNone, Method::HrescQgbtNone}) {
    if (!has(methods, m)) continue;
    const auto recipe = recipe_for(m);
    const auto& models = m == Method::HresQgbtNone ? out.hres : out.hresc;
    for (const auto base : split.half_b) {
      const auto run = runs.find(base);
      if (!run) continue;
      const auto fs = features::hres_features(*run, d.site.location, recipe, hours);
      for (std::size_t i = 0; i < fs.features.rows(); ++i) {
        const int h = fs.horizons[i];
        const auto y = obs.value(base + core::Hours{h});
        if (!y) continue;
        const std::vector<std::size_t> one{i};
        const auto q = models.at(h).predict(fs.features.select(one)).front();
        add_tail_sample(tails[m][h], q.values().front(), q.values().back(), *y);
      }
    }
  }

  // Coefficient fits.
  if (need_iqr) {
    auto opt = cfg.combination;
    opt.seed = core::derive_seed(cfg.seed, {kTagCombination, d.farm_id});
    out.bmm = combine::fit_combination(comb, opt);
    for (const auto& [h, s] : comb) report.combination_pairs += s.size();
    for (const auto& [h, c] : out.bmm->by_horizon) {
      if (!c.warning.empty()) report.warnings.push_back("combination: " + c.warning);
      if (c.failed || c.neighbor_fallback) report.fallback = true;
    }
  }
  if (has(methods, Method::EnsGbtEmos)) {
    out.emos = combine::fit_emos_gamma(emos, cfg.emos);
    for (const auto& [h, c] : out.emos->by_horizon) {
      if (!c.warning.empty()) report.warnings.push_back("EMOS: " + c.warning);
      if (c.failed || c.neighbor_fallback) report.fallback = true;
    }
  }
  for (const auto& [m, per_h] : tails) {
    TailTable table;
    for (const auto& [h, s] : per_h) {
      TailPair pair;
      const auto fit_side = [&](const std::vector<double>& z, double level, const char* side) {
        std::optional<dists::GpdTail> t;
        if (z.empty()) {
          report.warnings.push_back(std::string(method_name(m)) + " h" + std::to_string(h) + ": no " + side +
                                    " exceedances, no tail");
          return t;
        }
        const auto fit = dists::fit_gpd_mle(z, cfg.gpd);
        if (!fit.warning.empty())
          report.warnings.push_back(std::string(method_name(m)) + " h" + std::to_string(h) + " " + side + ": " +
                                    fit.warning);
        t = fit.tail;
        t->threshold_quantile = level;
        return t;
      };
      pair.lower = fit_side(s.lower, s.tau_lo, "lower");
      pair.upper = fit_side(s.upper, s.tau_hi, "upper");
      table.by_horizon[h] = pair;
    }
    out.tails[m] = std::move(table);
  }

  // Model accounting.
  for (auto m : methods) {
    std::size_t n = 0;
    switch (m) {
      case Method::EnsGbtNone:
      case Method::EnsGbtEmos: n = out.w2p_median->models().size(); break;
      case Method::EnsQgbtNone: n = out.w2p_full->models().size(); break;
      case Method::EnsQgbtBmm: n = out.w2p_iqr->models().size(); break;
      case Method::HresQgbtNone:
        for (const auto& [h, model] : out.hres) n += model.models().size();
        break;
      case Method::HrescQgbtNone:
        for (const auto& [h, model] : out.hresc) n += model.models().size();
        break;
    }
    report.gbt_counts[std::string(method_name(m))] = n;
  }
  return out;
}

// ---------------------------------------------------------------------------

FarmForecast forecast_farm(const FarmData& d, const FarmModels& models, const PipelineConfig& cfg,
                           std::span<const core::Timestamp> bases) {
  FarmForecast out;
  const Observations obs(d.power);
  const auto& hours = cfg.horizons.hours();
  const auto& methods = models.methods;
  const auto ens = index_ensemble(d.ensemble);

  const auto emit = [&](Method m, const core::ForecastIndex& idx, const dists::BoundedCdf& cdf) {
    ForecastRow row;
    row.method = m;
    row.index = idx;
    row.quantiles.reserve(cfg.quantiles.size());
    for (double tau : cfg.quantiles.levels()) row.quantiles.push_back(dists::cdf_quantile(cdf, tau));
    row.omega0 = cdf.omega0();
    row.omega1 = cdf.omega1();
    row.status = obs.status(idx.valid_time());
    if (row.status == Observations::Status::Available) {
      row.observation = *obs.value(idx.valid_time());
      row.crps = dists::crps_numeric(cdf, row.observation);
    }
    out.rows.push_back(std::move(row));
  };

  const bool any_ens = models.w2p_median || models.w2p_full || models.w2p_iqr;
  std::size_t missing = 0;
  if (any_ens && !d.ensemble.empty()) {
    const features::W2pExtractor ex(d.ensemble.front(), d.site.location);
    for (const auto base : bases) {
      for (int h : hours) {
        const auto it = ens.find({base, h});
        if (it == ens.end()) {
          ++missing;
          continue;
        }
        const auto& f = *it->second;
        const auto mf = member_features(f, ex);
        std::vector<double> med;
        std::vector<core::QuantileSet> full, iqr;
        if (models.w2p_median) med = member_medians(*models.w2p_median, mf);
        if (models.w2p_full) full = member_quantiles(*models.w2p_full, mf);
        if (models.w2p_iqr) {
          iqr = member_quantiles(*models.w2p_iqr, mf);
          const auto q50 = column_values(iqr, 0.5);
          out.uncertainty.push_back({f.index, f.members >= 2 ? eval::uncertainty_nwp(q50) : 0.0,
                                     eval::uncertainty_w2p(iqr)});
        }
        for (auto m : methods) {
          switch (m) {
            case Method::EnsGbtNone: emit(m, f.index, run_ens_gbt_none(med, models.tails.at(m).at(h))); break;
            case Method::EnsQgbtNone: emit(m, f.index, run_ens_qgbt_none(full, models.tails.at(m).at(h))); break;
            case Method::EnsGbtEmos: {
              std::string warning;
              emit(m, f.index, run_ens_gbt_emos(med, models.emos->at(h), &warning));
              if (!warning.empty()) out.warnings.push_back(warning);
              break;
            }
            case Method::EnsQgbtBmm: emit(m, f.index, run_ens_qgbt_bmm(iqr, models.bmm->at(h))); break;
            default: break;
          }
        }
      }
    }
  }

  const RunIndex runs(d.deterministic);
  for (const Method m : {Method::HresQgbtNone, Method::HrescQgbtNone}) {
    if (!has(methods, m)) continue;
    const auto recipe = recipe_for(m);
    const auto& table = m == Method::HresQgbtNone ? models.hres : models.hresc;
    for (const auto base : bases) {
      const auto run = runs.find(base);
      if (!run) {
        missing += hours.size();
        continue;
      }
      const auto fs = features::hres_features(*run, d.site.location, recipe, hours);
      missing += fs.dropped;
      for (std::size_t i = 0; i < fs.features.rows(); ++i) {
        const int h = fs.horizons[i];
        const auto mt = table.find(h);
        if (mt == table.end()) throw PipelineError(std::string(method_name(m)) + ": no model for horizon " + std::to_string(h));
        const std::vector<std::size_t> one{i};
        const auto q = mt->second.predict(fs.features.select(one)).front();
        emit(m, core::ForecastIndex{base, h}, run_hres_qgbt(q, models.tails.at(m).at(h)));
      }
    }
  }
  if (missing) out.warnings.push_back(std::to_string(missing) + " (base, horizon) forecasts missing NWP input");

  std::sort(out.rows.begin(), out.rows.end(), [](const ForecastRow& a, const ForecastRow& b) {
    return std::tie(a.method, a.index) < std::tie(b.method, b.index);
  });
  return out;
}

}  // namespace windcast::pipelines
