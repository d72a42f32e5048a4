#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "windcast/cli.hpp"
#include "windcast/eval.hpp"

namespace windcast::cli {

namespace fs = std::filesystem;
using pipelines::Method;

namespace {

constexpr const char* kStageFile = "stage.json";

std::string farm_dir(int farm) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "farm_%03d", farm);
  return buf;
}

fs::path data_dir(const RunConfig& c) { return c.root / "data"; }
fs::path model_dir(const RunConfig& c, Method m) { return c.root / "models" / std::string(pipelines::method_name(m)); }
fs::path forecast_dir(const RunConfig& c, Method m) {
  return c.root / "forecasts" / std::string(pipelines::method_name(m));
}
fs::path uncertainty_dir(const RunConfig& c) { return c.root / "forecasts" / "uncertainty"; }
fs::path eval_dir(const RunConfig& c) { return c.root / "eval"; }
fs::path report_dir(const RunConfig& c) { return c.root / "report"; }

void write_stage(const fs::path& dir, const std::string& stage, const RunConfig& c, nlohmann::json extra = {}) {
  nlohmann::json j = {{"stage", stage}, {"config_hash", c.hash()}};
  if (extra.is_object()) j.update(extra);
  fs::create_directories(dir);
  dataio::atomic_write(dir / kStageFile, j.dump(1) + "\n");
}

std::optional<nlohmann::json> read_stage(const fs::path& dir) {
  const auto p = dir / kStageFile;
  if (!fs::exists(p)) return std::nullopt;
  try {
    return nlohmann::json::parse(dataio::read_text(p));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

/// Upstream stage output must exist and come from the same configuration.
nlohmann::json require_stage(const fs::path& dir, const RunConfig& c, const std::string& producer) {
  const auto j = read_stage(dir);
  if (!j) throw MissingArtifactError("missing " + (dir / kStageFile).string() + "; run '" + producer + "' first");
  if (j->value("config_hash", "") != c.hash())
    throw MissingArtifactError((dir / kStageFile).string() + " was produced from a different configuration; rerun '" +
                               producer + "'");
  return *j;
}

std::vector<Method> selected_methods(const RunConfig& c, const StageOptions& opt) {
  if (!opt.method) return c.methods;
  const auto m = pipelines::method_spec(*opt.method).method;
  if (std::find(c.methods.begin(), c.methods.end(), m) == c.methods.end())
    throw ConfigError("method " + *opt.method + " is not listed in the configuration");
  return {m};
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the lowest-index failure.
template <class F>
void parallel_for(std::size_t n, int jobs, F fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(jobs, static_cast<int>(n))));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

const char* status_name(pipelines::Observations::Status s) {
  switch (s) {
    case pipelines::Observations::Status::Available: return "available";
    case pipelines::Observations::Status::Curtailed: return "curtailed";
    case pipelines::Observations::Status::Missing: return "missing";
  }
  return "missing";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("column '" + name + "' missing");
    return static_cast<std::size_t>(it - header.begin());
  }
};

CsvTable read_csv(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifactError("missing " + p.string());
  std::istringstream is(dataio::read_text(p));
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw FormatError(p.string() + " is empty");
  t.header = split_csv(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = split_csv(line);
    if (row.size() != t.header.size())
      throw FormatError(p.string() + ": row has " + std::to_string(row.size()) + " cells, expected " +
                        std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("not a number: '" + s + "'");
  }
}

/// Copy of the fitted models holding only what one method needs.
pipelines::FarmModels restrict_to(const pipelines::FarmModels& all, Method m) {
  pipelines::FarmModels out;
  out.methods = {m};
  switch (m) {
    case Method::EnsGbtNone: out.w2p_median = all.w2p_median; break;
    case Method::EnsGbtEmos:
      out.w2p_median = all.w2p_median;
      out.emos = all.emos;
      break;
    case Method::EnsQgbtNone: out.w2p_full = all.w2p_full; break;
    case Method::EnsQgbtBmm:
      out.w2p_iqr = all.w2p_iqr;
      out.bmm = all.bmm;
      break;
    case Method::HresQgbtNone: out.hres = all.hres; break;
    case Method::HrescQgbtNone: out.hresc = all.hresc; break;
  }
  if (const auto it = all.tails.find(m); it != all.tails.end()) out.tails[m] = it->second;
  out.report = all.report;
  const std::string name(pipelines::method_name(m));
  out.report.gbt_counts = {{name, all.report.gbt_counts.at(name)}};
  return out;
}

std::string forecast_csv(const pipelines::FarmForecast& fc, Method m, const core::QuantileGrid& grid) {
  std::ostringstream os;
  os << "base_time,horizon_h,valid_time,status,observation,crps,omega0,omega1";
  for (double tau : grid.levels()) os << ",q" << dataio::format_double(tau);
  os << '\n';
  for (const auto& r : fc.rows) {
    if (r.method != m) continue;
    const bool ok = r.status == pipelines::Observations::Status::Available;
    os << core::format_utc(r.index.base_time) << ',' << r.index.horizon_hours << ','
       << core::format_utc(r.index.valid_time()) << ',' << status_name(r.status) << ','
       << (ok ? dataio::format_double(r.observation) : "") << ',' << (ok ? dataio::format_double(r.crps) : "") << ','
       << dataio::format_double(r.omega0) << ',' << dataio::format_double(r.omega1);
    for (double q : r.quantiles) os << ',' << dataio::format_double(q);
    os << '\n';
  }
  return os.str();
}

std::string uncertainty_csv(const pipelines::FarmForecast& fc) {
  std::ostringstream os;
  os << "base_time,horizon_h,u_nwp,u_w2p\n";
  auto rows = fc.uncertainty;
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  for (const auto& u : rows)
    os << core::format_utc(u.index.base_time) << ',' << u.index.horizon_hours << ','
       << dataio::format_double(u.u_nwp) << ',' << dataio::format_double(u.u_w2p) << '\n';
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

pipelines::FarmData load_farm(const RunConfig& cfg, int farm) {
  const auto dir = data_dir(cfg) / farm_dir(farm);
  const dataio::SyntheticWorld world(cfg.world);
  pipelines::FarmData d;
  d.farm_id = static_cast<std::uint64_t>(farm);
  d.site = world.farms().at(static_cast<std::size_t>(farm));
  for (const char* f : {"power.csv", "ensemble.csv", "deterministic.csv"})
    if (!fs::exists(dir / f)) throw MissingArtifactError("missing " + (dir / f).string() + "; run 'generate' first");
  d.power = dataio::read_power_csv(dir / "power.csv");
  auto ens = dataio::read_nwp_csv(dir / "ensemble.csv");
  auto det = dataio::read_nwp_csv(dir / "deterministic.csv");
  if (!std::holds_alternative<std::vector<dataio::EnsembleForecast>>(ens))
    throw SchemaError((dir / "ensemble.csv").string() + " holds a single-member forecast");
  if (!std::holds_alternative<std::vector<dataio::DeterministicForecast>>(det))
    throw SchemaError((dir / "deterministic.csv").string() + " holds an ensemble forecast");
  d.ensemble = std::move(std::get<std::vector<dataio::EnsembleForecast>>(ens));
  d.deterministic = std::move(std::get<std::vector<dataio::DeterministicForecast>>(det));
  return d;
}

int cmd_generate(const RunConfig& cfg, std::ostream& log) {
  const dataio::SyntheticWorld world(cfg.world);
  std::mutex mu;
  nlohmann::json farms = nlohmann::json::array();
  std::vector<nlohmann::json> entries(cfg.farms.size());
  parallel_for(cfg.farms.size(), cfg.jobs, [&](std::size_t i) {
    const int farm = cfg.farms[i];
    const auto data = world.generate_farm(static_cast<std::size_t>(farm));
    const auto dir = data_dir(cfg) / farm_dir(farm);
    fs::create_directories(dir);
    dataio::write_power_csv(dir / "power.csv", data.power);
    dataio::write_nwp_csv(dir / "ensemble.csv", data.ensemble);
    dataio::write_nwp_csv(dir / "deterministic.csv", data.deterministic);
    std::size_t curtailed = 0;
    for (const auto& r : data.power) curtailed += r.curtailed();
    entries[i] = {{"farm", farm},
                  {"name", data.site.name},
                  {"power_records", data.power.size()},
                  {"curtailed_records", curtailed},
                  {"ensemble_forecasts", data.ensemble.size()},
                  {"deterministic_forecasts", data.deterministic.size()}};
    std::lock_guard lock(mu);
    log << "generated " << data.site.name << ": " << data.power.size() << " power records, "
        << data.ensemble.size() << " ensemble fields\n";
  });
  for (auto& e : entries) farms.push_back(std::move(e));
  write_stage(data_dir(cfg), "generate", cfg, {{"config", cfg.to_json()}, {"farms", farms}});
  log << "dataset written to " << data_dir(cfg).string() << " (config " << cfg.hash() << ")\n";
  return kExitOk;
}

int cmd_fit(const RunConfig& cfg, const StageOptions& opt, std::ostream& log) {
  require_stage(data_dir(cfg), cfg, "generate");
  const auto methods = selected_methods(cfg, opt);
  const auto pcfg = cfg.pipeline();
  std::mutex mu;
  std::map<Method, nlohmann::json> per_method;
  bool fallback = false;
  parallel_for(cfg.farms.size(), opt.jobs.value_or(cfg.jobs), [&](std::size_t i) {
    const int farm = cfg.farms[i];
    const auto data = load_farm(cfg, farm);
    const auto models = pipelines::fit_farm(data, pcfg, methods);
    for (auto m : methods) restrict_to(models, m).save(model_dir(cfg, m) / farm_dir(farm));
    std::lock_guard lock(mu);
    fallback = fallback || models.report.fallback;
    for (auto m : methods) {
      const std::string name(pipelines::method_name(m));
      per_method[m][farm_dir(farm)] = {{"gbt_models", models.report.gbt_counts.at(name)},
                                       {"fallback", models.report.fallback}};
    }
    log << "fitted " << data.site.name << ":";
    for (const auto& [name, n] : models.report.gbt_counts) log << ' ' << name << '=' << n;
    log << '\n';
    for (const auto& w : models.report.warnings) log << "  warning: " << w << '\n';
  });
  for (auto m : methods) {
    const auto& spec = pipelines::method_spec(m);
    write_stage(model_dir(cfg, m), "fit", cfg,
                {{"method", spec.name},
                 {"gbt_models_per_farm", spec.gbt_count(cfg.quantiles.size(), cfg.horizons.size())},
                 {"farms", per_method[m]}});
  }
  if (fallback) {
    log << "numerical fallbacks were used; see fit_report.json\n";
    return kExitFallback;
  }
  return kExitOk;
}

int cmd_forecast(const RunConfig& cfg, const StageOptions& opt, std::ostream& log) {
  require_stage(data_dir(cfg), cfg, "generate");
  const auto methods = selected_methods(cfg, opt);
  for (auto m : methods) require_stage(model_dir(cfg, m), cfg, "fit");
  const auto pcfg = cfg.pipeline();
  std::mutex mu;
  bool wrote_uncertainty = false;
  parallel_for(cfg.farms.size(), opt.jobs.value_or(cfg.jobs), [&](std::size_t i) {
    const int farm = cfg.farms[i];
    const auto data = load_farm(cfg, farm);
    const auto bases = pipelines::test_base_times(data, cfg.case_study);
    for (auto m : methods) {
      const std::vector<Method> one{m};
      const auto models = pipelines::FarmModels::load(model_dir(cfg, m) / farm_dir(farm), one);
      const auto fc = pipelines::forecast_farm(data, models, pcfg, bases);
      fs::create_directories(forecast_dir(cfg, m));
      dataio::atomic_write(forecast_dir(cfg, m) / (farm_dir(farm) + ".csv"), forecast_csv(fc, m, cfg.quantiles));
      if (!fc.uncertainty.empty()) {
        fs::create_directories(uncertainty_dir(cfg));
        dataio::atomic_write(uncertainty_dir(cfg) / (farm_dir(farm) + ".csv"), uncertainty_csv(fc));
      }
      std::lock_guard lock(mu);
      wrote_uncertainty = wrote_uncertainty || !fc.uncertainty.empty();
      log << "forecast " << data.site.name << ' ' << pipelines::method_name(m) << ": " << fc.rows.size()
          << " rows\n";
      for (const auto& w : fc.warnings) log << "  warning: " << w << '\n';
    }
  });
  for (auto m : methods) write_stage(forecast_dir(cfg, m), "forecast", cfg, {{"method", pipelines::method_name(m)}});
  if (wrote_uncertainty) write_stage(uncertainty_dir(cfg), "forecast", cfg);
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  using Key = std::tuple<int, core::Timestamp, int>;  // farm, base, horizon
  struct Row {
    std::vector<double> quantiles;
    double observation, crps;
  };
  std::map<std::string, std::map<Key, Row>> by_method;
  std::set<Key> curtailed, unobserved;
  std::vector<std::string> warnings;

  for (auto m : cfg.methods) {
    const std::string name(pipelines::method_name(m));
    if (!read_stage(forecast_dir(cfg, m))) {
      warnings.push_back("no forecasts for " + name);
      continue;
    }
    require_stage(forecast_dir(cfg, m), cfg, "forecast");
    auto& rows = by_method[name];
    for (int farm : cfg.farms) {
      const auto p = forecast_dir(cfg, m) / (farm_dir(farm) + ".csv");
      if (!fs::exists(p)) {
        warnings.push_back("no forecasts for " + name + " at " + farm_dir(farm));
        continue;
      }
      const auto t = read_csv(p);
      const auto c_base = t.col("base_time"), c_h = t.col("horizon_h"), c_status = t.col("status");
      const auto c_obs = t.col("observation"), c_crps = t.col("crps");
      std::vector<std::size_t> q_cols;
      for (double tau : cfg.quantiles.levels()) q_cols.push_back(t.col("q" + dataio::format_double(tau)));
      for (const auto& r : t.rows) {
        const Key key{farm, core::parse_utc(r[c_base]), std::stoi(r[c_h])};
        if (r[c_status] == "curtailed") {
          curtailed.insert(key);
          continue;
        }
        if (r[c_status] != "available") {
          unobserved.insert(key);
          continue;
        }
        Row row{{}, to_double(r[c_obs]), to_double(r[c_crps])};
        for (auto c : q_cols) row.quantiles.push_back(to_double(r[c]));
        rows.emplace(key, std::move(row));
      }
    }
  }
  if (by_method.empty()) throw MissingArtifactError("no forecasts found under " + (cfg.root / "forecasts").string() +
                                                    "; run 'forecast' first");

  // Pairs scored by every method with forecasts.
  std::set<Key> common;
  bool first = true;
  std::size_t union_size = 0;
  {
    std::set<Key> all;
    for (const auto& [name, rows] : by_method) {
      std::set<Key> keys;
      for (const auto& [k, r] : rows) keys.insert(k);
      all.insert(keys.begin(), keys.end());
      if (first) common = std::move(keys);
      else {
        std::set<Key> kept;
        std::set_intersection(common.begin(), common.end(), keys.begin(), keys.end(),
                              std::inserter(kept, kept.begin()));
        common = std::move(kept);
      }
      first = false;
    }
    union_size = all.size();
  }
  if (common.size() < union_size)
    warnings.push_back("evaluating " + std::to_string(common.size()) + " of " + std::to_string(union_size) +
                       " forecast cases present for every method");

  std::vector<eval::ScoredForecast> scored;
  for (const auto& [name, rows] : by_method)
    for (const auto& key : common) {
      const auto& r = rows.at(key);
      const auto& [farm, base, h] = key;
      scored.push_back({name, farm_dir(farm), core::ForecastIndex{base, h}, r.quantiles, r.observation, r.crps});
    }

  std::vector<eval::UncertaintyRecord> unc;
  if (read_stage(uncertainty_dir(cfg))) {
    require_stage(uncertainty_dir(cfg), cfg, "forecast");
    for (int farm : cfg.farms) {
      const auto p = uncertainty_dir(cfg) / (farm_dir(farm) + ".csv");
      if (!fs::exists(p)) continue;
      const auto t = read_csv(p);
      const auto c_base = t.col("base_time"), c_h = t.col("horizon_h"), c_n = t.col("u_nwp"), c_w = t.col("u_w2p");
      for (const auto& r : t.rows) {
        const core::ForecastIndex idx{core::parse_utc(r[c_base]), std::stoi(r[c_h])};
        if (!common.count({farm, idx.base_time, idx.horizon_hours})) continue;
        unc.push_back({farm_dir(farm), idx, to_double(r[c_n]), to_double(r[c_w])});
      }
    }
  }

  eval::ReportOptions ro;
  ro.subject = cfg.subject;
  ro.bootstrap.n_resamples = cfg.bootstrap_resamples;
  ro.bootstrap.seed = core::derive_seed(cfg.seed, {3});
  ro.high_uncertainty_level = cfg.high_uncertainty_level;
  const auto rep = eval::build_report(scored, cfg.quantiles, unc, ro);

  const auto dir = eval_dir(cfg);
  fs::create_directories(dir);
  dataio::atomic_write(dir / "crps.csv", rep.crps_csv());
  dataio::atomic_write(dir / "skill.csv", rep.skill_csv());
  dataio::atomic_write(dir / "reliability.csv", rep.reliability_csv());
  dataio::atomic_write(dir / "uncertainty.csv", rep.uncertainty_csv());
  dataio::atomic_write(dir / "crossing.csv", rep.crossing_csv());

  std::vector<std::string> methods;
  for (const auto& [name, rows] : by_method) methods.push_back(name);
  write_stage(dir, "evaluate", cfg,
              {{"methods", methods},
               {"pairs", common.size()},
               {"curtailed_excluded", curtailed.size()},
               {"unobserved_excluded", unobserved.size()},
               {"warnings", warnings},
               {"in_sample_baseline", eval::kStateOfTheArt}});
  for (const auto& w : warnings) log << "warning: " << w << '\n';
  log << "evaluated " << common.size() << " cases per method; excluded " << curtailed.size()
      << " curtailed and " << unobserved.size() << " unobserved\n";
  if (common.empty()) {
    log << "no forecast cases overlap the test observations\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_report(const RunConfig& cfg, std::ostream& log) {
  const auto stage = require_stage(eval_dir(cfg), cfg, "evaluate");
  const auto crps = read_csv(eval_dir(cfg) / "crps.csv");
  const auto skill = read_csv(eval_dir(cfg) / "skill.csv");
  const auto crossing = read_csv(eval_dir(cfg) / "crossing.csv");

  // Pair-weighted mean CRPS per method and forecast day over all farms.
  std::map<std::string, std::map<int, std::pair<double, std::size_t>>> by_day;
  {
    const auto c_m = crps.col("method"), c_h = crps.col("horizon"), c_v = crps.col("mean_crps"), c_n = crps.col("n");
    for (const auto& r : crps.rows) {
      const auto n = static_cast<std::size_t>(std::stoull(r[c_n]));
      auto& [sum, count] = by_day[r[c_m]][core::horizon_day(std::stoi(r[c_h]))];
      sum += to_double(r[c_v]) * static_cast<double>(n);
      count += n;
    }
  }
  nlohmann::json methods = nlohmann::json::array();
  for (auto m : cfg.methods) {
    const std::string name(pipelines::method_name(m));
    nlohmann::json entry = {{"method", name}};
    const auto it = by_day.find(name);
    if (it == by_day.end()) {
      entry["evaluated"] = false;
    } else {
      entry["evaluated"] = true;
      nlohmann::json days = nlohmann::json::object();
      for (const auto& [day, sn] : it->second) days[std::to_string(day)] = sn.first / static_cast<double>(sn.second);
      entry["mean_crps_by_day"] = days;
    }
    methods.push_back(entry);
  }
  nlohmann::json skills = nlohmann::json::array();
  {
    const auto c_s = skill.col("subject"), c_r = skill.col("reference"), c_f = skill.col("farm"),
               c_d = skill.col("day"), c_v = skill.col("skill"), c_sig = skill.col("significant"),
               c_sub = skill.col("subset");
    for (const auto& r : skill.rows) {
      if (r[c_f] != "all") continue;
      skills.push_back({{"subject", r[c_s]},
                        {"reference", r[c_r]},
                        {"subset", r[c_sub]},
                        {"day", std::stoi(r[c_d])},
                        {"skill", r[c_v].empty() ? nlohmann::json(nullptr) : nlohmann::json(to_double(r[c_v]))},
                        {"significant", r[c_sig] == "1" || r[c_sig] == "true"}});
    }
  }
  nlohmann::json crossings = nlohmann::json::object();
  {
    const auto c_f = crossing.col("farm"), c_h = crossing.col("crossing_h");
    for (const auto& r : crossing.rows)
      crossings[r[c_f]] = r[c_h].empty() ? nlohmann::json(nullptr) : nlohmann::json(to_double(r[c_h]));
  }
  const nlohmann::json summary = {{"config_hash", cfg.hash()},
                                  {"subject", cfg.subject},
                                  {"methods", methods},
                                  {"skill", skills},
                                  {"crossing_h", crossings},
                                  {"pairs", stage.value("pairs", 0)},
                                  {"curtailed_excluded", stage.value("curtailed_excluded", 0)},
                                  {"in_sample_baseline", eval::kStateOfTheArt}};
  fs::create_directories(report_dir(cfg));
  dataio::atomic_write(report_dir(cfg) / "summary.json", summary.dump(1) + "\n");
  write_stage(report_dir(cfg), "report", cfg);

  log << "mean CRPS by forecast day\n";
  for (const auto& m : methods) {
    log << "  " << m["method"].get<std::string>();
    if (!m["evaluated"].get<bool>()) {
      log << "  (not evaluated)\n";
      continue;
    }
    for (const auto& [day, v] : m["mean_crps_by_day"].items()) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "  d%s=%.4f", day.c_str(), v.get<double>());
      log << buf;
    }
    log << '\n';
  }
  log << "summary written to " << (report_dir(cfg) / "summary.json").string() << '\n';
  return kExitOk;
}

int run_stage(const std::string& stage, const fs::path& config, const StageOptions& opt, std::ostream& log) {
  try {
    auto cfg = load_run_config(config);
    if (opt.jobs) {
      if (*opt.jobs < 1) throw ConfigError("--jobs must be positive");
      cfg.jobs = *opt.jobs;
    }
    if (stage == "generate") return cmd_generate(cfg, log);
    if (stage == "fit") return cmd_fit(cfg, opt, log);
    if (stage == "forecast") return cmd_forecast(cfg, opt, log);
    if (stage == "evaluate") return cmd_evaluate(cfg, log);
    if (stage == "report") return cmd_report(cfg, log);
    throw ConfigError("unknown stage '" + stage + "'");
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const MissingArtifactError& e) {
    log << "missing artifact: " << e.what() << '\n';
    return kExitMissingArtifact;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace windcast::cli
