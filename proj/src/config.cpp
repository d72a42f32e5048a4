#include <cstdio>
#include <cstdlib>
#include <set>

#include <yaml-cpp/yaml.h>

#include "windcast/cli.hpp"

namespace windcast::cli {

namespace {

template <class T>
T get(const YAML::Node& node, const char* key, T fallback) {
  const auto n = node[key];
  if (!n) return fallback;
  try {
    return n.as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

qgbt::GbtHyperparams read_hyperparams(const YAML::Node& n, qgbt::GbtHyperparams h, const std::string& where) {
  check_keys(n, where, {"max_depth", "min_samples_split", "min_samples_leaf", "n_estimators", "learning_rate",
                        "subsample", "sqrt_features"});
  if (!n) return h;
  h.max_depth = get(n, "max_depth", h.max_depth);
  h.min_samples_split = get(n, "min_samples_split", h.min_samples_split);
  h.min_samples_leaf = get(n, "min_samples_leaf", h.min_samples_leaf);
  h.n_estimators = get(n, "n_estimators", h.n_estimators);
  h.learning_rate = get(n, "learning_rate", h.learning_rate);
  h.subsample = get(n, "subsample", h.subsample);
  h.sqrt_features = get(n, "sqrt_features", h.sqrt_features);
  return h;
}

nlohmann::json hyper_json(const qgbt::GbtHyperparams& h) {
  return {{"max_depth", h.max_depth},       {"min_samples_split", h.min_samples_split},
          {"min_samples_leaf", h.min_samples_leaf}, {"n_estimators", h.n_estimators},
          {"learning_rate", h.learning_rate}, {"subsample", h.subsample},
          {"sqrt_features", h.sqrt_features}};
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

nlohmann::json RunConfig::to_json() const {
  const auto& w = world;
  nlohmann::json wj = {{"n_farms", w.n_farms},
                       {"first_year", w.first_year},
                       {"n_years", w.n_years},
                       {"days_per_year", w.days_per_year},
                       {"base_hours", w.base_hours},
                       {"n_members", w.n_members},
                       {"max_horizon", w.max_horizon},
                       {"ens_step_hours", w.ens_step_hours},
                       {"det_step_hours", w.det_step_hours},
                       {"dispersion_growth", w.dispersion_growth},
                       {"spread_initial", w.spread_initial},
                       {"noise_scale", w.noise_scale},
                       {"curtailment_rate", w.curtailment_rate}};
  std::vector<std::string> names;
  for (auto m : methods) names.emplace_back(pipelines::method_name(m));
  std::vector<double> q(quantiles.levels().begin(), quantiles.levels().end());
  nlohmann::json j = {{"seed", seed},
                      {"world", wj},
                      {"farms", farms},
                      {"case_study", {{"test_year", case_study.test_year}, {"estimation_years", case_study.estimation_years}}},
                      {"methods", names},
                      {"quantiles", q},
                      {"horizons", {{"first", horizons.first()}, {"last", horizons.last()}, {"step", horizons.step()}}},
                      {"hyperparameters",
                       {{"tune", tune},
                        {"budget", tuning_budget},
                        {"ensemble", hyper_json(ens_hyperparams)},
                        {"deterministic", hyper_json(det_hyperparams)}}},
                      {"combination", {{"starts", combination_starts}}},
                      {"evaluation",
                       {{"subject", subject},
                        {"bootstrap_resamples", bootstrap_resamples},
                        {"high_uncertainty_level",
                         high_uncertainty_level ? nlohmann::json(*high_uncertainty_level) : nlohmann::json(nullptr)}}}};
  return j;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

pipelines::PipelineConfig RunConfig::pipeline() const {
  auto p = pipelines::PipelineConfig::standard();
  p.case_study = case_study;
  p.horizons = horizons;
  p.quantiles = quantiles;
  p.ens_w2p.hyperparams = ens_hyperparams;
  p.ens_w2p.tune = tune;
  p.ens_w2p.tuning.budget = tuning_budget;
  p.hres_w2p.hyperparams = det_hyperparams;
  p.hres_w2p.tune = tune;
  p.hres_w2p.tuning.budget = tuning_budget;
  p.combination.n_starts = combination_starts;
  p.seed = core::derive_seed(seed, {2});
  return p;
}

void RunConfig::validate() const {
  world.validate();
  case_study.validate();
  if (farms.empty()) throw ConfigError("no farms selected");
  for (int f : farms)
    if (f < 0 || f >= world.n_farms) throw ConfigError("farm index " + std::to_string(f) + " outside the world");
  if (methods.empty()) throw ConfigError("no methods configured");
  if (horizons.last() > world.max_horizon) throw ConfigError("horizons exceed the world's maximum lead time");
  if (horizons.step() % world.ens_step_hours != 0 || horizons.first() % world.ens_step_hours != 0)
    throw ConfigError("horizons must lie on the ensemble time step");
  if (tuning_budget < 1) throw ConfigError("tuning budget must be positive");
  if (jobs < 1) throw ConfigError("jobs must be positive");
  if (high_uncertainty_level && !(*high_uncertainty_level >= 0.0 && *high_uncertainty_level < 1.0))
    throw ConfigError("high_uncertainty_level must lie in [0, 1)");
  pipeline().validate();
}

RunConfig parse_run_config(const std::string& yaml, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping");
  check_keys(root, "", {"seed", "root", "world", "farms", "case_study", "methods", "quantiles", "horizons",
                        "hyperparameters", "combination", "evaluation", "jobs"});
  RunConfig c;
  if (!root["seed"]) throw ConfigError("config lacks 'seed'");
  c.seed = get<std::uint64_t>(root, "seed", 0);
  c.root = (base_dir / get<std::string>(root, "root", "run")).lexically_normal();

  const auto w = root["world"];
  check_keys(w, "world.", {"n_farms", "first_year", "n_years", "days_per_year", "base_hours", "n_members",
                           "max_horizon", "ens_step_hours", "det_step_hours", "dispersion_growth", "spread_initial",
                           "noise_scale", "curtailment_rate"});
  auto& wc = c.world;
  if (w) {
    wc.n_farms = get(w, "n_farms", wc.n_farms);
    wc.first_year = get(w, "first_year", wc.first_year);
    wc.n_years = get(w, "n_years", wc.n_years);
    wc.days_per_year = get(w, "days_per_year", wc.days_per_year);
    wc.base_hours = get(w, "base_hours", wc.base_hours);
    wc.n_members = get(w, "n_members", wc.n_members);
    wc.max_horizon = get(w, "max_horizon", wc.max_horizon);
    wc.ens_step_hours = get(w, "ens_step_hours", wc.ens_step_hours);
    wc.det_step_hours = get(w, "det_step_hours", wc.det_step_hours);
    wc.dispersion_growth = get(w, "dispersion_growth", wc.dispersion_growth);
    wc.spread_initial = get(w, "spread_initial", wc.spread_initial);
    wc.noise_scale = get(w, "noise_scale", wc.noise_scale);
    wc.curtailment_rate = get(w, "curtailment_rate", wc.curtailment_rate);
  }

  const auto farms = root["farms"];
  if (!farms) {
    for (int i = 0; i < wc.n_farms; ++i) c.farms.push_back(i);
  } else if (farms.IsScalar()) {
    const int n = get(root, "farms", 0);
    if (n < 1) throw ConfigError("farms must be a positive count or a list");
    if (!w || !w["n_farms"]) wc.n_farms = n;
    for (int i = 0; i < n; ++i) c.farms.push_back(i);
  } else {
    c.farms = get<std::vector<int>>(root, "farms", {});
    std::sort(c.farms.begin(), c.farms.end());
    c.farms.erase(std::unique(c.farms.begin(), c.farms.end()), c.farms.end());
  }
  wc.seed = core::derive_seed(c.seed, {1});

  const auto cs = root["case_study"];
  check_keys(cs, "case_study.", {"test_year", "estimation_years"});
  if (cs) {
    c.case_study.test_year = get(cs, "test_year", c.case_study.test_year);
    c.case_study.estimation_years = get(cs, "estimation_years", c.case_study.estimation_years);
  }

  const auto methods = get<std::vector<std::string>>(root, "methods", {"ENS-QGBT-BMM", "ENS-GBT-EMOS", "HRESc-QGBT-None"});
  for (const auto& m : methods) c.methods.push_back(pipelines::method_spec(m).method);

  const auto q = root["quantiles"];
  if (q && q.IsScalar()) {
    const auto name = q.as<std::string>();
    if (name == "standard") c.quantiles = core::QuantileGrid::standard();
    else throw ConfigError("unknown quantile grid '" + name + "'");
  } else if (q) {
    try {
      c.quantiles = core::QuantileGrid(get<std::vector<double>>(root, "quantiles", {}));
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("quantiles: ") + e.what());
    }
  }

  const auto h = root["horizons"];
  check_keys(h, "horizons.", {"first", "last", "step"});
  if (h) {
    try {
      c.horizons = core::HorizonGrid(get(h, "first", 6), get(h, "last", 162), get(h, "step", 6));
    } catch (const Error& e) {
      throw ConfigError(std::string("horizons: ") + e.what());
    }
  }

  const auto hp = root["hyperparameters"];
  check_keys(hp, "hyperparameters.", {"tune", "budget", "ensemble", "deterministic"});
  c.ens_hyperparams = qgbt::SearchSpace::standard().defaults();
  c.det_hyperparams = qgbt::SearchSpace::deterministic().defaults();
  if (hp) {
    c.tune = get(hp, "tune", c.tune);
    c.tuning_budget = get(hp, "budget", c.tuning_budget);
    c.ens_hyperparams = read_hyperparams(hp["ensemble"], c.ens_hyperparams, "hyperparameters.ensemble.");
    c.det_hyperparams = read_hyperparams(hp["deterministic"], c.det_hyperparams, "hyperparameters.deterministic.");
  }

  const auto comb = root["combination"];
  check_keys(comb, "combination.", {"starts"});
  if (comb) c.combination_starts = get(comb, "starts", c.combination_starts);

  const auto ev = root["evaluation"];
  check_keys(ev, "evaluation.", {"subject", "bootstrap_resamples", "high_uncertainty_level"});
  if (ev) {
    c.subject = get(ev, "subject", c.subject);
    c.bootstrap_resamples = get(ev, "bootstrap_resamples", c.bootstrap_resamples);
    if (ev["high_uncertainty_level"]) c.high_uncertainty_level = get(ev, "high_uncertainty_level", 0.8);
  }
  pipelines::method_spec(c.subject);
  c.jobs = get(root, "jobs", 1);
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file " + path.string() + " not found");
  auto cfg = parse_run_config(dataio::read_text(path), path.parent_path());
  if (const char* env = std::getenv("WINDCAST_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw ConfigError(std::string("WINDCAST_SEED is not an integer: ") + env);
    cfg.seed = v;
    cfg.world.seed = core::derive_seed(v, {1});
  }
  return cfg;
}

}  // namespace windcast::cli
