#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "windcast/cli.hpp"

using namespace windcast;
using namespace windcast::cli;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(seed: 11
root: run
world:
  n_farms: 2
  first_year: 2019
  n_years: 3
  days_per_year: 20
  n_members: 5
  max_horizon: 24
  det_step_hours: 6
  curtailment_rate: 0.05
methods: [ENS-QGBT-BMM, ENS-GBT-EMOS, HRESc-QGBT-None]
quantiles: [0.05, 0.25, 0.5, 0.75, 0.95]
horizons: {first: 6, last: 24, step: 6}
hyperparameters:
  ensemble: {n_estimators: 10, max_depth: 3, min_samples_split: 10, min_samples_leaf: 5}
  deterministic: {n_estimators: 10, max_depth: 3, min_samples_split: 10, min_samples_leaf: 5}
combination: {starts: 2}
evaluation: {bootstrap_resamples: 200, high_uncertainty_level: 0.8}
)";

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("windcast_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "run.yaml";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int stage(const std::string& name, const fs::path& cfg, std::string* log = nullptr, StageOptions opt = {}) {
  std::ostringstream os;
  const int rc = run_stage(name, cfg, opt, os);
  if (log) *log = os.str();
  return rc;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  if (pos != std::string::npos) s.replace(pos, from.size(), to);
  return s;
}

}  // namespace

TEST(Config, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Config, HashIsStableAndSensitive) {
  const auto a = parse_run_config(kTinyConfig, "/tmp");
  const auto b = parse_run_config(kTinyConfig, "/tmp");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  const auto c = parse_run_config(replace(kTinyConfig, "days_per_year: 20", "days_per_year: 21"), "/tmp");
  EXPECT_NE(a.hash(), c.hash());
  const auto d = parse_run_config(replace(kTinyConfig, "starts: 2", "starts: 3"), "/tmp");
  EXPECT_NE(a.hash(), d.hash());
  EXPECT_EQ(a.root, fs::path("/tmp/run"));
}

TEST(Config, Validation) {
  EXPECT_THROW(parse_run_config(replace(kTinyConfig, "seed: 11\n", ""), "/tmp"), ConfigError);
  EXPECT_THROW(parse_run_config(replace(kTinyConfig, "ENS-GBT-EMOS", "ENS-GBT-XYZ"), "/tmp"), ConfigError);
  EXPECT_THROW(parse_run_config(replace(kTinyConfig, "root: run", "rot: run"), "/tmp"), ConfigError);
  EXPECT_THROW(parse_run_config(replace(kTinyConfig, "last: 24", "last: 48"), "/tmp"), ConfigError);
  EXPECT_THROW(parse_run_config(replace(kTinyConfig, "0.05, 0.25", "0.25, 0.05"), "/tmp"), ConfigError);
  EXPECT_THROW(parse_run_config("seed: [1", "/tmp"), ConfigError);
  const auto dir = fresh_dir("badcfg");
  EXPECT_EQ(stage("generate", write_config(dir, replace(kTinyConfig, "seed: 11\n", ""))), kExitConfig);
  EXPECT_EQ(stage("generate", dir / "absent.yaml"), kExitConfig);
}

TEST(Config, SeedFromEnvironment) {
  const auto dir = fresh_dir("env");
  const auto path = write_config(dir, kTinyConfig);
  ::setenv("WINDCAST_SEED", "99", 1);
  const auto cfg = load_run_config(path);
  ::unsetenv("WINDCAST_SEED");
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_NE(cfg.hash(), load_run_config(path).hash());
}

TEST(Stages, FitBeforeGenerateNamesMissingArtifact) {
  const auto dir = fresh_dir("order");
  const auto cfg = write_config(dir, kTinyConfig);
  std::string log;
  EXPECT_EQ(stage("fit", cfg, &log), kExitMissingArtifact);
  EXPECT_NE(log.find("data/stage.json"), std::string::npos) << log;
  EXPECT_NE(log.find("generate"), std::string::npos) << log;
}

TEST(Stages, EndToEnd) {
  const auto dir = fresh_dir("e2e");
  const auto cfg_path = write_config(dir, kTinyConfig);
  const auto root = dir / "run";
  std::string log;

  ASSERT_EQ(stage("generate", cfg_path, &log), kExitOk) << log;
  for (const char* farm : {"farm_000", "farm_001"})
    for (const char* f : {"power.csv", "ensemble.csv", "deterministic.csv"}) EXPECT_TRUE(fs::exists(root / "data" / farm / f));
  const auto manifest = slurp(root / "data" / "stage.json");
  ASSERT_EQ(stage("generate", cfg_path), kExitOk);
  EXPECT_EQ(slurp(root / "data" / "stage.json"), manifest);

  // 20 pairs per horizon is below the combination sample floor: identity calibration, fallback exit.
  ASSERT_EQ(stage("fit", cfg_path, &log), kExitFallback) << log;
  const auto bmm = root / "models" / "ENS-QGBT-BMM" / "farm_000";
  std::size_t level_files = 0;
  for (const auto& e : fs::directory_iterator(bmm / "w2p_iqr")) level_files += e.path().extension() == ".json";
  EXPECT_EQ(level_files, 3u);
  std::size_t hresc_files = 0;
  for (const auto& e : fs::directory_iterator(root / "models" / "HRESc-QGBT-None" / "farm_000" / "hresc"))
    hresc_files += e.path().extension() == ".json";
  EXPECT_EQ(hresc_files, 4u);
  const auto report = nlohmann::json::parse(slurp(bmm / "fit_report.json"));
  EXPECT_EQ(report["gbt_counts"]["ENS-QGBT-BMM"], 3);
  EXPECT_TRUE(report["fallback"].get<bool>());
  const auto coeffs = slurp(bmm / "combination.json");
  const auto hresc12 = slurp(root / "models" / "HRESc-QGBT-None" / "farm_001" / "hresc" / "h012.json");

  // Refit of one method reproduces the joint fit byte for byte.
  StageOptions one;
  one.method = "ENS-QGBT-BMM";
  EXPECT_EQ(stage("fit", cfg_path, nullptr, one), kExitFallback);
  EXPECT_EQ(slurp(bmm / "combination.json"), coeffs);
  ASSERT_EQ(stage("fit", cfg_path), kExitFallback);
  EXPECT_EQ(slurp(root / "models" / "HRESc-QGBT-None" / "farm_001" / "hresc" / "h012.json"), hresc12);

  ASSERT_EQ(stage("forecast", cfg_path, &log), kExitOk) << log;
  EXPECT_TRUE(fs::exists(root / "forecasts" / "ENS-GBT-EMOS" / "farm_001.csv"));
  EXPECT_TRUE(fs::exists(root / "forecasts" / "uncertainty" / "farm_000.csv"));

  ASSERT_EQ(stage("evaluate", cfg_path, &log), kExitOk) << log;
  const auto ev = nlohmann::json::parse(slurp(root / "eval" / "stage.json"));
  EXPECT_GT(ev["pairs"].get<int>(), 0);
  EXPECT_GT(ev["curtailed_excluded"].get<int>(), 0);
  EXPECT_NE(log.find("curtailed"), std::string::npos);
  const auto crps = slurp(root / "eval" / "crps.csv");
  EXPECT_EQ(crps.substr(0, crps.find('\n')), "method,farm,horizon,mean_crps,n");

  ASSERT_EQ(stage("report", cfg_path, &log), kExitOk) << log;
  const auto summary = nlohmann::json::parse(slurp(root / "report" / "summary.json"));
  ASSERT_EQ(summary["methods"].size(), 3u);
  for (const auto& m : summary["methods"]) EXPECT_TRUE(m["evaluated"].get<bool>()) << m;

  // Whole pipeline again in a fresh directory: identical scores.
  const auto dir2 = fresh_dir("e2e_repeat");
  const auto cfg2 = write_config(dir2, kTinyConfig);
  for (const char* s : {"generate", "fit", "forecast", "evaluate"}) {
    const int rc = stage(s, cfg2);
    EXPECT_TRUE(rc == kExitOk || rc == kExitFallback) << s;
  }
  EXPECT_EQ(slurp(dir2 / "run" / "eval" / "crps.csv"), crps);

  // A changed configuration makes earlier artifacts stale.
  const auto changed = write_config(dir, replace(kTinyConfig, "starts: 2", "starts: 3"));
  EXPECT_EQ(stage("forecast", changed, &log), kExitMissingArtifact);
  EXPECT_NE(log.find("different configuration"), std::string::npos) << log;

  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST(Stages, EvaluateWithoutOverlapFails) {
  const auto dir = fresh_dir("empty");
  const auto cfg_path = write_config(dir, replace(kTinyConfig, "[ENS-QGBT-BMM, ENS-GBT-EMOS, HRESc-QGBT-None]",
                                                   "[ENS-GBT-EMOS]"));
  const auto cfg = load_run_config(cfg_path);
  const auto fdir = cfg.root / "forecasts" / "ENS-GBT-EMOS";
  fs::create_directories(fdir);
  std::ofstream(fdir / "stage.json") << nlohmann::json{{"stage", "forecast"}, {"config_hash", cfg.hash()}}.dump();
  std::ofstream(fdir / "farm_000.csv")
      << "base_time,horizon_h,valid_time,status,observation,crps,omega0,omega1,q0.05,q0.25,q0.5,q0.75,q0.95\n";
  std::string log;
  EXPECT_NE(stage("evaluate", cfg_path, &log), kExitOk);
  EXPECT_TRUE(fs::exists(cfg.root / "eval" / "crps.csv"));
  EXPECT_NE(log.find("no forecast cases"), std::string::npos) << log;
  fs::remove_all(dir);
}
