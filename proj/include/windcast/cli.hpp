#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "windcast/dataio.hpp"
#include "windcast/pipelines.hpp"

namespace windcast::cli {

/// Declarative run configuration, read from a YAML file.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path root;  ///< artifact directory
  dataio::SyntheticWorldConfig world;
  std::vector<int> farms;  ///< world farm indices to process
  core::CaseStudy case_study{2021, {2019, 2020}};
  std::vector<pipelines::Method> methods;
  core::QuantileGrid quantiles = core::QuantileGrid::standard();
  core::HorizonGrid horizons = core::HorizonGrid::standard();
  bool tune = false;
  int tuning_budget = 20;
  qgbt::GbtHyperparams ens_hyperparams;
  qgbt::GbtHyperparams det_hyperparams;
  int combination_starts = 5;
  std::size_t bootstrap_resamples = 1000;
  std::optional<double> high_uncertainty_level;
  std::string subject = "ENS-QGBT-BMM";
  int jobs = 1;

  /// Canonical form; everything except `jobs` and `root` enters the hash.
  nlohmann::json to_json() const;
  /// FNV-1a 64 of the canonical form, as 16 hex digits.
  std::string hash() const;

  pipelines::PipelineConfig pipeline() const;
  void validate() const;
};

/// Parses YAML text. Relative paths resolve against `base_dir`. Throws ConfigError.
RunConfig parse_run_config(const std::string& yaml, const std::filesystem::path& base_dir);
/// Reads the file, then applies WINDCAST_SEED from the environment when set.
RunConfig load_run_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

// ---------------------------------------------------------------------------
// Stages. Each returns a process exit status and writes diagnostics to `log`.

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissingArtifact = 3;
inline constexpr int kExitFallback = 4;

struct StageOptions {
  std::optional<std::string> method;  ///< restrict fit/forecast to one method
  std::optional<int> jobs;            ///< overrides RunConfig::jobs
};

int cmd_generate(const RunConfig& cfg, std::ostream& log);
int cmd_fit(const RunConfig& cfg, const StageOptions& opt, std::ostream& log);
int cmd_forecast(const RunConfig& cfg, const StageOptions& opt, std::ostream& log);
int cmd_evaluate(const RunConfig& cfg, std::ostream& log);
int cmd_report(const RunConfig& cfg, std::ostream& log);

/// Loads the configuration and runs one stage, mapping errors to exit statuses.
int run_stage(const std::string& stage, const std::filesystem::path& config, const StageOptions& opt,
              std::ostream& log);

/// Reloads a generated farm (power and NWP files plus its site from the world definition).
pipelines::FarmData load_farm(const RunConfig& cfg, int farm);

}  // namespace windcast::cli
