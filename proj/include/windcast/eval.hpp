#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "windcast/core.hpp"
#include "windcast/dists.hpp"

namespace windcast::eval {

// ---------------------------------------------------------------------------
// Scores

/// Arithmetic mean of per-pair scores; empty input gives no value.
std::optional<double> mean_crps(std::span<const double> scores);
std::optional<double> mean_crps(std::span<const dists::BoundedCdf> forecasts, std::span<const double> observations);

/// (ref - subject) / ref. Throws UndefinedSkillError when ref == 0.
double skill_score(double reference, double subject);

/// Throws ParameterError for tau outside (0, 1).
double pinball_loss(double q, double y, double tau);

struct PairedScore {
  std::int64_t block = 0;  ///< resampling block, e.g. base time in hours
  double reference = 0.0;
  double subject = 0.0;
};

struct BootstrapOptions {
  std::size_t n_resamples = 1000;
  std::uint64_t seed = 0;
  std::size_t min_pairs = 30;
  double level = 0.95;
};

struct BootstrapResult {
  double skill = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool significant = false;
  bool insufficient = false;  ///< fewer than min_pairs pairs; no interval computed
  std::size_t n_pairs = 0;
  std::size_t n_blocks = 0;
};

/// Block bootstrap of the skill score: blocks are resampled with replacement and the skill
/// recomputed per resample; significant iff the central interval excludes 0.
BootstrapResult bootstrap_significance(std::span<const PairedScore> pairs, const BootstrapOptions& opt = {});

// ---------------------------------------------------------------------------
// Calibration

struct ReliabilityRow {
  double tau = 0.0;
  double coverage = 0.0;
  std::size_t n = 0;
};

inline constexpr std::size_t kReliabilityRecommendedPairs = 100;

/// Fraction of observations at or below each predicted quantile.
std::vector<ReliabilityRow> reliability_table(std::span<const dists::BoundedCdf> forecasts,
                                              std::span<const double> observations, const core::QuantileGrid& grid);
/// Same from precomputed quantiles, row-major [pair][level].
std::vector<ReliabilityRow> reliability_table(std::span<const double> quantiles, std::span<const double> observations,
                                              const core::QuantileGrid& grid);

// ---------------------------------------------------------------------------
// Uncertainty decomposition

/// Type-7 interquartile range of the member medians. Throws ParameterError for m < 2.
double uncertainty_nwp(std::span<const double> member_medians);
/// Mean member interquartile range. Throws ParameterError for m = 0.
double uncertainty_w2p(std::span<const core::QuantileSet> members);

/// Root of the least-squares line through (horizon, u_nwp - u_w2p) when it lies within the
/// horizon range.
std::optional<double> crossing_horizon(std::span<const core::UncertaintyProfile> profiles);

struct HighUncertaintySubset {
  std::vector<std::size_t> retained;  ///< indices into the input
  std::map<int, double> thresholds;   ///< per horizon
  bool empty = false;
};

/// Keeps records whose u_nwp exceeds the per-horizon type-7 quantile at `level` of the same
/// records. level = 0 keeps everything.
HighUncertaintySubset high_uncertainty_filter(std::span<const int> horizons, std::span<const double> u_nwp,
                                              double level);

// ---------------------------------------------------------------------------
// Reports

struct ScoredForecast {
  std::string method;
  std::string farm;
  core::ForecastIndex index;
  std::vector<double> quantiles;
  double observation = 0.0;
  double crps = 0.0;
};

struct UncertaintyRecord {
  std::string farm;
  core::ForecastIndex index;
  double u_nwp = 0.0;
  double u_w2p = 0.0;
};

struct ReportOptions {
  std::string subject = "ENS-QGBT-BMM";
  BootstrapOptions bootstrap{};
  /// Also report skill on records above this per-horizon U^NWP quantile.
  std::optional<double> high_uncertainty_level;
};

struct CrpsEntry {
  std::string method, farm;
  int horizon;
  double mean_crps;
  std::size_t n;
};

struct SkillEntry {
  std::string subject, reference, farm, subset;
  int day;
  BootstrapResult result;
};

struct ReliabilityEntry {
  std::string method, farm;
  ReliabilityRow row;
  bool few_pairs;
};

struct UncertaintyEntry {
  std::string farm;
  int horizon;
  double u_nwp, u_w2p;
  std::size_t n;
};

struct CrossingEntry {
  std::string farm;
  std::optional<double> hours;
};

inline constexpr const char* kStateOfTheArt = "state-of-the-art";

struct EvaluationReport {
  std::vector<CrpsEntry> crps;
  std::vector<SkillEntry> skill;
  std::vector<ReliabilityEntry> reliability;
  std::vector<UncertaintyEntry> uncertainty;
  std::vector<CrossingEntry> crossing;
  std::vector<std::string> methods;
  std::size_t pairs = 0;

  std::string crps_csv() const;
  std::string skill_csv() const;
  std::string reliability_csv() const;
  std::string uncertainty_csv() const;
  std::string crossing_csv() const;
};

/// Mean CRPS per (method, farm, horizon); skill of the subject against every other method and
/// against the per-(farm, horizon) best other method on the same period ("state-of-the-art",
/// an in-sample baseline) per forecast day; reliability; uncertainty profiles and crossings.
EvaluationReport build_report(std::span<const ScoredForecast> scored, const core::QuantileGrid& grid,
                              std::span<const UncertaintyRecord> uncertainty, const ReportOptions& opt = {});

}  // namespace windcast::eval
