#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "windcast/combine.hpp"
#include "windcast/core.hpp"
#include "windcast/dataio.hpp"
#include "windcast/dists.hpp"
#include "windcast/features.hpp"
#include "windcast/qgbt.hpp"

namespace windcast::pipelines {

// ---------------------------------------------------------------------------
// Method table

enum class Method { EnsGbtNone, EnsQgbtNone, HresQgbtNone, HrescQgbtNone, EnsGbtEmos, EnsQgbtBmm };

enum class NwpSource { Ensemble, Deterministic, DeterministicConstrained };
enum class W2pGrid { Median, Configured, Iqr };  ///< {50%}, the run's quantile grid, {25, 50, 75%}
enum class Combiner { None, Emos, BetaPool };

struct MethodSpec {
  Method method;
  std::string_view name;
  NwpSource source;
  W2pGrid w2p_grid;
  Combiner combiner;
  bool gpd_tails;
  bool per_horizon_w2p;  ///< one weather-to-power model per (horizon, level)

  /// Gradient-boosted models the method needs.
  std::size_t gbt_count(std::size_t n_levels, std::size_t n_horizons) const;
};

const std::vector<MethodSpec>& method_table();
const MethodSpec& method_spec(Method m);
/// Throws ConfigError for an unknown name.
const MethodSpec& method_spec(std::string_view name);
std::string_view method_name(Method m);
std::vector<Method> all_methods();

// ---------------------------------------------------------------------------
// Observations at NWP valid times

/// Normalized power looked up by the settlement period starting at a valid time.
class Observations {
 public:
  explicit Observations(std::span<const core::PowerRecord> records);
  enum class Status { Available, Curtailed, Missing };
  Status status(core::Timestamp t) const;
  /// Normalized power when available (not curtailed, present).
  std::optional<double> value(core::Timestamp t) const;

 private:
  std::map<core::Timestamp, double> values_;
  std::map<core::Timestamp, bool> curtailed_;
};

// ---------------------------------------------------------------------------
// Per-forecast stages

/// Weather-to-power inputs of every member of one ensemble forecast (one row per member).
/// Every ensemble-driven method consumes this same matrix.
features::FeatureMatrix member_features(const dataio::EnsembleForecast& f, const features::W2pExtractor& ex);

std::vector<core::QuantileSet> member_quantiles(const qgbt::QGbtModel& model, const features::FeatureMatrix& members);
/// Single-value (median) member predictions.
std::vector<double> member_medians(const qgbt::QGbtModel& median_model, const features::FeatureMatrix& members);

/// Per-level mean over members, then rearranged.
core::QuantileSet average_quantiles(std::span<const core::QuantileSet> members);

struct TailPair {
  std::optional<dists::GpdTail> lower;
  std::optional<dists::GpdTail> upper;
};

/// Sorted member values as knots at plotting positions i / (m + 1).
std::pair<std::vector<double>, std::vector<double>> plotting_position_knots(std::span<const double> values);

dists::BoundedCdf run_ens_qgbt_bmm(std::span<const core::QuantileSet> members, const combine::HorizonCoefficients& c);
dists::BoundedCdf run_ens_gbt_none(std::span<const double> member_medians, const TailPair& tails);
dists::BoundedCdf run_ens_qgbt_none(std::span<const core::QuantileSet> members, const TailPair& tails);
dists::BoundedCdf run_hres_qgbt(const core::QuantileSet& quantiles, const TailPair& tails);
dists::BoundedCdf run_ens_gbt_emos(std::span<const double> member_medians, const combine::EmosHorizonCoefficients& c,
                                   std::string* warning = nullptr);

// ---------------------------------------------------------------------------
// Farm-level fitting and forecasting

struct PipelineConfig {
  core::CaseStudy case_study{2021, {2019, 2020}};
  core::HorizonGrid horizons = core::HorizonGrid::standard();
  core::QuantileGrid quantiles = core::QuantileGrid::standard();
  qgbt::QGbtFitOptions ens_w2p{};   ///< shared weather-to-power models
  qgbt::QGbtFitOptions hres_w2p{};  ///< per-horizon deterministic models
  combine::CombinationFitOptions combination{};
  combine::EmosFitOptions emos{};
  dists::GpdFitOptions gpd{};
  std::uint64_t seed = 0;

  /// Standard settings: untuned default hyperparameters inside each search box.
  static PipelineConfig standard();
  void validate() const;
};

struct FarmData {
  std::uint64_t farm_id = 0;  ///< seeds per-farm streams
  dataio::FarmSite site;
  std::vector<core::PowerRecord> power;
  std::vector<dataio::EnsembleForecast> ensemble;
  std::vector<dataio::DeterministicForecast> deterministic;
};

FarmData farm_data(std::uint64_t farm_id, dataio::SyntheticFarmData synthetic);

/// Base times of a farm's forecasts split by base-time year into halves A/B and test.
core::EstimationTestSplit<core::Timestamp> split_base_times(const FarmData& d, const core::CaseStudy& cs);

struct TailTable {
  std::map<int, TailPair> by_horizon;
  const TailPair& at(int horizon) const;
  nlohmann::json to_json() const;
  static TailTable from_json(const nlohmann::json& j);
};

struct FitReport {
  std::map<std::string, std::size_t> gbt_counts;  ///< per method name
  std::vector<std::string> warnings;
  bool fallback = false;  ///< some numerical fallback was used
  std::size_t training_rows_w2p = 0;
  std::size_t combination_pairs = 0;

  nlohmann::json to_json() const;
  static FitReport from_json(const nlohmann::json& j);
};

struct FarmModels {
  std::vector<Method> methods;
  std::optional<qgbt::QGbtModel> w2p_median, w2p_full, w2p_iqr;
  std::map<int, qgbt::QGbtModel> hres, hresc;
  std::optional<combine::CombinationCoefficients> bmm;
  std::optional<combine::EmosCoefficients> emos;
  std::map<Method, TailTable> tails;
  FitReport report;

  /// Writes one file per ensemble weather-to-power level, one per deterministic horizon,
  /// plus coefficient tables, tails and the fit report.
  void save(const std::filesystem::path& dir) const;
  /// Throws MissingArtifactError naming the first missing file.
  static FarmModels load(const std::filesystem::path& dir, std::span<const Method> methods);
};

FarmModels fit_farm(const FarmData& d, const PipelineConfig& cfg, std::span<const Method> methods);

struct ForecastRow {
  Method method;
  core::ForecastIndex index;
  std::vector<double> quantiles;  ///< at PipelineConfig::quantiles
  double omega0 = 0.0;
  double omega1 = 0.0;
  Observations::Status status = Observations::Status::Missing;
  double observation = 0.0;  ///< valid only when status is Available
  double crps = 0.0;         ///< valid only when status is Available
};

/// Uncertainty measures of one ensemble forecast from the {25, 50, 75%} member predictions.
struct UncertaintyRow {
  core::ForecastIndex index;
  double u_nwp = 0.0;
  double u_w2p = 0.0;
};

struct FarmForecast {
  std::vector<ForecastRow> rows;
  std::vector<UncertaintyRow> uncertainty;
  std::vector<std::string> warnings;
};

/// Forecasts every method at every configured horizon for the given base times, scoring each
/// against the observation when one is available.
FarmForecast forecast_farm(const FarmData& d, const FarmModels& models, const PipelineConfig& cfg,
                           std::span<const core::Timestamp> bases);

/// Test-period base times of the case study.
std::vector<core::Timestamp> test_base_times(const FarmData& d, const core::CaseStudy& cs);

}  // namespace windcast::pipelines
