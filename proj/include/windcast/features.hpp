#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "windcast/core.hpp"
#include "windcast/dataio.hpp"

namespace windcast::features {

/// Named real-valued columns over rows keyed by time; values stored row-major.
struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<core::Timestamp> times;
  std::vector<double> values;

  FeatureMatrix() = default;
  explicit FeatureMatrix(std::vector<std::string> column_names);

  std::size_t rows() const noexcept { return times.size(); }
  std::size_t cols() const noexcept { return names.size(); }
  const double* row(std::size_t i) const { return values.data() + i * cols(); }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
  /// Throws SchemaError for an unknown column.
  std::size_t column(std::string_view name) const;

  void append(core::Timestamp t, std::span<const double> row_values);
  FeatureMatrix select(std::span<const std::size_t> row_ids) const;
  /// Names unique, all values finite, times nondecreasing.
  void validate() const;
};

/// atan2(v, u) with calm wind (0, 0) mapped to direction 0.
double wind_direction(double u, double v);

/// Indices of grid points ordered by great-circle distance to `site`, ties broken by (lat, lon).
std::vector<std::size_t> rank_grid_points(const dataio::NwpGrid& grid, const dataio::GridPoint& site);

// ---------------------------------------------------------------------------
// Weather-to-power inputs for ensemble-driven methods

inline constexpr std::size_t kW2pPoints = 4;
inline constexpr std::size_t kW2pDirect = 3;  // u10, v10, t2
inline constexpr std::size_t kW2pWeather = kW2pPoints * kW2pDirect;
inline constexpr std::size_t kW2pColumns = kW2pPoints * 6;

using W2pWeather = std::array<double, kW2pWeather>;  ///< [rank][u10, v10, t2]

/// Column names p{rank}_{u10,v10,t2,w10,d10,w10cube}, rank 1 = nearest point.
const std::vector<std::string>& w2p_feature_names();
void w2p_row(const W2pWeather& weather, std::span<double, kW2pColumns> out);
FeatureMatrix w2p_features(std::span<const core::Timestamp> times, std::span<const W2pWeather> weather);

/// Pulls the direct variables at the four nearest points out of ensemble tensors.
class W2pExtractor {
 public:
  /// Throws SchemaError if the grid has fewer than four points or lacks u10/v10/t2.
  W2pExtractor(const dataio::EnsembleForecast& prototype, const dataio::GridPoint& site);
  W2pWeather member(const dataio::EnsembleForecast& f, std::size_t m) const;
  /// Per point and variable median across members.
  W2pWeather median(const dataio::EnsembleForecast& f) const;

 private:
  void check(const dataio::EnsembleForecast& f) const;
  std::array<std::size_t, kW2pPoints> points_{};
  std::array<std::size_t, kW2pDirect> vars_{};
  std::vector<dataio::GridPoint> ranked_;
};

struct TrainingInputs {
  FeatureMatrix features;
  std::size_t gaps = 0;  ///< expected analysis/+6h valid times with no field
};

/// Continuous training series from ensemble medians: analysis (horizon 0) rows, with +6h rows
/// filling valid times that no analysis covers.
TrainingInputs ensemble_training_inputs(std::span<const dataio::EnsembleForecast> forecasts,
                                        const dataio::GridPoint& site);

// ---------------------------------------------------------------------------
// Spatial/temporal features from deterministic gridded forecasts

struct HresRecipe {
  std::vector<std::string> levels{"10", "100"};  ///< u{level}/v{level} variable pairs
  int step_hours = 1;
  int max_lag_hours = 3;             ///< lags/leads at step, 2 step, ..., max
  bool center_temperature = false;   ///< add t2 at the centre point

  static HresRecipe full();
  static HresRecipe constrained();
  void validate() const;
};

std::vector<std::string> hres_feature_names(const HresRecipe& recipe);

struct HresFeatureSet {
  FeatureMatrix features;
  std::vector<int> horizons;  ///< horizon of each retained row
  std::size_t dropped = 0;    ///< requested horizons lacking lag/lead coverage
};

/// Features of one deterministic run (single base time) at the requested horizons.
HresFeatureSet hres_features(std::span<const dataio::DeterministicForecast> run, const dataio::GridPoint& site,
                             const HresRecipe& recipe, std::span<const int> horizons);

}  // namespace windcast::features
