#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "windcast/core.hpp"

namespace windcast::dataio {

struct GridPoint {
  double lat = 0.0;
  double lon = 0.0;
  auto operator<=>(const GridPoint&) const = default;
};

/// Great-circle distance in kilometres.
double great_circle_km(const GridPoint& a, const GridPoint& b);

/// Ordered set of NWP grid points (row-major by latitude, then longitude).
struct NwpGrid {
  std::vector<GridPoint> points;
  double resolution_deg = 0.0;

  NwpGrid() = default;
  NwpGrid(std::vector<GridPoint> pts, double resolution);
  std::size_t size() const noexcept { return points.size(); }
  std::optional<std::size_t> index_of(const GridPoint& p) const;
};

/// Gridded multi-member forecast for one (base time, horizon).
/// Values are stored member-major: [member][point][variable].
struct EnsembleForecast {
  core::ForecastIndex index;
  std::shared_ptr<const NwpGrid> grid;
  std::shared_ptr<const std::vector<std::string>> variables;
  std::size_t members = 0;
  std::vector<double> values;

  std::size_t n_points() const { return grid->size(); }
  std::size_t n_vars() const { return variables->size(); }
  std::size_t offset(std::size_t m, std::size_t p, std::size_t v) const {
    return (m * n_points() + p) * n_vars() + v;
  }
  double at(std::size_t m, std::size_t p, std::size_t v) const { return values[offset(m, p, v)]; }
  std::size_t var_index(std::string_view name) const;
  /// Same forecast with members reordered: member i of the result is member perm[i] of this.
  EnsembleForecast permuted(std::span<const std::size_t> perm) const;
  void validate() const;
};

/// Single-scenario gridded forecast; values stored [point][variable].
struct DeterministicForecast {
  core::ForecastIndex index;
  std::shared_ptr<const NwpGrid> grid;
  std::shared_ptr<const std::vector<std::string>> variables;
  std::vector<double> values;

  std::size_t n_points() const { return grid->size(); }
  std::size_t n_vars() const { return variables->size(); }
  double at(std::size_t p, std::size_t v) const { return values[p * n_vars() + v]; }
  std::size_t var_index(std::string_view name) const;
  void validate() const;
};

using NwpFile = std::variant<std::vector<EnsembleForecast>, std::vector<DeterministicForecast>>;

// ---------------------------------------------------------------------------
// CSV

/// Writes `contents` to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

inline constexpr const char* kPowerHeader = "timestamp,energy_mwh,bav_mwh,capacity_mw";
inline constexpr const char* kNwpHeader = "base_time,horizon_h,member,lat,lon,variable,value";

std::string power_csv(std::span<const core::PowerRecord> records);
std::vector<core::PowerRecord> parse_power_csv(std::string_view text);
void write_power_csv(const std::filesystem::path& path, std::span<const core::PowerRecord> records);
std::vector<core::PowerRecord> read_power_csv(const std::filesystem::path& path);

std::string nwp_csv(std::span<const EnsembleForecast> forecasts);
std::string nwp_csv(std::span<const DeterministicForecast> forecasts);
NwpFile parse_nwp_csv(std::string_view text);
void write_nwp_csv(const std::filesystem::path& path, std::span<const EnsembleForecast> forecasts);
void write_nwp_csv(const std::filesystem::path& path, std::span<const DeterministicForecast> forecasts);
NwpFile read_nwp_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic world

/// Normalized logistic power curve between cut-in and rated speed, zero beyond cut-out.
struct PowerCurve {
  double cut_in = 3.0;
  double rated = 12.0;
  double cut_out = 25.0;
  double operator()(double hub_speed) const;
};

struct SyntheticWorldConfig {
  std::uint64_t seed = 0;
  int n_farms = 2;
  int first_year = 2019;
  int n_years = 3;
  int days_per_year = 365;  ///< days simulated from 1 January of each year
  std::vector<int> base_hours{0};
  int n_members = 10;
  int max_horizon = 168;
  int ens_step_hours = 6;
  int det_step_hours = 1;  ///< deterministic forecast time step (1 = hourly)

  double ens_resolution_deg = 0.2;
  double det_resolution_deg = 0.1;
  int det_domain = 5;  ///< deterministic domain is det_domain x det_domain points

  int n_fourier = 32;
  double length_scale_deg = 1.5;
  double weather_autocorrelation = 0.97;  ///< hourly AR(1) coefficient of the latent weather

  double spread_initial = 0.12;       ///< latent forecast error stddev at horizon 0
  double dispersion_growth = 0.004;   ///< added stddev per hour of lead time
  double regime_sigma = 0.35;         ///< log-stddev of the per-issue spread multiplier
  double regime_autocorrelation = 0.7;
  double error_autocorrelation = 0.995;  ///< hourly AR(1) coefficient of forecast errors
  double member_bias = 0.0;              ///< constant latent offset added to all members

  double u_mean = 2.0, u_std = 4.5;
  double v_mean = 1.0, v_std = 4.5;
  double t_mean = 283.0, t_std = 5.0;
  double hub_factor = 1.25;  ///< hub-height wind = factor x 10 m wind

  PowerCurve curve{};
  double curve_jitter = 1.0;  ///< per-farm uniform jitter of rated speed (m/s)
  double noise_scale = 0.08;
  double noise_floor = 0.15;
  double curtailment_rate = 0.02;

  void validate() const;
};

struct FarmSite {
  std::string name;
  GridPoint location;
  double capacity_mw = 0.0;
  PowerCurve curve;
  std::shared_ptr<const NwpGrid> ens_grid;  ///< 4 nearest ENS points
  std::shared_ptr<const NwpGrid> det_grid;  ///< det_domain^2 points centred on the farm
};

/// Hourly weather at the farm location.
struct TrueWeather {
  core::Timestamp start;
  std::vector<double> u10, v10, t2;
  double hub_speed(std::size_t hour, double hub_factor) const;
};

struct SyntheticFarmData {
  FarmSite site;
  TrueWeather truth;
  std::vector<core::PowerRecord> power;
  std::vector<EnsembleForecast> ensemble;         ///< horizons 0, ens_step, ..., max_horizon
  std::vector<DeterministicForecast> deterministic;  ///< horizons 0..max_horizon + 6 by det_step
  std::vector<double> issue_spread;  ///< spread multiplier per base time (diagnostic)
};

/// Deterministic synthetic weather / forecast / power generator. All random streams are
/// derived from (seed, purpose, indices), so any farm can be generated in isolation.
class SyntheticWorld {
 public:
  explicit SyntheticWorld(SyntheticWorldConfig config);

  const SyntheticWorldConfig& config() const noexcept { return cfg_; }
  const std::vector<FarmSite>& farms() const noexcept { return farms_; }
  std::vector<core::Timestamp> base_times() const;
  core::Timestamp start() const;
  std::size_t n_hours() const;

  SyntheticFarmData generate_farm(std::size_t farm) const;

  /// Latent standardized field value (0 = u, 1 = v, 2 = t) at a point and hour.
  double latent_truth(int variable, const GridPoint& p, std::size_t hour) const;

 private:
  struct Features {
    std::vector<double> wx, wy, phase;
  };
  std::vector<double> basis(const GridPoint& p) const;
  std::vector<double> issue_regimes() const;

  SyntheticWorldConfig cfg_;
  Features features_;
  std::vector<FarmSite> farms_;
  std::vector<std::vector<double>> truth_coef_;  // [variable][hour * K + k]
};

std::vector<SyntheticFarmData> generate_synthetic(const SyntheticWorldConfig& config);

using core::derive_seed;

}  // namespace windcast::dataio
