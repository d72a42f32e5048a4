#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace windcast {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidRecordError : public Error { using Error::Error; };
class InconsistentRecordError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
class ParameterError : public Error { using Error::Error; };
class ContractViolation : public Error { using Error::Error; };
class FitError : public Error { using Error::Error; };
class PipelineError : public Error { using Error::Error; };
class MissingArtifactError : public Error { using Error::Error; };
class UndefinedSkillError : public Error { using Error::Error; };

/// Malformed input text; carries the 1-based line number of the offending row.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace windcast

namespace windcast::core {

using Timestamp = std::chrono::sys_seconds;
using Hours = std::chrono::hours;

Timestamp make_utc(int year, unsigned month, unsigned day, int hour = 0, int minute = 0);

/// Formats as `YYYY-MM-DDTHH:MMZ`.
std::string format_utc(Timestamp t);

/// Inverse of format_utc. Throws ParseError (line 0) on malformed text.
Timestamp parse_utc(std::string_view text);

int utc_year(Timestamp t);
int utc_hour(Timestamp t);

/// Issue time plus lead time of one NWP run. Horizon 0 denotes the analysis.
struct ForecastIndex {
  Timestamp base_time{};
  int horizon_hours = 0;

  Timestamp valid_time() const { return base_time + Hours{horizon_hours}; }
  auto operator<=>(const ForecastIndex&) const = default;
};

/// Validating constructor: base hour must be 00 or 12 UTC and horizon nonnegative.
ForecastIndex make_forecast_index(Timestamp base_time, int horizon_hours);

/// Evenly spaced lead times, e.g. 6..162 by 6.
class HorizonGrid {
 public:
  HorizonGrid(int first, int last, int step);

  /// 6..162 step 6: the 27-horizon layout.
  static HorizonGrid standard() { return {6, 162, 6}; }
  /// 6..168 step 6: all 28 available ENS steps.
  static HorizonGrid extended() { return {6, 168, 6}; }

  const std::vector<int>& hours() const noexcept { return hours_; }
  std::size_t size() const noexcept { return hours_.size(); }
  bool contains(int h) const;
  int first() const { return hours_.front(); }
  int last() const { return hours_.back(); }
  int step() const noexcept { return step_; }

 private:
  int step_;
  std::vector<int> hours_;
};

/// Forecast day used when aggregating scores: horizons 6..18 are day 0, 24..42 day 1, ...
inline int horizon_day(int horizon_hours) { return horizon_hours / 24; }

inline constexpr double kSettlementPeriodHours = 0.5;
inline constexpr double kNormalizationSlack = 1e-9;

struct PowerRecord {
  Timestamp timestamp{};
  double energy_mwh = 0.0;
  double bav_mwh = 0.0;
  double capacity_mw = 0.0;

  bool curtailed() const noexcept { return bav_mwh != 0.0; }
  bool operator==(const PowerRecord&) const = default;
};

/// Energy over one settlement period divided by the energy at full available capacity.
double normalize_power(const PowerRecord& record, double period_hours = kSettlementPeriodHours);
double denormalize_power(double normalized, double capacity_mw,
                         double period_hours = kSettlementPeriodHours);

std::vector<PowerRecord> filter_curtailed(std::span<const PowerRecord> records);

/// Case-study layout named like "2021-2y": test year plus the preceding estimation years.
struct CaseStudy {
  int test_year = 0;
  std::vector<int> estimation_years;

  /// Test year with the `n` immediately preceding years as estimation window.
  static CaseStudy preceding(int test_year, int n_years);
  std::string name() const;
  void validate() const;
};


template <class T>
struct EstimationTestSplit {
  std::vector<T> half_a;  ///< weather-to-power fitting and tuning
  std::vector<T> half_b;  ///< combination / calibration coefficients
  std::vector<T> test;

  std::size_t estimation_size() const { return half_a.size() + half_b.size(); }
};

/// Chronological split. Items are sorted by `time_of`; the estimation samples are
/// halved at the midpoint sample (first half to A). Items outside both windows are
/// dropped.
template <class T, class TimeOf>
EstimationTestSplit<T> split_by_case_study(std::vector<T> items, const CaseStudy& cs,
                                           TimeOf time_of) {
  cs.validate();
  std::stable_sort(items.begin(), items.end(),
                   [&](const T& a, const T& b) { return time_of(a) < time_of(b); });
  EstimationTestSplit<T> out;
  std::vector<T> estimation;
  for (auto& item : items) {
    const int year = utc_year(time_of(item));
    if (year == cs.test_year) {
      out.test.push_back(std::move(item));
    } else if (std::find(cs.estimation_years.begin(), cs.estimation_years.end(), year) !=
               cs.estimation_years.end()) {
      estimation.push_back(std::move(item));
    }
  }
  const std::size_t mid = estimation.size() / 2;
  out.half_a.assign(std::make_move_iterator(estimation.begin()),
                    std::make_move_iterator(estimation.begin() + static_cast<std::ptrdiff_t>(mid)));
  out.half_b.assign(std::make_move_iterator(estimation.begin() + static_cast<std::ptrdiff_t>(mid)),
                    std::make_move_iterator(estimation.end()));
  return out;
}

/// Curtailment-filtered chronological split of power records.
EstimationTestSplit<PowerRecord> split_estimation_test(std::span<const PowerRecord> records,
                                                       int test_year,
                                                       const std::vector<int>& estimation_years);

/// Ordered set of probability levels in (0, 1).
class QuantileGrid {
 public:
  explicit QuantileGrid(std::vector<double> levels);

  /// 5%..95% by 5% (19 levels).
  static QuantileGrid standard();
  /// {25%, 50%, 75%}, the kernel-dressing grid.
  static QuantileGrid iqr();
  static QuantileGrid median();

  std::span<const double> levels() const noexcept { return *levels_; }
  std::size_t size() const noexcept { return levels_->size(); }
  double operator[](std::size_t i) const { return (*levels_)[i]; }
  double front() const { return levels_->front(); }
  double back() const { return levels_->back(); }

  /// Index of level `tau` (matched to 1e-9); throws ParameterError if absent.
  std::size_t index_of(double tau) const;
  bool contains(double tau) const;

  bool operator==(const QuantileGrid& other) const { return *levels_ == *other.levels_; }

 private:
  std::shared_ptr<const std::vector<double>> levels_;
};

/// Quantile values on a grid; nondecreasing and finite by construction.
class QuantileSet {
 public:
  QuantileSet(QuantileGrid grid, std::vector<double> values);

  const QuantileGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double at(double tau) const { return values_[grid_.index_of(tau)]; }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  QuantileGrid grid_;
  std::vector<double> values_;
};

struct UncertaintyProfile {
  int horizon_hours = 0;
  double u_nwp = 0.0;
  double u_w2p = 0.0;
};

/// 64-bit stream key derived from a seed and a list of identifiers (SplitMix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids);

/// Type-7 empirical quantile (linear interpolation between order statistics) of sorted data.
double quantile_type7_sorted(std::span<const double> sorted, double p);
double quantile_type7(std::vector<double> values, double p);

}  // namespace windcast::core
