#include "windcast/core.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace windcast::core {

namespace chr = std::chrono;

Timestamp make_utc(int year, unsigned month, unsigned day, int hour, int minute) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) throw ParameterError("invalid calendar date");
  return chr::sys_days{ymd} + chr::hours{hour} + chr::minutes{minute};
}

std::string format_utc(Timestamp t) {
  const auto days = chr::floor<chr::days>(t);
  const chr::year_month_day ymd{days};
  const chr::hh_mm_ss hms{t - days};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()));
  return buf;
}

Timestamp parse_utc(std::string_view text) {
  // YYYY-MM-DDTHH:MMZ
  auto fail = [&]() -> Timestamp {
    throw ParseError("bad timestamp '" + std::string(text) + "'", 0);
  };
  if (text.size() != 17 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
      text[13] != ':' || text[16] != 'Z')
    return fail();
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (text[i] < '0' || text[i] > '9') fail();
      v = v * 10 + (text[i] - '0');
    }
    return v;
  };
  const int y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2), mi = num(14, 2);
  if (h > 23 || mi > 59) return fail();
  const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(mo)},
                                chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return fail();
  return chr::sys_days{ymd} + chr::hours{h} + chr::minutes{mi};
}

int utc_year(Timestamp t) {
  return static_cast<int>(chr::year_month_day{chr::floor<chr::days>(t)}.year());
}

int utc_hour(Timestamp t) {
  const auto days = chr::floor<chr::days>(t);
  return static_cast<int>(chr::duration_cast<chr::hours>(t - days).count());
}

ForecastIndex make_forecast_index(Timestamp base_time, int horizon_hours) {
  const int hour = utc_hour(base_time);
  if ((hour != 0 && hour != 12) || chr::floor<chr::hours>(base_time) != base_time)
    throw ParameterError("base time must fall on 00 or 12 UTC: " + format_utc(base_time));
  if (horizon_hours < 0) throw ParameterError("negative horizon");
  return {base_time, horizon_hours};
}

HorizonGrid::HorizonGrid(int first, int last, int step) : step_(step) {
  if (step <= 0 || first < 0 || last < first)
    throw ConfigError("horizon grid needs 0 <= first <= last and step > 0");
  for (int h = first; h <= last; h += step) hours_.push_back(h);
}

bool HorizonGrid::contains(int h) const {
  return std::binary_search(hours_.begin(), hours_.end(), h);
}

double normalize_power(const PowerRecord& record, double period_hours) {
  if (!(record.capacity_mw > 0.0) || !std::isfinite(record.capacity_mw))
    throw InvalidRecordError("nonpositive capacity at " + format_utc(record.timestamp));
  if (!std::isfinite(record.energy_mwh))
    throw InvalidRecordError("non-finite energy at " + format_utc(record.timestamp));
  const double p = record.energy_mwh / (record.capacity_mw * period_hours);
  if (p > 1.0 + kNormalizationSlack || p < -kNormalizationSlack) {
    std::ostringstream os;
    os << "normalized power " << p << " outside [0,1] at " << format_utc(record.timestamp);
    throw InconsistentRecordError(os.str());
  }
  return std::clamp(p, 0.0, 1.0);
}

double denormalize_power(double normalized, double capacity_mw, double period_hours) {
  return normalized * capacity_mw * period_hours;
}

std::vector<PowerRecord> filter_curtailed(std::span<const PowerRecord> records) {
  std::vector<PowerRecord> out;
  out.reserve(records.size());
  for (const auto& r : records)
    if (!r.curtailed()) out.push_back(r);
  return out;
}

CaseStudy CaseStudy::preceding(int test_year, int n_years) {
  if (n_years < 1) throw ConfigError("estimation window needs at least one year");
  CaseStudy cs;
  cs.test_year = test_year;
  for (int y = test_year - n_years; y < test_year; ++y) cs.estimation_years.push_back(y);
  return cs;
}

std::string CaseStudy::name() const {
  return std::to_string(test_year) + "-" + std::to_string(estimation_years.size()) + "y";
}

void CaseStudy::validate() const {
  if (estimation_years.empty()) throw ConfigError("empty estimation window");
  for (int y : estimation_years) {
    if (y >= test_year)
      throw ConfigError("estimation year " + std::to_string(y) +
                        " does not precede test year " + std::to_string(test_year));
  }
}

EstimationTestSplit<PowerRecord> split_estimation_test(std::span<const PowerRecord> records,
                                                       int test_year,
                                                       const std::vector<int>& estimation_years) {
  CaseStudy cs{test_year, estimation_years};
  return split_by_case_study(filter_curtailed(records), cs,
                             [](const PowerRecord& r) { return r.timestamp; });
}

QuantileGrid::QuantileGrid(std::vector<double> levels) {
  if (levels.empty()) throw ParameterError("empty quantile grid");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0))
      throw ParameterError("quantile level outside (0,1)");
    if (i > 0 && !(levels[i] > levels[i - 1]))
      throw ParameterError("quantile levels must be strictly increasing");
  }
  levels_ = std::make_shared<const std::vector<double>>(std::move(levels));
}

QuantileGrid QuantileGrid::standard() {
  std::vector<double> v;
  for (int i = 1; i <= 19; ++i) v.push_back(i * 0.05);
  return QuantileGrid(std::move(v));
}

QuantileGrid QuantileGrid::iqr() { return QuantileGrid({0.25, 0.5, 0.75}); }

QuantileGrid QuantileGrid::median() { return QuantileGrid({0.5}); }

std::size_t QuantileGrid::index_of(double tau) const {
  for (std::size_t i = 0; i < levels_->size(); ++i)
    if (std::abs((*levels_)[i] - tau) < 1e-9) return i;
  throw ParameterError("quantile level " + std::to_string(tau) + " not in grid");
}

bool QuantileGrid::contains(double tau) const {
  for (double l : *levels_)
    if (std::abs(l - tau) < 1e-9) return true;
  return false;
}

QuantileSet::QuantileSet(QuantileGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw ContractViolation("quantile count does not match grid");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) throw ContractViolation("non-finite quantile value");
    if (i > 0 && values_[i] < values_[i - 1])
      throw ContractViolation("quantile values are not nondecreasing");
  }
}

double quantile_type7_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ParameterError("quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("probability outside [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile_type7(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_type7_sorted(values, p);
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = splitmix(seed);
  for (auto id : ids) h = splitmix(h ^ splitmix(id + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace windcast::core
