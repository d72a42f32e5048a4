#include "windcast/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <system_error>

namespace windcast::dataio {

namespace fs = std::filesystem;

double great_circle_km(const GridPoint& a, const GridPoint& b) {
  constexpr double kDeg = 3.14159265358979323846 / 180.0;
  const double dlat = (b.lat - a.lat) * kDeg, dlon = (b.lon - a.lon) * kDeg;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * 6371.0 * std::asin(std::min(1.0, std::sqrt(h)));
}

NwpGrid::NwpGrid(std::vector<GridPoint> pts, double resolution)
    : points(std::move(pts)), resolution_deg(resolution) {
  std::sort(points.begin(), points.end());
  if (std::adjacent_find(points.begin(), points.end()) != points.end())
    throw SchemaError("duplicate grid point");
}

std::optional<std::size_t> NwpGrid::index_of(const GridPoint& p) const {
  const auto it = std::lower_bound(points.begin(), points.end(), p);
  if (it == points.end() || *it != p) return std::nullopt;
  return static_cast<std::size_t>(it - points.begin());
}

namespace {

std::size_t find_var(const std::vector<std::string>& vars, std::string_view name) {
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i] == name) return i;
  throw SchemaError("variable '" + std::string(name) + "' not present");
}

}  // namespace

std::size_t EnsembleForecast::var_index(std::string_view name) const { return find_var(*variables, name); }
std::size_t DeterministicForecast::var_index(std::string_view name) const {
  return find_var(*variables, name);
}

EnsembleForecast EnsembleForecast::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != members) throw ParameterError("permutation size does not match members");
  EnsembleForecast out = *this;
  const std::size_t block = n_points() * n_vars();
  for (std::size_t m = 0; m < members; ++m)
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(perm[m] * block), block,
                out.values.begin() + static_cast<std::ptrdiff_t>(m * block));
  return out;
}

void EnsembleForecast::validate() const {
  if (!grid || !variables) throw SchemaError("ensemble forecast without grid or variables");
  if (members < 1) throw SchemaError("ensemble forecast without members");
  if (values.size() != members * n_points() * n_vars())
    throw SchemaError("ensemble tensor size mismatch");
}

void DeterministicForecast::validate() const {
  if (!grid || !variables) throw SchemaError("deterministic forecast without grid or variables");
  if (values.size() != n_points() * n_vars()) throw SchemaError("deterministic tensor size mismatch");
}

// ---------------------------------------------------------------------------

void atomic_write(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

struct LineReader {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line = 0;

  bool next(std::string_view& out) {
    if (pos >= text.size()) return false;
    const std::size_t end = text.find('\n', pos);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    out = text.substr(pos, stop - pos);
    if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line;
    return true;
  }
};

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t c = s.find(',', start);
    out.push_back(s.substr(start, c == std::string_view::npos ? std::string_view::npos : c - start));
    if (c == std::string_view::npos) break;
    start = c + 1;
  }
  return out;
}

double parse_double(std::string_view s, std::size_t line, const char* what) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError(std::string("bad ") + what + " '" + std::string(s) + "'", line);
  return v;
}

long parse_int(std::string_view s, std::size_t line, const char* what) {
  long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError(std::string("bad ") + what + " '" + std::string(s) + "'", line);
  return v;
}

core::Timestamp parse_time(std::string_view s, std::size_t line) {
  try {
    return core::parse_utc(s);
  } catch (const ParseError&) {
    throw ParseError("bad timestamp '" + std::string(s) + "'", line);
  }
}

void expect_header(LineReader& r, const char* header) {
  std::string_view line;
  if (!r.next(line)) throw ParseError("missing header", 1);
  if (line != header) throw ParseError("unexpected header '" + std::string(line) + "'", 1);
}

}  // namespace

std::string power_csv(std::span<const core::PowerRecord> records) {
  std::string out = std::string(kPowerHeader) + "\n";
  for (const auto& r : records) {
    out += core::format_utc(r.timestamp);
    out += ',' + format_double(r.energy_mwh) + ',' + format_double(r.bav_mwh) + ',' +
           format_double(r.capacity_mw) + '\n';
  }
  return out;
}

std::vector<core::PowerRecord> parse_power_csv(std::string_view text) {
  LineReader r{text};
  expect_header(r, kPowerHeader);
  std::vector<core::PowerRecord> out;
  std::string_view line;
  while (r.next(line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 4)
      throw ParseError("expected 4 fields, got " + std::to_string(f.size()), r.line);
    core::PowerRecord rec;
    rec.timestamp = parse_time(f[0], r.line);
    rec.energy_mwh = parse_double(f[1], r.line, "energy");
    rec.bav_mwh = parse_double(f[2], r.line, "bav");
    rec.capacity_mw = parse_double(f[3], r.line, "capacity");
    if (!out.empty() && rec.timestamp <= out.back().timestamp) {
      throw FormatError((rec.timestamp == out.back().timestamp ? "duplicate timestamp "
                                                               : "timestamps out of order at ") +
                        core::format_utc(rec.timestamp) + " (line " + std::to_string(r.line) + ")");
    }
    out.push_back(rec);
  }
  return out;
}

void write_power_csv(const fs::path& path, std::span<const core::PowerRecord> records) {
  atomic_write(path, power_csv(records));
}

std::vector<core::PowerRecord> read_power_csv(const fs::path& path) {
  return parse_power_csv(read_text(path));
}

namespace {

void append_row(std::string& out, const std::string& base, int h, std::size_t member,
                const GridPoint& p, const std::string& var, double value) {
  out += base;
  out += ',' + std::to_string(h) + ',' + std::to_string(member) + ',' + format_double(p.lat) + ',' +
         format_double(p.lon) + ',' + var + ',' + format_double(value) + '\n';
}

}  // namespace

std::string nwp_csv(std::span<const EnsembleForecast> forecasts) {
  std::string out = std::string(kNwpHeader) + "\n";
  for (const auto& f : forecasts) {
    const std::string base = core::format_utc(f.index.base_time);
    for (std::size_t m = 0; m < f.members; ++m)
      for (std::size_t p = 0; p < f.n_points(); ++p)
        for (std::size_t v = 0; v < f.n_vars(); ++v)
          append_row(out, base, f.index.horizon_hours, m, f.grid->points[p], (*f.variables)[v],
                     f.at(m, p, v));
  }
  return out;
}

std::string nwp_csv(std::span<const DeterministicForecast> forecasts) {
  std::string out = std::string(kNwpHeader) + "\n";
  for (const auto& f : forecasts) {
    const std::string base = core::format_utc(f.index.base_time);
    for (std::size_t p = 0; p < f.n_points(); ++p)
      for (std::size_t v = 0; v < f.n_vars(); ++v)
        append_row(out, base, f.index.horizon_hours, 0, f.grid->points[p], (*f.variables)[v], f.at(p, v));
  }
  return out;
}

NwpFile parse_nwp_csv(std::string_view text) {
  struct Row {
    core::ForecastIndex idx;
    long member;
    GridPoint point;
    std::string var;
    double value;
    std::size_t line;
  };
  LineReader r{text};
  expect_header(r, kNwpHeader);
  std::vector<Row> rows;
  std::string_view line;
  while (r.next(line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 7) throw ParseError("expected 7 fields, got " + std::to_string(f.size()), r.line);
    Row row;
    const auto base = parse_time(f[0], r.line);
    const long h = parse_int(f[1], r.line, "horizon");
    try {
      row.idx = core::make_forecast_index(base, static_cast<int>(h));
    } catch (const ParameterError& e) {
      throw ParseError(e.what(), r.line);
    }
    row.member = parse_int(f[2], r.line, "member");
    row.point = {parse_double(f[3], r.line, "latitude"), parse_double(f[4], r.line, "longitude")};
    if (f[5].empty()) throw ParseError("empty variable name", r.line);
    row.var = std::string(f[5]);
    row.value = parse_double(f[6], r.line, "value");
    row.line = r.line;
    rows.push_back(std::move(row));
  }

  std::set<long> member_set;
  std::set<GridPoint> point_set;
  std::vector<std::string> vars;
  std::map<core::ForecastIndex, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    member_set.insert(rows[i].member);
    point_set.insert(rows[i].point);
    if (std::find(vars.begin(), vars.end(), rows[i].var) == vars.end()) vars.push_back(rows[i].var);
    groups[rows[i].idx].push_back(i);
  }
  const std::vector<long> members(member_set.begin(), member_set.end());
  auto grid = std::make_shared<const NwpGrid>(std::vector<GridPoint>(point_set.begin(), point_set.end()), 0.0);
  auto var_ptr = std::make_shared<const std::vector<std::string>>(vars);
  const std::size_t nm = members.size(), np = grid->size(), nv = vars.size();

  std::vector<std::pair<core::ForecastIndex, std::vector<double>>> tensors;
  for (const auto& [idx, ids] : groups) {
    std::vector<double> values(nm * np * nv, 0.0);
    std::vector<char> seen(values.size(), 0);
    for (std::size_t i : ids) {
      const auto& row = rows[i];
      const auto m = static_cast<std::size_t>(std::lower_bound(members.begin(), members.end(), row.member) - members.begin());
      const std::size_t p = *grid->index_of(row.point);
      const std::size_t v = find_var(vars, row.var);
      const std::size_t k = (m * np + p) * nv + v;
      if (seen[k]) throw FormatError("duplicate value at line " + std::to_string(row.line));
      seen[k] = 1;
      values[k] = row.value;
    }
    for (std::size_t k = 0; k < seen.size(); ++k) {
      if (seen[k]) continue;
      const std::size_t v = k % nv, p = (k / nv) % np, m = k / (nv * np);
      std::ostringstream os;
      os << "missing value for base " << core::format_utc(idx.base_time) << " horizon "
         << idx.horizon_hours << ": member " << members[m] << ", point (" << grid->points[p].lat
         << ", " << grid->points[p].lon << "), variable " << vars[v];
      throw FormatError(os.str());
    }
    tensors.emplace_back(idx, std::move(values));
  }

  if (nm <= 1) {
    std::vector<DeterministicForecast> out;
    for (auto& [idx, values] : tensors) out.push_back({idx, grid, var_ptr, std::move(values)});
    return out;
  }
  std::vector<EnsembleForecast> out;
  for (auto& [idx, values] : tensors) out.push_back({idx, grid, var_ptr, nm, std::move(values)});
  return out;
}

void write_nwp_csv(const fs::path& path, std::span<const EnsembleForecast> forecasts) {
  atomic_write(path, nwp_csv(forecasts));
}

void write_nwp_csv(const fs::path& path, std::span<const DeterministicForecast> forecasts) {
  atomic_write(path, nwp_csv(forecasts));
}

NwpFile read_nwp_csv(const fs::path& path) { return parse_nwp_csv(read_text(path)); }

}  // namespace windcast::dataio
