#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "windcast/dataio.hpp"

namespace windcast::dataio {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

enum Tag : std::uint64_t {
  kTagBasis = 1,
  kTagTruth,
  kTagFarms,
  kTagRegime,
  kTagIssueError,
  kTagMember,
  kTagControl,
  kTagPower,
  kTagCurtail,
};

std::mt19937_64 stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  return std::mt19937_64(derive_seed(seed, ids));
}

// Stationary AR(1) path of unit variance: x[0] ~ N(0,1), x[t] = phi x[t-1] + sqrt(1-phi^2) e.
void ar_path(std::mt19937_64& rng, double phi, std::size_t n, std::size_t stride, double* out) {
  std::normal_distribution<double> z;
  const double innov = std::sqrt(std::max(0.0, 1.0 - phi * phi));
  double x = z(rng);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) x = phi * x + innov * z(rng);
    out[t * stride] = x;
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

const std::vector<std::string> kEnsVars{"u10", "v10", "t2"};
const std::vector<std::string> kDetVars{"u10", "v10", "u100", "v100", "t2"};

}  // namespace

double PowerCurve::operator()(double w) const {
  if (!(w > cut_in) || w >= cut_out) return 0.0;
  if (w >= rated) return 1.0;
  const double mid = 0.5 * (cut_in + rated), k = 8.0 / (rated - cut_in);
  auto logistic = [&](double x) { return 1.0 / (1.0 + std::exp(-k * (x - mid))); };
  const double lo = logistic(cut_in), hi = logistic(rated);
  return std::clamp((logistic(w) - lo) / (hi - lo), 0.0, 1.0);
}

double TrueWeather::hub_speed(std::size_t hour, double hub_factor) const {
  return hub_factor * std::hypot(u10[hour], v10[hour]);
}

void SyntheticWorldConfig::validate() const {
  auto bad = [](const std::string& m) { throw ConfigError("synthetic world: " + m); };
  if (n_farms < 1) bad("n_farms must be >= 1");
  if (n_years < 1) bad("n_years must be >= 1");
  if (days_per_year < 1 || days_per_year > 365) bad("days_per_year must be in [1, 365]");
  if (base_hours.empty()) bad("no base hours");
  for (int h : base_hours)
    if (h != 0 && h != 12) bad("base hours must be 0 or 12");
  if (n_members < 2) bad("ensembles need at least 2 members");
  if (ens_step_hours <= 0 || max_horizon < ens_step_hours || max_horizon % ens_step_hours)
    bad("max_horizon must be a positive multiple of ens_step_hours");
  if (det_step_hours <= 0 || 6 % det_step_hours) bad("det_step_hours must divide 6");
  if (det_domain < 1 || det_domain % 2 == 0) bad("det_domain must be odd");
  if (n_fourier < 1 || !(length_scale_deg > 0)) bad("invalid latent field settings");
  for (double r : {weather_autocorrelation, regime_autocorrelation, error_autocorrelation})
    if (!(r >= 0.0 && r < 1.0)) bad("autocorrelations must lie in [0, 1)");
  for (double r : {spread_initial, dispersion_growth, regime_sigma, noise_scale, noise_floor,
                   curve_jitter, u_std, v_std, t_std})
    if (!(r >= 0.0)) bad("rates and scales must be >= 0");
  if (!(curtailment_rate >= 0.0 && curtailment_rate <= 1.0)) bad("curtailment_rate must be in [0,1]");
  if (!(hub_factor > 0.0)) bad("hub_factor must be positive");
  if (!(curve.cut_in < curve.rated && curve.rated < curve.cut_out) || curve_jitter >= curve.rated - curve.cut_in)
    bad("power curve needs cut_in < rated < cut_out");
}

SyntheticWorld::SyntheticWorld(SyntheticWorldConfig config) : cfg_(std::move(config)) {
  cfg_.validate();
  const auto K = static_cast<std::size_t>(cfg_.n_fourier);

  auto rb = stream(cfg_.seed, {kTagBasis});
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t k = 0; k < K; ++k) {
    features_.wx.push_back(z(rb) / cfg_.length_scale_deg);
    features_.wy.push_back(z(rb) / cfg_.length_scale_deg);
    features_.phase.push_back(kTwoPi * u01(rb));
  }

  const std::size_t n = n_hours();
  truth_coef_.assign(3, std::vector<double>(n * K));
  for (int var = 0; var < 3; ++var)
    for (std::size_t k = 0; k < K; ++k) {
      auto r = stream(cfg_.seed, {kTagTruth, static_cast<std::uint64_t>(var), k});
      ar_path(r, cfg_.weather_autocorrelation, n, K, truth_coef_[var].data() + k);
    }

  auto rf = stream(cfg_.seed, {kTagFarms});
  for (int f = 0; f < cfg_.n_farms; ++f) {
    FarmSite site;
    char name[16];
    std::snprintf(name, sizeof name, "farm%02d", f + 1);
    site.name = name;
    site.location = {52.0 + 5.0 * u01(rf), -4.0 + 4.0 * u01(rf)};
    site.capacity_mw = std::round(200.0 + 1000.0 * u01(rf)) / 10.0;
    site.curve = cfg_.curve;
    site.curve.rated += cfg_.curve_jitter * (2.0 * u01(rf) - 1.0);

    const double re = cfg_.ens_resolution_deg;
    const double i0 = std::floor(site.location.lat / re), j0 = std::floor(site.location.lon / re);
    std::vector<GridPoint> ens;
    for (int di = 0; di < 2; ++di)
      for (int dj = 0; dj < 2; ++dj) ens.push_back({(i0 + di) * re, (j0 + dj) * re});
    site.ens_grid = std::make_shared<const NwpGrid>(std::move(ens), re);

    const double rd = cfg_.det_resolution_deg;
    const double ci = std::round(site.location.lat / rd), cj = std::round(site.location.lon / rd);
    const int half = cfg_.det_domain / 2;
    std::vector<GridPoint> det;
    for (int di = -half; di <= half; ++di)
      for (int dj = -half; dj <= half; ++dj) det.push_back({(ci + di) * rd, (cj + dj) * rd});
    site.det_grid = std::make_shared<const NwpGrid>(std::move(det), rd);
    farms_.push_back(std::move(site));
  }
}

core::Timestamp SyntheticWorld::start() const { return core::make_utc(cfg_.first_year, 1, 1); }

std::size_t SyntheticWorld::n_hours() const {
  const auto end = core::make_utc(cfg_.first_year + cfg_.n_years, 1, 1);
  const auto span = std::chrono::duration_cast<core::Hours>(end - start()).count();
  return static_cast<std::size_t>(span + cfg_.max_horizon + 12);
}

std::vector<core::Timestamp> SyntheticWorld::base_times() const {
  std::vector<core::Timestamp> out;
  std::vector<int> hours = cfg_.base_hours;
  std::sort(hours.begin(), hours.end());
  hours.erase(std::unique(hours.begin(), hours.end()), hours.end());
  for (int y = cfg_.first_year; y < cfg_.first_year + cfg_.n_years; ++y) {
    const auto jan1 = core::make_utc(y, 1, 1);
    for (int d = 0; d < cfg_.days_per_year; ++d)
      for (int h : hours) out.push_back(jan1 + core::Hours{24 * d + h});
  }
  return out;
}

std::vector<double> SyntheticWorld::basis(const GridPoint& p) const {
  const std::size_t K = features_.wx.size();
  const double x = p.lon * std::cos(55.0 * 3.14159265358979323846 / 180.0), y = p.lat;
  std::vector<double> b(K);
  double norm = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    b[k] = std::cos(features_.wx[k] * x + features_.wy[k] * y + features_.phase[k]);
    norm += b[k] * b[k];
  }
  norm = std::sqrt(std::max(norm, 1e-12));
  for (auto& v : b) v /= norm;
  return b;
}

double SyntheticWorld::latent_truth(int variable, const GridPoint& p, std::size_t hour) const {
  const auto b = basis(p);
  return dot(b.data(), truth_coef_.at(variable).data() + hour * b.size(), b.size());
}

std::vector<double> SyntheticWorld::issue_regimes() const {
  const auto bases = base_times();
  std::vector<double> r(bases.size());
  auto rng = stream(cfg_.seed, {kTagRegime});
  ar_path(rng, cfg_.regime_autocorrelation, r.size(), 1, r.data());
  const double s = cfg_.regime_sigma;
  for (auto& v : r) v = std::exp(s * v - 0.5 * s * s);
  return r;
}

SyntheticFarmData SyntheticWorld::generate_farm(std::size_t farm) const {
  const FarmSite& site = farms_.at(farm);
  const std::size_t K = features_.wx.size();
  const std::size_t n = n_hours();
  const auto t0 = start();

  SyntheticFarmData out;
  out.site = site;

  // Truth at the farm location and the latent truth at every NWP point.
  const auto farm_basis = basis(site.location);
  out.truth.start = t0;
  for (auto* v : {&out.truth.u10, &out.truth.v10, &out.truth.t2}) v->resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    out.truth.u10[t] = cfg_.u_mean + cfg_.u_std * dot(farm_basis.data(), truth_coef_[0].data() + t * K, K);
    out.truth.v10[t] = cfg_.v_mean + cfg_.v_std * dot(farm_basis.data(), truth_coef_[1].data() + t * K, K);
    out.truth.t2[t] = cfg_.t_mean + cfg_.t_std * dot(farm_basis.data(), truth_coef_[2].data() + t * K, K);
  }

  struct PointSet {
    std::vector<std::vector<double>> basis;     // [point][k]
    std::vector<std::vector<double>> latent;    // [var][hour * P + point]
  };
  auto prepare = [&](const NwpGrid& g) {
    PointSet ps;
    for (const auto& p : g.points) ps.basis.push_back(basis(p));
    const std::size_t P = g.size();
    ps.latent.assign(3, std::vector<double>(n * P));
    for (int var = 0; var < 3; ++var)
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t p = 0; p < P; ++p)
          ps.latent[var][t * P + p] = dot(ps.basis[p].data(), truth_coef_[var].data() + t * K, K);
    return ps;
  };
  const PointSet ens_pts = prepare(*site.ens_grid);
  const PointSet det_pts = prepare(*site.det_grid);

  const double means[3] = {cfg_.u_mean, cfg_.v_mean, cfg_.t_mean};
  const double stds[3] = {cfg_.u_std, cfg_.v_std, cfg_.t_std};
  const int det_max = cfg_.max_horizon + 6;
  const auto n_err = static_cast<std::size_t>(det_max + 1);  // hourly error path length
  const std::size_t n_ens_h = static_cast<std::size_t>(cfg_.max_horizon / cfg_.ens_step_hours) + 1;
  const double phi_ens = std::pow(cfg_.error_autocorrelation, cfg_.ens_step_hours);

  auto ens_vars = std::make_shared<const std::vector<std::string>>(kEnsVars);
  auto det_vars = std::make_shared<const std::vector<std::string>>(kDetVars);
  const auto bases = base_times();
  out.issue_spread = issue_regimes();

  std::vector<double> zeta(3 * n_err * K);   // [var][h][k]
  std::vector<double> control(3 * n_err * K);
  std::vector<double> members(static_cast<std::size_t>(cfg_.n_members) * 3 * n_ens_h * K);  // [m][var][step][k]

  for (std::size_t bi = 0; bi < bases.size(); ++bi) {
    const auto base = bases[bi];
    const auto base_hour = static_cast<std::size_t>(std::chrono::duration_cast<core::Hours>(base - t0).count());
    const auto key = static_cast<std::uint64_t>(base.time_since_epoch().count());
    const double regime = out.issue_spread[bi];

    for (int var = 0; var < 3; ++var)
      for (std::size_t k = 0; k < K; ++k) {
        auto r1 = stream(cfg_.seed, {kTagIssueError, key, static_cast<std::uint64_t>(var), k});
        ar_path(r1, cfg_.error_autocorrelation, n_err, K, zeta.data() + (var * n_err) * K + k);
        auto r2 = stream(cfg_.seed, {kTagControl, key, static_cast<std::uint64_t>(var), k});
        ar_path(r2, cfg_.error_autocorrelation, n_err, K, control.data() + (var * n_err) * K + k);
      }
    for (int m = 0; m < cfg_.n_members; ++m)
      for (int var = 0; var < 3; ++var) {
        auto r = stream(cfg_.seed, {kTagMember, key, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(var)});
        for (std::size_t k = 0; k < K; ++k)
          ar_path(r, phi_ens, n_ens_h, K,
                  members.data() + ((static_cast<std::size_t>(m) * 3 + var) * n_ens_h) * K + k);
      }

    auto spread = [&](int h) {
      return std::min(0.95, (cfg_.spread_initial + cfg_.dispersion_growth * h) * regime);
    };
    // Forecastable signal c' = rho * truth + s * zeta; scenario = rho * c' + s * eta.
    auto signal = [&](const PointSet& ps, std::size_t p, int var, int h, double rho, double s) {
      const std::size_t P = ps.basis.size();
      const double a = ps.latent[var][(base_hour + h) * P + p];
      const double e = dot(ps.basis[p].data(), zeta.data() + (var * n_err + h) * K, K);
      return rho * a + s * e;
    };

    for (std::size_t step = 0; step < n_ens_h; ++step) {
      const int h = static_cast<int>(step) * cfg_.ens_step_hours;
      const double s = spread(h), rho = std::sqrt(1.0 - s * s);
      EnsembleForecast f;
      f.index = core::make_forecast_index(base, h);
      f.grid = site.ens_grid;
      f.variables = ens_vars;
      f.members = static_cast<std::size_t>(cfg_.n_members);
      f.values.resize(f.members * site.ens_grid->size() * 3);
      for (std::size_t p = 0; p < site.ens_grid->size(); ++p)
        for (int var = 0; var < 3; ++var) {
          const double c = signal(ens_pts, p, var, h, rho, s);
          for (std::size_t m = 0; m < f.members; ++m) {
            const double eta = dot(ens_pts.basis[p].data(),
                                   members.data() + ((m * 3 + var) * n_ens_h + step) * K, K);
            const double latent = rho * c + s * eta + cfg_.member_bias;
            f.values[f.offset(m, p, static_cast<std::size_t>(var))] = means[var] + stds[var] * latent;
          }
        }
      out.ensemble.push_back(std::move(f));
    }

    for (int h = 0; h <= det_max; h += cfg_.det_step_hours) {
      const double s = spread(h), rho = std::sqrt(1.0 - s * s);
      DeterministicForecast f;
      f.index = core::make_forecast_index(base, h);
      f.grid = site.det_grid;
      f.variables = det_vars;
      f.values.resize(site.det_grid->size() * kDetVars.size());
      for (std::size_t p = 0; p < site.det_grid->size(); ++p) {
        double val[3];
        for (int var = 0; var < 3; ++var) {
          const double c = signal(det_pts, p, var, h, rho, s);
          const double eta = dot(det_pts.basis[p].data(), control.data() + (var * n_err + h) * K, K);
          val[var] = means[var] + stds[var] * (rho * c + s * eta);
        }
        double* row = f.values.data() + p * kDetVars.size();
        row[0] = val[0];
        row[1] = val[1];
        row[2] = cfg_.hub_factor * val[0];
        row[3] = cfg_.hub_factor * val[1];
        row[4] = val[2];
      }
      out.deterministic.push_back(std::move(f));
    }
  }

  // Half-hourly settlement records from interpolated truth.
  auto rp = stream(cfg_.seed, {kTagPower, farm});
  auto rc = stream(cfg_.seed, {kTagCurtail, farm});
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double period = core::kSettlementPeriodHours;
  const std::size_t n_periods = (n - 1) * 2;
  const int window_days = cfg_.days_per_year + cfg_.max_horizon / 24 + 2;
  int curtail_left = 0;
  for (std::size_t i = 0; i < n_periods; ++i) {
    const auto ts = t0 + std::chrono::minutes{30 * static_cast<long>(i)};
    const std::size_t hr = i / 2;
    const double frac = (i % 2) * 0.5;
    const double w0 = out.truth.hub_speed(hr, cfg_.hub_factor);
    const double w1 = out.truth.hub_speed(hr + 1, cfg_.hub_factor);
    const double p_curve = site.curve((1.0 - frac) * w0 + frac * w1);
    double eps = z(rp);
    while (std::abs(eps) > 3.0) eps = z(rp);
    const double sd = cfg_.noise_scale * (cfg_.noise_floor + 4.0 * p_curve * (1.0 - p_curve));
    const double p = std::clamp(p_curve + sd * eps, 0.0, 1.0);
    const bool start_block = u01(rc) < cfg_.curtailment_rate / 6.0;
    const double bav_draw = u01(rc);
    if (start_block && curtail_left == 0) curtail_left = 6;

    // Keep only periods inside the simulated calendar windows.
    const int year = core::utc_year(ts);
    const auto jan1 = core::make_utc(std::min(year, cfg_.first_year + cfg_.n_years - 1), 1, 1);
    const bool inside = ts >= jan1 && ts < jan1 + core::Hours{24 * window_days};
    if (!inside && cfg_.days_per_year < 365) {
      if (curtail_left > 0) --curtail_left;
      continue;
    }
    core::PowerRecord rec;
    rec.timestamp = ts;
    rec.capacity_mw = site.capacity_mw;
    rec.energy_mwh = p * site.capacity_mw * period;
    if (curtail_left > 0) {
      rec.bav_mwh = (0.05 + 0.45 * bav_draw) * site.capacity_mw * period;
      --curtail_left;
    }
    out.power.push_back(rec);
  }
  return out;
}

std::vector<SyntheticFarmData> generate_synthetic(const SyntheticWorldConfig& config) {
  SyntheticWorld world(config);
  std::vector<SyntheticFarmData> out;
  for (std::size_t f = 0; f < world.farms().size(); ++f) out.push_back(world.generate_farm(f));
  return out;
}

}  // namespace windcast::dataio
