#include "windcast/combine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "windcast/optim.hpp"
#include "windcast/special_functions.hpp"

namespace windcast::combine {

namespace {

using dists::kFastNormalRange;
using dists::normal_cdf;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kFormatVersion = 1;
constexpr std::uint64_t kStartJitter = 0x5354;

void check_pool_params(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw ContractViolation("beta calibration parameters must be positive and finite");
}

void check_kernels(const KernelParams& k) {
  if (k.empty()) throw ContractViolation("pool needs at least one kernel");
  for (const auto& kern : k)
    if (!(kern.sigma > 0.0) || !std::isfinite(kern.sigma) || !std::isfinite(kern.mu))
      throw ContractViolation("kernel sigma must be positive and finite");
}

double softplus(double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); }
double softplus_inv(double v) { return v > 30.0 ? v : std::log(std::expm1(v)); }

constexpr double kThetaBound = 30.0;

HorizonCoefficients from_theta(const std::vector<double>& t) {
  auto c = [](double v) { return std::clamp(v, -kThetaBound, kThetaBound); };
  HorizonCoefficients h;
  h.lambda0 = std::exp(c(t[0]));
  h.lambda1 = softplus(c(t[1]));
  h.a = std::exp(c(t[2]));
  h.b = std::exp(c(t[3]));
  return h;
}

std::vector<double> to_theta(const HorizonCoefficients& h) {
  return {std::log(h.lambda0), softplus_inv(h.lambda1), std::log(h.a), std::log(h.b)};
}

/// Piecewise-linear table of I_{a,b} on [0, 1].
class BetaTable {
 public:
  BetaTable(double a, double b, std::size_t cells) : identity_(a == 1.0 && b == 1.0), n_(cells) {
    if (identity_) return;
    const dists::BetaCdf f(a, b);
    v_.resize(n_ + 1);
    for (std::size_t i = 0; i <= n_; ++i) v_[i] = f(static_cast<double>(i) / static_cast<double>(n_));
    v_[0] = 0.0;
    v_[n_] = 1.0;
  }
  double operator()(double p) const {
    if (identity_) return p;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    const double s = p * static_cast<double>(n_);
    const auto i = std::min(static_cast<std::size_t>(s), n_ - 1);
    const double w = s - static_cast<double>(i);
    return v_[i] + w * (v_[i + 1] - v_[i]);
  }

 private:
  bool identity_;
  std::size_t n_;
  std::vector<double> v_;
};

constexpr std::size_t kBetaTableCells = 1024;

/// Fast mean CRPS: trapezoid on a uniform grid with y inserted, tabulated Phi and I_{a,b}.
class FastLoss {
 public:
  FastLoss(const CombinationTrainingSet& data, std::size_t grid_points) : d_(data), n_(grid_points - 1) {
    if (grid_points < 2) throw ParameterError("fit grid needs at least two points");
    xs_.resize(n_ + 1);
    for (std::size_t k = 0; k <= n_; ++k) xs_[k] = static_cast<double>(k) / static_cast<double>(n_);
    f_.resize(n_ + 1);
  }

  double operator()(const HorizonCoefficients& c) {
    const BetaTable beta(c.a, c.b, kBetaTableCells);
    const auto& phi = dists::FastNormalCdf::instance();
    const std::size_t m = d_.members();
    const double inv_m = 1.0 / static_cast<double>(m);
    const double step = 1.0 / static_cast<double>(n_);
    double total = 0.0;
    for (std::size_t i = 0; i < d_.size(); ++i) {
      const double* mu = d_.q50(i);
      const double* iqr = d_.iqr(i);
      const double y = d_.y(i);
      std::fill(f_.begin(), f_.end(), 0.0);
      double fy = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double s = c.lambda0 + c.lambda1 * iqr[j];
        const double inv = 1.0 / s;
        const double lo = mu[j] - kFastNormalRange * s;
        const double hi = mu[j] + kFastNormalRange * s;
        // Nodes below lo contribute 0, above hi contribute 1.
        const auto k_lo = static_cast<std::size_t>(std::clamp(std::ceil(lo * n_), 0.0, double(n_ + 1)));
        const auto k_hi = static_cast<std::size_t>(std::clamp(std::floor(hi * n_) + 1.0, 0.0, double(n_ + 1)));
        for (std::size_t k = k_lo; k < k_hi; ++k) f_[k] += phi((xs_[k] - mu[j]) * inv);
        for (std::size_t k = std::max(k_hi, k_lo); k <= n_; ++k) f_[k] += 1.0;
        fy += phi((y - mu[j]) * inv);
      }
      for (auto& v : f_) v = beta(v * inv_m);
      const double gy = beta(fy * inv_m);
      double acc = 0.0;
      for (std::size_t k = 0; k < n_; ++k) {
        const double x0 = xs_[k], x1 = xs_[k + 1];
        if (x1 <= y) {
          acc += 0.5 * step * (f_[k] * f_[k] + f_[k + 1] * f_[k + 1]);
        } else if (x0 >= y) {
          const double g0 = 1.0 - f_[k], g1 = 1.0 - f_[k + 1];
          acc += 0.5 * step * (g0 * g0 + g1 * g1);
        } else {
          const double wl = y - x0, wr = x1 - y;
          const double g0 = 1.0 - gy, g1 = 1.0 - f_[k + 1];
          acc += 0.5 * wl * (f_[k] * f_[k] + gy * gy) + 0.5 * wr * (g0 * g0 + g1 * g1);
        }
      }
      total += acc;
    }
    return total / static_cast<double>(d_.size());
  }

 private:
  const CombinationTrainingSet& d_;
  std::size_t n_;
  std::vector<double> xs_, f_;
};

nlohmann::json horizon_json(const HorizonCoefficients& c) {
  return {{"lambda0", c.lambda0}, {"lambda1", c.lambda1}, {"a", c.a}, {"b", c.b},
          {"train_crps", c.train_crps}, {"iterations", c.iterations}, {"evaluations", c.evaluations},
          {"n", c.n}, {"neighbor_fallback", c.neighbor_fallback}, {"failed", c.failed},
          {"warning", c.warning}};
}

template <class T>
const T& nearest_horizon(const std::map<int, T>& table, int horizon, const char* what) {
  const auto it = table.find(horizon);
  if (it != table.end()) return it->second;
  std::ostringstream os;
  os << what << " coefficients missing for horizon " << horizon;
  throw PipelineError(os.str());
}

void check_header(const nlohmann::json& j, const char* format) {
  if (!j.is_object() || j.value("format", "") != format)
    throw FormatError(std::string("not a ") + format + " document");
  if (j.value("version", 0) != kFormatVersion) throw FormatError(std::string(format) + ": unsupported version");
}

/// Nearest horizon with enough samples, lower horizon on ties.
template <class Set>
std::optional<int> neighbor_with_samples(const std::map<int, Set>& data, int h, std::size_t floor) {
  std::optional<int> best;
  for (const auto& [k, set] : data) {
    if (set.size() < floor) continue;
    if (!best || std::abs(k - h) < std::abs(*best - h)) best = k;
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------

KernelParams dress_kernels(std::span<const core::QuantileSet> members, double lambda0, double lambda1) {
  if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw ContractViolation("lambda0 must be positive");
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) throw ContractViolation("lambda1 must be nonnegative");
  if (members.empty()) throw ContractViolation("no ensemble members to dress");
  KernelParams out;
  out.reserve(members.size());
  for (const auto& q : members) {
    const double iqr = q.at(0.75) - q.at(0.25);
    out.push_back({q.at(0.5), lambda0 + lambda1 * iqr});
  }
  return out;
}

PoolShape::PoolShape(KernelParams kernels, double a, double b) : kernels_(std::move(kernels)), beta_(1.0, 1.0) {
  check_kernels(kernels_);
  check_pool_params(a, b);
  // Canonical order makes the pool bit-identical under member relabeling.
  std::sort(kernels_.begin(), kernels_.end(),
            [](const Kernel& l, const Kernel& r) { return l.mu != r.mu ? l.mu < r.mu : l.sigma < r.sigma; });
  beta_ = dists::BetaCdf(a, b);
}

double PoolShape::linear(double x) const {
  double acc = 0.0;
  for (const auto& k : kernels_) acc += normal_cdf((x - k.mu) / k.sigma);
  return acc / static_cast<double>(kernels_.size());
}

double PoolShape::raw(double x) const { return beta_(std::clamp(linear(x), 0.0, 1.0)); }

dists::BoundedCdf pool_cdf(const KernelParams& kernels, double a, double b) {
  return dists::BoundedCdf(std::make_shared<PoolShape>(kernels, a, b));
}

// ---------------------------------------------------------------------------

HorizonCoefficients HorizonCoefficients::identity() { return {}; }

void HorizonCoefficients::validate() const {
  if (!(lambda0 > 0.0) || !(lambda1 >= 0.0) || !(a > 0.0) || !(b > 0.0) || !std::isfinite(lambda0) ||
      !std::isfinite(lambda1) || !std::isfinite(a) || !std::isfinite(b))
    throw ContractViolation("combination coefficients violate lambda0 > 0, lambda1 >= 0, a > 0, b > 0");
}

const HorizonCoefficients& CombinationCoefficients::at(int horizon) const {
  return nearest_horizon(by_horizon, horizon, "combination");
}

nlohmann::json CombinationCoefficients::to_json() const {
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& [h, c] : by_horizon) rows[std::to_string(h)] = horizon_json(c);
  return {{"format", "windcast-combination"}, {"version", kFormatVersion}, {"horizons", rows}};
}

CombinationCoefficients CombinationCoefficients::from_json(const nlohmann::json& j) {
  check_header(j, "windcast-combination");
  CombinationCoefficients out;
  try {
    for (const auto& [key, v] : j.at("horizons").items()) {
      HorizonCoefficients c;
      c.lambda0 = v.at("lambda0").get<double>();
      c.lambda1 = v.at("lambda1").get<double>();
      c.a = v.at("a").get<double>();
      c.b = v.at("b").get<double>();
      c.train_crps = v.value("train_crps", 0.0);
      c.iterations = v.value("iterations", 0);
      c.evaluations = v.value("evaluations", 0);
      c.n = v.value("n", std::size_t{0});
      c.neighbor_fallback = v.value("neighbor_fallback", false);
      c.failed = v.value("failed", false);
      c.warning = v.value("warning", "");
      c.validate();
      out.by_horizon[std::stoi(key)] = c;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("combination coefficients: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------

void CombinationTrainingSet::add(std::span<const core::QuantileSet> members, double y) {
  std::vector<double> q25, q50, q75;
  for (const auto& q : members) {
    q25.push_back(q.at(0.25));
    q50.push_back(q.at(0.5));
    q75.push_back(q.at(0.75));
  }
  add(q25, q50, q75, y);
}

void CombinationTrainingSet::add(std::span<const double> q25, std::span<const double> q50,
                                 std::span<const double> q75, double y) {
  if (q25.size() != q50.size() || q50.size() != q75.size()) throw ParameterError("quantile spans differ in length");
  if (m_ == 0) m_ = q50.size();
  if (q50.size() != m_ || m_ == 0) throw ParameterError("member count differs from the training set");
  if (!(y >= 0.0 && y <= 1.0)) throw ParameterError("observation outside [0,1]");
  std::vector<std::pair<double, double>> rows(m_);
  for (std::size_t j = 0; j < m_; ++j) rows[j] = {q50[j], std::max(0.0, q75[j] - q25[j])};
  std::sort(rows.begin(), rows.end());
  for (const auto& [median, iqr] : rows) {
    q50_.push_back(median);
    iqr_.push_back(iqr);
  }
  y_.push_back(y);
}

KernelParams CombinationTrainingSet::kernels(std::size_t i, double lambda0, double lambda1) const {
  KernelParams k(m_);
  for (std::size_t j = 0; j < m_; ++j) k[j] = {q50(i)[j], lambda0 + lambda1 * iqr(i)[j]};
  return k;
}

double mean_pool_crps(const CombinationTrainingSet& data, const HorizonCoefficients& c, std::size_t grid_points) {
  if (data.size() == 0) throw ParameterError("empty training set");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    total += dists::crps_numeric(pool_cdf(data.kernels(i, c.lambda0, c.lambda1), c.a, c.b), data.y(i), grid_points);
  return total / static_cast<double>(data.size());
}

double fast_pool_crps(const CombinationTrainingSet& data, const HorizonCoefficients& c, std::size_t grid_points) {
  if (data.size() == 0) throw ParameterError("empty training set");
  c.validate();
  FastLoss loss(data, grid_points);
  return loss(c);
}

HorizonCoefficients fit_combination_horizon(const CombinationTrainingSet& data, const CombinationFitOptions& opt) {
  if (opt.n_starts < 1) throw ConfigError("combination fit needs at least one start");
  if (data.size() < opt.min_samples) {
    std::ostringstream os;
    os << "only " << data.size() << " training pairs (< " << opt.min_samples << ")";
    throw FitError(os.str());
  }
  FastLoss fast(data, opt.fit_grid_points);
  const auto objective = [&](const std::vector<double>& t) { return fast(from_theta(t)); };

  const auto x0 = to_theta(HorizonCoefficients::identity());
  const std::vector<double> step(4, 0.5);
  optim::NelderMeadOptions nm;
  nm.f_tolerance = opt.f_tolerance;
  nm.max_iterations = opt.max_iterations;

  std::mt19937_64 rng(core::derive_seed(opt.seed, {kStartJitter}));
  std::normal_distribution<double> jitter(0.0, opt.jitter);
  std::optional<optim::NelderMeadResult> best;
  int iterations = 0, evaluations = 0;
  for (int s = 0; s < opt.n_starts; ++s) {
    auto start = x0;
    if (s > 0)
      for (auto& v : start) v += jitter(rng);
    auto r = optim::nelder_mead(objective, start, step, nm);
    iterations += r.iterations;
    evaluations += r.evaluations;
    if (std::isfinite(r.value) && (!best || r.value < best->value)) best = std::move(r);
  }

  const auto identity = HorizonCoefficients::identity();
  const double identity_crps = mean_pool_crps(data, identity);
  HorizonCoefficients out = identity;
  out.train_crps = identity_crps;
  if (!best) {
    out.failed = true;
    out.warning = "optimizer produced no finite loss; identity calibration used";
  } else {
    auto fitted = from_theta(best->x);
    fitted.validate();
    const double fitted_crps = mean_pool_crps(data, fitted);
    if (fitted_crps <= identity_crps) {
      out = fitted;
      out.train_crps = fitted_crps;
    }
  }
  out.iterations = iterations;
  out.evaluations = evaluations;
  out.n = data.size();
  return out;
}

CombinationCoefficients fit_combination(const std::map<int, CombinationTrainingSet>& data,
                                        const CombinationFitOptions& opt) {
  CombinationCoefficients out;
  for (const auto& [h, set] : data) {
    if (set.size() < opt.min_samples) continue;
    auto o = opt;
    o.seed = core::derive_seed(opt.seed, {static_cast<std::uint64_t>(h)});
    out.by_horizon[h] = fit_combination_horizon(set, o);
  }
  for (const auto& [h, set] : data) {
    if (set.size() >= opt.min_samples) continue;
    const auto nb = neighbor_with_samples(data, h, opt.min_samples);
    std::ostringstream os;
    os << "horizon " << h << " has " << set.size() << " pairs (< " << opt.min_samples << "); ";
    HorizonCoefficients c;
    if (nb) {
      c = out.by_horizon.at(*nb);
      c.neighbor_fallback = true;
      os << "using horizon " << *nb;
    } else {
      c = HorizonCoefficients::identity();
      c.failed = true;
      os << "no horizon has enough pairs, identity calibration used";
    }
    c.n = set.size();
    c.warning = os.str();
    out.by_horizon[h] = c;
  }
  return out;
}

// ---------------------------------------------------------------------------

GammaParams gamma_from_moments(double mu, double sigma) {
  if (!(mu > 0.0) || !(sigma > 0.0)) throw ParameterError("gamma moments need mu > 0 and sigma > 0");
  const double v = sigma * sigma;
  return {mu * mu / v, mu / v};
}

std::pair<double, double> ensemble_moments(std::span<const double> values) {
  if (values.empty()) throw ParameterError("no ensemble values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // Shifted by the first value so identical members give an sd of exactly zero.
  const double base = sorted.front();
  const auto n = static_cast<double>(sorted.size());
  double shift = 0.0;
  for (double v : sorted) shift += v - base;
  shift /= n;
  double ss = 0.0;
  for (double v : sorted) ss += (v - base - shift) * (v - base - shift);
  return {base + shift, std::sqrt(ss / n)};
}

const EmosHorizonCoefficients& EmosCoefficients::at(int horizon) const {
  return nearest_horizon(by_horizon, horizon, "EMOS");
}

nlohmann::json EmosCoefficients::to_json() const {
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& [h, c] : by_horizon)
    rows[std::to_string(h)] = {{"c0", c.c0}, {"c1", c.c1}, {"c2", c.c2}, {"c3", c.c3},
                               {"train_crps", c.train_crps}, {"iterations", c.iterations}, {"n", c.n},
                               {"neighbor_fallback", c.neighbor_fallback}, {"failed", c.failed},
                               {"warning", c.warning}};
  return {{"format", "windcast-emos"}, {"version", kFormatVersion}, {"horizons", rows}};
}

EmosCoefficients EmosCoefficients::from_json(const nlohmann::json& j) {
  check_header(j, "windcast-emos");
  EmosCoefficients out;
  try {
    for (const auto& [key, v] : j.at("horizons").items()) {
      EmosHorizonCoefficients c;
      c.c0 = v.at("c0").get<double>();
      c.c1 = v.at("c1").get<double>();
      c.c2 = v.at("c2").get<double>();
      c.c3 = v.at("c3").get<double>();
      c.train_crps = v.value("train_crps", 0.0);
      c.iterations = v.value("iterations", 0);
      c.n = v.value("n", std::size_t{0});
      c.neighbor_fallback = v.value("neighbor_fallback", false);
      c.failed = v.value("failed", false);
      c.warning = v.value("warning", "");
      out.by_horizon[std::stoi(key)] = c;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("EMOS coefficients: ") + e.what());
  }
  return out;
}

void EmosTrainingSet::add(std::span<const double> member_medians, double obs) {
  if (!(obs >= 0.0 && obs <= 1.0)) throw ParameterError("observation outside [0,1]");
  const auto [m, s] = ensemble_moments(member_medians);
  mean.push_back(m);
  sd.push_back(s);
  y.push_back(obs);
}

double emos_loss(const EmosTrainingSet& data, double c0, double c1, double c2, double c3) {
  if (data.size() == 0) throw ParameterError("empty training set");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double mu = c0 + c1 * data.mean[i];
    const double sigma = c2 + c3 * data.sd[i];
    if (!(mu > 0.0) || !(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma)) return kInf;
    const auto g = gamma_from_moments(mu, sigma);
    if (!std::isfinite(g.alpha) || !std::isfinite(g.rate)) return kInf;
    total += dists::crps_gamma_closed(g.alpha, g.rate, std::max(data.y[i], kEmosZeroOffset));
  }
  return total / static_cast<double>(data.size());
}

EmosHorizonCoefficients fit_emos_horizon(const EmosTrainingSet& data, const EmosFitOptions& opt) {
  if (data.size() < opt.min_samples) {
    std::ostringstream os;
    os << "only " << data.size() << " EMOS training rows (< " << opt.min_samples << ")";
    throw FitError(os.str());
  }
  // Start: OLS of y on the ensemble mean when it keeps every mu positive, else (0.01, 1).
  const std::size_t n = data.size();
  double mx = 0.0, my = 0.0, ms = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += data.mean[i];
    my += data.y[i];
    ms += data.sd[i];
  }
  mx /= double(n);
  my /= double(n);
  ms /= double(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (data.mean[i] - mx) * (data.mean[i] - mx);
    sxy += (data.mean[i] - mx) * (data.y[i] - my);
  }
  double c1 = sxx > 0.0 ? sxy / sxx : 1.0;
  double c0 = my - c1 * mx;
  const double min_mean = *std::min_element(data.mean.begin(), data.mean.end());
  const double max_mean = *std::max_element(data.mean.begin(), data.mean.end());
  if (!(c0 + c1 * min_mean > 0.005 && c0 + c1 * max_mean > 0.005)) {
    c0 = 0.01;
    c1 = 1.0;
  }
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = data.y[i] - (c0 + c1 * data.mean[i]);
    rss += r * r;
  }
  const double resid_sd = std::sqrt(rss / double(n));
  std::vector<double> x{c0, c1, std::max(0.01, 0.5 * resid_sd), ms > 0.0 ? 0.5 * resid_sd / ms : 0.0};

  const auto objective = [&](const std::vector<double>& c) { return emos_loss(data, c[0], c[1], c[2], c[3]); };
  optim::NelderMeadOptions nm;
  nm.f_tolerance = opt.f_tolerance;
  nm.max_iterations = opt.max_iterations;

  EmosHorizonCoefficients out;
  out.n = n;
  double best = objective(x);
  int iterations = 0;
  for (int r = 0; r <= opt.restarts; ++r) {
    std::vector<double> step{0.05, 0.2, 0.02, 0.2};
    const auto res = optim::nelder_mead(objective, x, step, nm);
    iterations += res.iterations;
    if (!(res.value < best) && r > 0) break;
    if (res.value <= best) {
      best = res.value;
      x = res.x;
    }
  }
  out.iterations = iterations;
  if (!std::isfinite(best)) {
    out.failed = true;
    out.warning = "EMOS optimizer found no feasible coefficients";
    out.c0 = 0.01;
    out.c1 = 1.0;
    out.c2 = 0.05;
    out.c3 = 1.0;
    out.train_crps = emos_loss(data, out.c0, out.c1, out.c2, out.c3);
    return out;
  }
  out.c0 = x[0];
  out.c1 = x[1];
  out.c2 = x[2];
  out.c3 = x[3];
  out.train_crps = best;
  return out;
}

EmosCoefficients fit_emos_gamma(const std::map<int, EmosTrainingSet>& data, const EmosFitOptions& opt) {
  EmosCoefficients out;
  for (const auto& [h, set] : data)
    if (set.size() >= opt.min_samples) out.by_horizon[h] = fit_emos_horizon(set, opt);
  for (const auto& [h, set] : data) {
    if (set.size() >= opt.min_samples) continue;
    const auto nb = neighbor_with_samples(data, h, opt.min_samples);
    std::ostringstream os;
    os << "horizon " << h << " has " << set.size() << " EMOS rows (< " << opt.min_samples << "); ";
    EmosHorizonCoefficients c;
    if (nb) {
      c = out.by_horizon.at(*nb);
      c.neighbor_fallback = true;
      os << "using horizon " << *nb;
    } else {
      c.c0 = 0.01;
      c.failed = true;
      os << "no horizon has enough rows, default coefficients used";
    }
    c.n = set.size();
    c.warning = os.str();
    out.by_horizon[h] = c;
  }
  return out;
}

dists::BoundedCdf emos_predict(const EmosHorizonCoefficients& c, std::span<const double> member_medians,
                               std::string* warning) {
  const auto [mean, sd] = ensemble_moments(member_medians);
  double mu = c.mu(mean);
  double sigma = c.sigma(sd);
  std::string msg;
  if (!(sigma > 0.0)) {
    msg = "EMOS sigma " + std::to_string(sigma) + " floored at 1e-4";
    sigma = kEmosSigmaFloor;
  }
  if (!(mu > 0.0)) {
    msg += (msg.empty() ? "" : "; ") + std::string("EMOS mu ") + std::to_string(mu) + " floored at 1e-4";
    mu = kEmosSigmaFloor;
  }
  if (warning) *warning = msg;
  const auto g = gamma_from_moments(mu, sigma);
  return dists::gamma_bounded_cdf(g.alpha, g.rate);
}

}  // namespace windcast::combine
