#include "windcast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "windcast/dataio.hpp"

namespace windcast::eval {

namespace {

std::int64_t base_key(core::Timestamp t) {
  return std::chrono::duration_cast<core::Hours>(t.time_since_epoch()).count();
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

using dataio::format_double;

}  // namespace

std::optional<double> mean_crps(std::span<const double> scores) {
  if (scores.empty()) return std::nullopt;
  double acc = 0.0;
  for (double s : scores) acc += s;
  return acc / static_cast<double>(scores.size());
}

std::optional<double> mean_crps(std::span<const dists::BoundedCdf> forecasts, std::span<const double> observations) {
  if (forecasts.size() != observations.size()) throw ParameterError("forecasts and observations differ in length");
  std::vector<double> s;
  s.reserve(forecasts.size());
  for (std::size_t i = 0; i < forecasts.size(); ++i) s.push_back(dists::crps_numeric(forecasts[i], observations[i]));
  return mean_crps(s);
}

double skill_score(double reference, double subject) {
  if (reference == 0.0) throw UndefinedSkillError("skill score undefined for a perfect reference");
  return (reference - subject) / reference;
}

double pinball_loss(double q, double y, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("pinball level outside (0,1)");
  return y >= q ? tau * (y - q) : (1.0 - tau) * (q - y);
}

BootstrapResult bootstrap_significance(std::span<const PairedScore> pairs, const BootstrapOptions& opt) {
  if (!(opt.level > 0.0 && opt.level < 1.0)) throw ParameterError("bootstrap level outside (0,1)");
  BootstrapResult out;
  out.n_pairs = pairs.size();
  std::map<std::int64_t, std::pair<double, double>> blocks;  // block -> (sum ref, sum subject)
  double sr = 0.0, ss = 0.0;
  for (const auto& p : pairs) {
    auto& b = blocks[p.block];
    b.first += p.reference;
    b.second += p.subject;
    sr += p.reference;
    ss += p.subject;
  }
  out.n_blocks = blocks.size();
  if (pairs.empty()) {
    out.insufficient = true;
    return out;
  }
  out.skill = skill_score(sr, ss);
  if (pairs.size() < opt.min_pairs || opt.n_resamples == 0) {
    out.insufficient = true;
    return out;
  }
  std::vector<std::pair<double, double>> sums;
  sums.reserve(blocks.size());
  for (const auto& [k, v] : blocks) sums.push_back(v);
  std::vector<double> skills;
  skills.reserve(opt.n_resamples);
  const std::size_t nb = sums.size();
  for (std::size_t r = 0; r < opt.n_resamples; ++r) {
    std::mt19937_64 rng(core::derive_seed(opt.seed, {r}));
    std::uniform_int_distribution<std::size_t> pick(0, nb - 1);
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      const auto& s = sums[pick(rng)];
      a += s.first;
      b += s.second;
    }
    skills.push_back(a == 0.0 ? 0.0 : (a - b) / a);
  }
  std::sort(skills.begin(), skills.end());
  const double tail = 0.5 * (1.0 - opt.level);
  out.lower = core::quantile_type7_sorted(skills, tail);
  out.upper = core::quantile_type7_sorted(skills, 1.0 - tail);
  out.significant = out.lower > 0.0 || out.upper < 0.0;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<ReliabilityRow> reliability_table(std::span<const dists::BoundedCdf> forecasts,
                                              std::span<const double> observations, const core::QuantileGrid& grid) {
  std::vector<double> q;
  q.reserve(forecasts.size() * grid.size());
  for (const auto& f : forecasts)
    for (double tau : grid.levels()) q.push_back(dists::cdf_quantile(f, tau));
  return reliability_table(q, observations, grid);
}

std::vector<ReliabilityRow> reliability_table(std::span<const double> quantiles, std::span<const double> observations,
                                              const core::QuantileGrid& grid) {
  const std::size_t k = grid.size();
  if (quantiles.size() != observations.size() * k) throw ParameterError("quantile table does not match observations");
  std::vector<ReliabilityRow> out;
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < observations.size(); ++i)
      if (observations[i] <= quantiles[i * k + j]) ++hit;
    const std::size_t n = observations.size();
    out.push_back({grid[j], n ? static_cast<double>(hit) / static_cast<double>(n) : 0.0, n});
  }
  return out;
}

double uncertainty_nwp(std::span<const double> member_medians) {
  if (member_medians.size() < 2) throw ParameterError("NWP uncertainty needs at least two members");
  std::vector<double> v(member_medians.begin(), member_medians.end());
  std::sort(v.begin(), v.end());
  return core::quantile_type7_sorted(v, 0.75) - core::quantile_type7_sorted(v, 0.25);
}

double uncertainty_w2p(std::span<const core::QuantileSet> members) {
  if (members.empty()) throw ParameterError("weather-to-power uncertainty needs at least one member");
  double acc = 0.0;
  for (const auto& q : members) acc += q.at(0.75) - q.at(0.25);
  return acc / static_cast<double>(members.size());
}

std::optional<double> crossing_horizon(std::span<const core::UncertaintyProfile> profiles) {
  if (profiles.size() < 2) throw ParameterError("crossing horizon needs at least two horizons");
  double mx = 0.0, md = 0.0;
  double lo = profiles.front().horizon_hours, hi = lo;
  for (const auto& p : profiles) {
    mx += p.horizon_hours;
    md += p.u_nwp - p.u_w2p;
    lo = std::min<double>(lo, p.horizon_hours);
    hi = std::max<double>(hi, p.horizon_hours);
  }
  const auto n = static_cast<double>(profiles.size());
  mx /= n;
  md /= n;
  double sxx = 0.0, sxd = 0.0;
  for (const auto& p : profiles) {
    const double dx = p.horizon_hours - mx;
    sxx += dx * dx;
    sxd += dx * ((p.u_nwp - p.u_w2p) - md);
  }
  if (sxx == 0.0) return std::nullopt;
  const double slope = sxd / sxx;
  if (std::abs(slope) < 1e-12) return std::nullopt;
  const double intercept = md - slope * mx;
  const double root = -intercept / slope;
  if (root < lo || root > hi) return std::nullopt;
  return root;
}

HighUncertaintySubset high_uncertainty_filter(std::span<const int> horizons, std::span<const double> u_nwp,
                                              double level) {
  if (horizons.size() != u_nwp.size()) throw ParameterError("horizons and uncertainties differ in length");
  if (!(level >= 0.0 && level <= 1.0)) throw ParameterError("quantile level outside [0,1]");
  HighUncertaintySubset out;
  std::map<int, std::vector<double>> by_h;
  for (std::size_t i = 0; i < horizons.size(); ++i) by_h[horizons[i]].push_back(u_nwp[i]);
  for (auto& [h, v] : by_h) {
    std::sort(v.begin(), v.end());
    out.thresholds[h] = core::quantile_type7_sorted(v, level);
  }
  for (std::size_t i = 0; i < horizons.size(); ++i)
    if (level == 0.0 || u_nwp[i] > out.thresholds[horizons[i]]) out.retained.push_back(i);
  out.empty = out.retained.empty();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

using PairKey = std::tuple<std::string, std::int64_t, int>;  // farm, base, horizon

struct ScoreIndex {
  // method -> (farm, base, horizon) -> crps
  std::map<std::string, std::map<PairKey, double>> by_method;
};

void add_skill(EvaluationReport& rep, const std::string& subject, const std::string& reference,
               const std::string& farm, const std::string& subset,
               const std::map<int, std::vector<PairedScore>>& by_day, const BootstrapOptions& base_opt) {
  for (const auto& [day, pairs] : by_day) {
    auto opt = base_opt;
    opt.seed = core::derive_seed(base_opt.seed,
                                 {fnv1a(subject), fnv1a(reference), fnv1a(farm), fnv1a(subset),
                                  static_cast<std::uint64_t>(day)});
    SkillEntry e{subject, reference, farm, subset, day, {}};
    try {
      e.result = bootstrap_significance(pairs, opt);
    } catch (const UndefinedSkillError&) {
      e.result.insufficient = true;
      e.result.n_pairs = pairs.size();
    }
    rep.skill.push_back(std::move(e));
  }
}

}  // namespace

EvaluationReport build_report(std::span<const ScoredForecast> scored, const core::QuantileGrid& grid,
                              std::span<const UncertaintyRecord> uncertainty, const ReportOptions& opt) {
  EvaluationReport rep;
  rep.pairs = scored.size();
  std::set<std::string> methods, farms;
  ScoreIndex idx;
  for (const auto& s : scored) {
    if (s.quantiles.size() != grid.size()) throw ParameterError("scored forecast quantiles do not match the grid");
    methods.insert(s.method);
    farms.insert(s.farm);
    idx.by_method[s.method][{s.farm, base_key(s.index.base_time), s.index.horizon_hours}] = s.crps;
  }
  rep.methods.assign(methods.begin(), methods.end());

  // Mean CRPS per (method, farm, horizon).
  std::map<std::tuple<std::string, std::string, int>, std::pair<double, std::size_t>> crps;
  for (const auto& s : scored) {
    auto& c = crps[{s.method, s.farm, s.index.horizon_hours}];
    c.first += s.crps;
    ++c.second;
  }
  for (const auto& [k, v] : crps)
    rep.crps.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), v.first / double(v.second), v.second});

  // Subset of (farm, base, horizon) keys with high NWP uncertainty.
  std::optional<std::set<PairKey>> high;
  if (opt.high_uncertainty_level) {
    high.emplace();
    std::map<std::string, std::vector<const UncertaintyRecord*>> per_farm;
    for (const auto& u : uncertainty) per_farm[u.farm].push_back(&u);
    for (const auto& [farm, recs] : per_farm) {
      std::vector<int> hs;
      std::vector<double> us;
      for (const auto* r : recs) {
        hs.push_back(r->index.horizon_hours);
        us.push_back(r->u_nwp);
      }
      const auto sub = high_uncertainty_filter(hs, us, *opt.high_uncertainty_level);
      for (auto i : sub.retained)
        high->insert({farm, base_key(recs[i]->index.base_time), recs[i]->index.horizon_hours});
    }
  }

  // Skill of the subject against each other method and against the per-(farm, horizon) best.
  const auto subj_it = idx.by_method.find(opt.subject);
  if (subj_it != idx.by_method.end()) {
    const auto& subj = subj_it->second;
    std::map<std::pair<std::string, int>, std::pair<std::string, double>> best;  // (farm, h) -> method, mean
    for (const auto& e : rep.crps) {
      if (e.method == opt.subject) continue;
      auto [it, ins] = best.try_emplace({e.farm, e.horizon}, e.method, e.mean_crps);
      if (!ins && e.mean_crps < it->second.second) it->second = {e.method, e.mean_crps};
    }
    std::vector<std::string> refs;
    for (const auto& m : rep.methods)
      if (m != opt.subject) refs.push_back(m);
    if (!refs.empty()) refs.push_back(kStateOfTheArt);

    std::vector<std::string> subsets{"all"};
    if (high) {
      std::ostringstream os;
      os << "u_nwp>q" << format_double(*opt.high_uncertainty_level);
      subsets.push_back(os.str());
    }
    for (const auto& ref : refs) {
      for (const auto& subset : subsets) {
        const bool restricted = subset != "all";
        std::map<std::string, std::map<int, std::vector<PairedScore>>> per_farm;
        for (const auto& [key, s] : subj) {
          const auto& [farm, base, h] = key;
          if (restricted && !high->count(key)) continue;
          const std::string* method = &ref;
          if (ref == kStateOfTheArt) {
            const auto b = best.find({farm, h});
            if (b == best.end()) continue;
            method = &b->second.first;
          }
          const auto& table = idx.by_method.at(*method);
          const auto r = table.find(key);
          if (r == table.end()) continue;
          const PairedScore p{base, r->second, s};
          per_farm[farm][core::horizon_day(h)].push_back(p);
          per_farm["all"][core::horizon_day(h)].push_back(p);
        }
        for (const auto& [farm, by_day] : per_farm) add_skill(rep, opt.subject, ref, farm, subset, by_day, opt.bootstrap);
      }
    }
  }

  // Reliability per (method, farm) and pooled over farms.
  for (const auto& m : rep.methods) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per_farm;
    for (const auto& s : scored) {
      if (s.method != m) continue;
      for (const auto& farm : {s.farm, std::string("all")}) {
        auto& [q, y] = per_farm[farm];
        q.insert(q.end(), s.quantiles.begin(), s.quantiles.end());
        y.push_back(s.observation);
      }
    }
    for (const auto& [farm, qy] : per_farm)
      for (const auto& row : reliability_table(qy.first, qy.second, grid))
        rep.reliability.push_back({m, farm, row, row.n < kReliabilityRecommendedPairs});
  }

  // Uncertainty profiles per (farm, horizon) and crossing horizons.
  std::map<std::pair<std::string, int>, std::tuple<double, double, std::size_t>> prof;
  for (const auto& u : uncertainty) {
    auto& p = prof[{u.farm, u.index.horizon_hours}];
    std::get<0>(p) += u.u_nwp;
    std::get<1>(p) += u.u_w2p;
    ++std::get<2>(p);
  }
  std::map<std::string, std::vector<core::UncertaintyProfile>> profiles;
  for (const auto& [k, v] : prof) {
    const auto n = static_cast<double>(std::get<2>(v));
    rep.uncertainty.push_back({k.first, k.second, std::get<0>(v) / n, std::get<1>(v) / n, std::get<2>(v)});
    profiles[k.first].push_back({k.second, std::get<0>(v) / n, std::get<1>(v) / n});
  }
  for (const auto& [farm, p] : profiles)
    rep.crossing.push_back({farm, p.size() >= 2 ? crossing_horizon(p) : std::nullopt});
  return rep;
}

std::string EvaluationReport::crps_csv() const {
  std::ostringstream os;
  os << "method,farm,horizon,mean_crps,n\n";
  for (const auto& e : crps)
    os << e.method << ',' << e.farm << ',' << e.horizon << ',' << format_double(e.mean_crps) << ',' << e.n << '\n';
  return os.str();
}

std::string EvaluationReport::skill_csv() const {
  std::ostringstream os;
  os << "subject,reference,farm,day,skill,significant,subset,lower,upper,n_pairs,insufficient\n";
  for (const auto& e : skill) {
    const auto& r = e.result;
    os << e.subject << ',' << e.reference << ',' << e.farm << ',' << e.day << ',' << format_double(r.skill) << ','
       << (r.significant ? 1 : 0) << ',' << e.subset << ',' << format_double(r.lower) << ','
       << format_double(r.upper) << ',' << r.n_pairs << ',' << (r.insufficient ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string EvaluationReport::reliability_csv() const {
  std::ostringstream os;
  os << "method,farm,tau,coverage,n,few_pairs\n";
  for (const auto& e : reliability)
    os << e.method << ',' << e.farm << ',' << format_double(e.row.tau) << ',' << format_double(e.row.coverage) << ','
       << e.row.n << ',' << (e.few_pairs ? 1 : 0) << '\n';
  return os.str();
}

std::string EvaluationReport::uncertainty_csv() const {
  std::ostringstream os;
  os << "farm,horizon,u_nwp,u_w2p,n\n";
  for (const auto& e : uncertainty)
    os << e.farm << ',' << e.horizon << ',' << format_double(e.u_nwp) << ',' << format_double(e.u_w2p) << ','
       << e.n << '\n';
  return os.str();
}

std::string EvaluationReport::crossing_csv() const {
  std::ostringstream os;
  os << "farm,crossing_h\n";
  for (const auto& e : crossing) os << e.farm << ',' << (e.hours ? format_double(*e.hours) : std::string()) << '\n';
  return os.str();
}

}  // namespace windcast::eval
