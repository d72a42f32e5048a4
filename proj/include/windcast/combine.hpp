#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "windcast/core.hpp"
#include "windcast/dists.hpp"

namespace windcast::combine {

// ---------------------------------------------------------------------------
// Kernel dressing and the beta-transformed linear pool

struct Kernel {
  double mu = 0.0;
  double sigma = 1.0;
};

using KernelParams = std::vector<Kernel>;

/// mu_j = q50_j, sigma_j = lambda0 + lambda1 * (q75_j - q25_j). Needs the 25/50/75% levels.
KernelParams dress_kernels(std::span<const core::QuantileSet> members, double lambda0, double lambda1);

/// I_{a,b}(mean_j Phi((x - mu_j) / sigma_j)) as an unclipped shape.
class PoolShape final : public dists::CdfShape {
 public:
  PoolShape(KernelParams kernels, double a, double b);
  double raw(double x) const override;
  /// Linear pool before the beta transform.
  double linear(double x) const;
  const KernelParams& kernels() const noexcept { return kernels_; }

 private:
  KernelParams kernels_;
  dists::BetaCdf beta_;
};

/// Pool CDF with boundary masses at 0 and 1.
dists::BoundedCdf pool_cdf(const KernelParams& kernels, double a, double b);

struct HorizonCoefficients {
  double lambda0 = 0.05;
  double lambda1 = 1.0;
  double a = 1.0;
  double b = 1.0;
  double train_crps = 0.0;  ///< mean CRPS on the training pairs
  int iterations = 0;
  int evaluations = 0;
  std::size_t n = 0;
  bool neighbor_fallback = false;  ///< copied from another horizon (sample floor)
  bool failed = false;             ///< identity calibration after optimizer failure
  std::string warning;

  static HorizonCoefficients identity();
  void validate() const;
};

struct CombinationCoefficients {
  std::map<int, HorizonCoefficients> by_horizon;

  /// Throws PipelineError when the horizon was never fitted.
  const HorizonCoefficients& at(int horizon) const;
  nlohmann::json to_json() const;
  static CombinationCoefficients from_json(const nlohmann::json& j);
};

/// Per-pair member quantiles (25/50/75%) and the observation, member-major within a pair.
class CombinationTrainingSet {
 public:
  explicit CombinationTrainingSet(std::size_t members = 0) : m_(members) {}
  void add(std::span<const core::QuantileSet> members, double y);
  void add(std::span<const double> q25, std::span<const double> q50, std::span<const double> q75, double y);

  std::size_t size() const noexcept { return y_.size(); }
  std::size_t members() const noexcept { return m_; }
  double y(std::size_t i) const { return y_[i]; }
  const double* q50(std::size_t i) const { return q50_.data() + i * m_; }
  const double* iqr(std::size_t i) const { return iqr_.data() + i * m_; }
  KernelParams kernels(std::size_t i, double lambda0, double lambda1) const;

 private:
  std::size_t m_;
  std::vector<double> q50_, iqr_, y_;
};

struct CombinationFitOptions {
  std::size_t min_samples = 50;
  int n_starts = 5;  ///< total starts, the first unjittered
  double jitter = 0.5;  ///< stddev of start jitter in transformed coordinates
  double f_tolerance = 1e-6;
  int max_iterations = 500;
  std::size_t fit_grid_points = 101;  ///< quadrature points of the fast loss used while optimizing
  std::uint64_t seed = 0;
};

/// Mean CRPS of the pool on a training set, by exact crps_numeric.
double mean_pool_crps(const CombinationTrainingSet& data, const HorizonCoefficients& c,
                      std::size_t grid_points = dists::kCrpsGridPoints);

/// Mean CRPS by the fast tabulated loss used inside the optimizer.
double fast_pool_crps(const CombinationTrainingSet& data, const HorizonCoefficients& c, std::size_t grid_points);

/// Minimizes the mean CRPS of one horizon's pool over (lambda0, lambda1, a, b).
HorizonCoefficients fit_combination_horizon(const CombinationTrainingSet& data, const CombinationFitOptions& opt);

/// Independent per-horizon fits; horizons below the sample floor borrow the nearest fitted horizon.
CombinationCoefficients fit_combination(const std::map<int, CombinationTrainingSet>& data,
                                        const CombinationFitOptions& opt);

// ---------------------------------------------------------------------------
// EMOS with a Gamma predictive distribution

struct GammaParams {
  double alpha;
  double rate;
};

/// alpha = mu^2 / sigma^2, rate = mu / sigma^2.
GammaParams gamma_from_moments(double mu, double sigma);

/// Mean and population standard deviation.
std::pair<double, double> ensemble_moments(std::span<const double> values);

inline constexpr double kEmosZeroOffset = 1e-6;
inline constexpr double kEmosSigmaFloor = 1e-4;

struct EmosHorizonCoefficients {
  double c0 = 0.0, c1 = 1.0, c2 = 0.05, c3 = 1.0;
  double train_crps = 0.0;
  int iterations = 0;
  std::size_t n = 0;
  bool neighbor_fallback = false;
  bool failed = false;
  std::string warning;

  double mu(double ens_mean) const { return c0 + c1 * ens_mean; }
  double sigma(double ens_sd) const { return c2 + c3 * ens_sd; }
};

struct EmosCoefficients {
  std::map<int, EmosHorizonCoefficients> by_horizon;

  const EmosHorizonCoefficients& at(int horizon) const;
  nlohmann::json to_json() const;
  static EmosCoefficients from_json(const nlohmann::json& j);
};

struct EmosTrainingSet {
  std::vector<double> mean, sd, y;
  void add(std::span<const double> member_medians, double obs);
  std::size_t size() const noexcept { return y.size(); }
};

struct EmosFitOptions {
  std::size_t min_samples = 50;
  double f_tolerance = 1e-10;
  int max_iterations = 2000;
  int restarts = 3;
};

/// Mean closed-form Gamma CRPS; +inf if any row has mu <= 0 or sigma <= 0.
double emos_loss(const EmosTrainingSet& data, double c0, double c1, double c2, double c3);

EmosHorizonCoefficients fit_emos_horizon(const EmosTrainingSet& data, const EmosFitOptions& opt = {});
EmosCoefficients fit_emos_gamma(const std::map<int, EmosTrainingSet>& data, const EmosFitOptions& opt = {});

/// Gamma CDF on [0, 1] with the mass above 1 folded to 1. A nonpositive derived sigma
/// (or mu) is floored at 1e-4 and reported through `warning`.
dists::BoundedCdf emos_predict(const EmosHorizonCoefficients& c, std::span<const double> member_medians,
                               std::string* warning = nullptr);

}  // namespace windcast::combine
