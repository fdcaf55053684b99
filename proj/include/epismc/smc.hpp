#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epismc/bridge.hpp"
#include "epismc/conjugate.hpp"
#include "epismc/model.hpp"
#include "epismc/observation.hpp"
#include "epismc/priors.hpp"
#include "epismc/rng.hpp"

namespace epismc {

/// Raised when a numerical failure makes a run meaningless (weight collapse,
/// non-finite ODE solution).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WeightCollapse : public NumericalError {
 public:
  WeightCollapse(std::size_t observation_index, double time);
  std::size_t observation_index;
};

/// Model, observation model and priors: everything the filter fits.
struct FilterProblem {
  ModelSpec model;
  ObsModelSpec obs;
  PriorSet priors;
  InitialStatePrior initial_state;
};

enum class Resampler { Systematic, Multinomial };

struct FilterOptions {
  std::size_t particles = 1000;
  double dtau = 0.1;
  /// Liu-West discount delta; shrinkage a = (3 delta - 1) / (2 delta).
  double discount = 0.99;
  std::uint64_t seed = 1;
  Resampler resampler = Resampler::Systematic;
  Proposal proposal = Proposal::Bridge;
  /// 0 uses every available core.
  int workers = 0;
  /// Spacing of the observation grid; 0 infers it from the data (a single
  /// observation at t is then taken to cover (0, t]).
  double obs_spacing = 0.0;
  bool summaries = true;
};

/// Particle count below which jittered observation parameters were found to
/// degenerate on the Ebola application.
inline constexpr std::size_t kJitterDegeneracyThreshold = 4'000'000;

struct Particle {
  CompartmentState state;
  RateState rates;
  StaticParams params;
  SufficientStats stats;
  Counts window_incidence{};
  /// Statistics of the window just propagated, folded into `stats` after
  /// resampling so they travel with the resampled path.
  WindowStats pending;
  double log_weight = 0.0;
};

struct SummaryRow {
  double time = 0.0;
  std::string quantity;
  double mean = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double ess = 0.0;
};

struct FilterOutput {
  std::vector<SummaryRow> rows;
  std::vector<double> times;
  std::vector<double> ess;
  std::vector<double> log_lik_increments;
  double log_likelihood = 0.0;
  std::vector<std::string> warnings;
};

struct FilterResult {
  FilterOutput output;
  std::vector<Particle> particles;
};

/// Called after each assimilated observation (index, time, equally weighted
/// cloud).
using WindowObserver =
    std::function<void(std::size_t index, double time, std::span<const Particle> particles)>;

/// Number of sub-intervals per window; throws std::invalid_argument unless
/// dtau divides the spacing.
std::size_t substeps_per_window(double spacing, double dtau);

/// Sequential filter over `data`. Conjugate parameters are redrawn from
/// their conditionals after each resampling step and non-conjugate
/// parameters are jittered (Liu-West); parameters with fixed priors are held.
FilterResult run_filter(const FilterProblem& problem, const std::vector<Observation>& data,
                        const FilterOptions& options, const WindowObserver& observer = {});

/// Liu-West kernel fitted to a population of transformed parameter vectors.
class LiuWestKernel {
 public:
  LiuWestKernel(const Eigen::MatrixXd& population, double shrinkage, double scale);
  Eigen::VectorXd apply(const Eigen::VectorXd& value, Stream& rng) const;

 private:
  double shrinkage_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd noise_chol_;
};

/// Liu-West shrinkage for discount delta.
double liu_west_shrinkage(double discount);

/// Applies the Liu-West kernel row by row.
Eigen::MatrixXd liu_west_jitter(const Eigen::MatrixXd& population, double shrinkage,
                                double scale, Stream& rng);

std::vector<std::size_t> systematic_resample(std::span<const double> weights, Stream& rng);
std::vector<std::size_t> multinomial_resample(std::span<const double> weights, Stream& rng);

double ess(std::span<const double> weights);

/// Type-7 empirical quantile of unsorted values.
double quantile(std::vector<double> values, double prob);

struct Summary {
  double mean = 0.0;
  std::vector<double> quantiles;
};
Summary filtering_summary(std::span<const double> values, std::span<const double> probs);

struct ForecastSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

struct Forecast {
  std::vector<std::int64_t> samples;
  ForecastSummary summary;
};

/// Predictive draws of the next observation: each particle's rate processes
/// and incidence are propagated blindly over one window, then corrupted by
/// the observation model. `window_index` keys the random streams.
Forecast forecast_one_step(std::span<const Particle> particles, const FilterProblem& problem,
                           double start_time, double dtau, std::size_t m, std::uint64_t seed,
                           std::size_t window_index, int workers = 0);

ForecastSummary summarise_forecast(std::span<const std::int64_t> samples);

struct SyntheticData {
  Trajectory path;
  std::vector<Observation> series;
};

/// Simulates a path from the problem's initial state with the given
/// parameters and reports the observed reaction once per window of length
/// `spacing`. All randomness comes from Stream(seed, 0, 0, kSimulate).
SyntheticData simulate_data(const FilterProblem& problem, const StaticParams& params,
                            const RateState& rates, double t0, double spacing, double dtau,
                            std::size_t n_obs, std::uint64_t seed);

}  // namespace epismc
