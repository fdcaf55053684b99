#pragma once

#include <span>

#include "epismc/model.hpp"
#include "epismc/priors.hpp"
#include "epismc/rng.hpp"

namespace epismc {

/// Gamma conditional of a hazard rate: Gamma(a + events, b + exposure),
/// where exposure is the integrated combinatorial factor of its hazard.
struct RateStats {
  double prior_shape = 1.0;
  double prior_rate = 1.0;
  double events = 0.0;
  double exposure = 0.0;

  double shape() const noexcept { return prior_shape + events; }
  double rate() const noexcept { return prior_rate + exposure; }
};

/// Gamma conditional of a scaled-Brownian precision:
/// Gamma(a + n/2, b + sum_sq/2) with sum_sq = sum of squared increments / dtau.
struct PrecisionStats {
  double prior_shape = 1.0;
  double prior_rate = 1.0;
  double n_increments = 0.0;
  double sum_sq = 0.0;

  double shape() const noexcept { return prior_shape + 0.5 * n_increments; }
  double rate() const noexcept { return prior_rate + 0.5 * sum_sq; }
};

/// Beta conditional of a binomial reporting rate.
struct ReportingStats {
  double prior_a = 1.0;
  double prior_b = 1.0;
  double sum_y = 0.0;
  double sum_source = 0.0;

  double alpha() const noexcept { return prior_a + sum_y; }
  double beta() const noexcept { return prior_b + sum_source - sum_y; }
};

/// Which static parameters are redrawn from their conjugate conditional.
struct ConjugatePlan {
  bool beta = false;
  bool kappa = false;
  bool gamma = false;
  bool lambda_beta = false;
  bool lambda_rho = false;
  bool rho = false;

  static ConjugatePlan from(const PriorSet& priors, const ModelSpec& spec,
                            const ObsModelSpec& obs);
  bool any() const noexcept { return beta || kappa || gamma || lambda_beta || lambda_rho || rho; }
};

/// Every block is present; the plan says which ones are sampled. Inactive
/// blocks keep accumulating and are never read.
struct SufficientStats {
  RateStats beta;
  RateStats kappa;
  RateStats gamma;
  PrecisionStats lambda_beta;
  PrecisionStats lambda_rho;
  ReportingStats rho;
};

/// Contribution of one observation window to the sufficient statistics.
struct WindowStats {
  Counts events{};
  Rates exposure{};  // sum of g_r(x) * dtau, indexed by reaction
  double n_increments = 0.0;
  double beta_sum_sq = 0.0;
  double rho_sum_sq = 0.0;
  double sum_y = 0.0;
  double sum_source = 0.0;

  void add_step(const CompartmentState& before, const IncidenceIncrement& inc,
                const ModelSpec& spec, double dtau) noexcept;
  void add_rate_step(const RateState& from, const RateState& to, double dtau) noexcept;
  void add_observation(std::int64_t y, std::int64_t source) noexcept;
  WindowStats& operator+=(const WindowStats& other) noexcept;
};

SufficientStats init_stats(const PriorSet& priors, const ConjugatePlan& plan);

/// Batch accumulation over a fully known path. `states[j]` is the state at
/// the start of `increments[j]`; `rate_path` has one more entry than
/// `increments` when the rate processes are dynamic (otherwise it may be
/// empty).
WindowStats window_stats(std::span<const CompartmentState> states,
                         std::span<const IncidenceIncrement> increments,
                         std::span<const RateState> rate_path, const ModelSpec& spec, double dtau);

SufficientStats update_stats(const SufficientStats& stats, const WindowStats& window,
                             const ModelSpec& spec);

/// Redraws the conjugate parameters named in `plan` into `params`.
void sample_conjugate(const SufficientStats& stats, const ConjugatePlan& plan,
                      StaticParams& params, Stream& rng);

}  // namespace epismc
