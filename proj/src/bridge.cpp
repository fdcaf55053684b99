#include "epismc/bridge.hpp"

#include <algorithm>

namespace epismc {

Rates conditioned_hazard(const Rates& h, double time_to_observation, double observed_so_far,
                         const WindowTarget& target, const ModelSpec& spec,
                         const ObsModelSpec& obs_spec) {
  const std::size_t obs = spec.observed_reaction();
  const double remaining = time_to_observation;
  const auto moments =
      obs_gaussian_moments(observed_so_far, h[obs] * remaining, target.rho, target.nu, obs_spec);
  const double rho = target.rho;
  // P is an indicator, so P'HP = h_obs and the correction is a scalar.
  const double denom = rho * rho * h[obs] * remaining + moments.variance;
  const double residual = static_cast<double>(target.y) - moments.mean;
  Rates out = h;
  out[obs] = std::max(kConditionedRateFloor * h[obs], h[obs] + rho * h[obs] * residual / denom);
  return out;
}

Rates conditioned_hazard(const BridgeContext& ctx, const ModelSpec& spec,
                         const ObsModelSpec& obs_spec) {
  return conditioned_hazard(hazard(ctx.state, ctx.params, ctx.rates, spec),
                            ctx.time_to_observation, ctx.observed_so_far, ctx.target, spec,
                            obs_spec);
}

WindowPath propagate_window(const CompartmentState& start, std::span<const RateState> rate_path,
                            const StaticParams& params, const WindowTarget& target,
                            const ModelSpec& spec, const ObsModelSpec& obs_spec, double dtau,
                            std::size_t m, Proposal proposal, Stream& rng) {
  WindowPath path;
  path.increments.reserve(m);
  path.states.reserve(m);
  path.result = propagate_window(start, rate_path, params, target, spec, obs_spec, dtau, m,
                                 proposal, rng,
                                 [&](const CompartmentState& x, const IncidenceIncrement& inc) {
                                   path.states.push_back(x);
                                   path.increments.push_back(inc);
                                 });
  return path;
}

}  // namespace epismc
