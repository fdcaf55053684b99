#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "epismc/model.hpp"
#include "epismc/observation.hpp"
#include "epismc/rng.hpp"

namespace epismc {

/// Observation a window is conditioned on, with the observation-model
/// parameters in force at its time.
struct WindowTarget {
  std::int64_t y = 0;
  double rho = 1.0;
  double nu = 1.0;
};

/// Snapshot of a partially propagated observation window.
struct BridgeContext {
  WindowTarget target;
  double time_to_observation = 0.0;   // t_i - tau_{i,j}, must be > 0
  double observed_so_far = 0.0;       // P' times incidence over (t_{i-1}, tau_{i,j}]
  CompartmentState state;
  RateState rates;
  StaticParams params;
};

enum class Proposal { Bridge, Blind };

/// The conditioned rate of the observed reaction is never pushed below this
/// fraction of the unconditioned rate, so every path the model can produce
/// stays reachable under the proposal and the importance weights stay
/// unbiased.
inline constexpr double kConditionedRateFloor = 0.1;

/// Hazard conditioned on the next observation through a joint Gaussian
/// approximation of remaining incidence and the observation. Only the
/// observed reaction's component changes; it is floored at
/// kConditionedRateFloor times its unconditioned value.
Rates conditioned_hazard(const Rates& h, double time_to_observation, double observed_so_far,
                         const WindowTarget& target, const ModelSpec& spec,
                         const ObsModelSpec& obs_spec);

Rates conditioned_hazard(const BridgeContext& ctx, const ModelSpec& spec,
                         const ObsModelSpec& obs_spec);

struct WindowResult {
  CompartmentState end_state;
  Counts totals{};
  double log_q = 0.0;  // log mass of the increments under the proposal
  double log_p = 0.0;  // log mass under the unconditioned dS(E)IR model
};

/// Propagates incidence over one observation window of `m` sub-intervals.
///
/// `rate_path` holds the already-drawn rate process at the sub-interval
/// starts (at least m entries). `on_step(state_before, increment)` is called
/// once per sub-interval, which lets callers accumulate sufficient
/// statistics without materialising the path.
template <class OnStep>
WindowResult propagate_window(const CompartmentState& start, std::span<const RateState> rate_path,
                              const StaticParams& params, const WindowTarget& target,
                              const ModelSpec& spec, const ObsModelSpec& obs_spec, double dtau,
                              std::size_t m, Proposal proposal, Stream& rng, OnStep&& on_step) {
  WindowResult out;
  CompartmentState x = start;
  const std::size_t obs = spec.observed_reaction();
  for (std::size_t j = 0; j < m; ++j) {
    const Rates h = hazard(x, params, rate_path[j], spec);
    const Rates hq =
        proposal == Proposal::Bridge
            ? conditioned_hazard(h, static_cast<double>(m - j) * dtau,
                                 static_cast<double>(out.totals[obs]), target, spec, obs_spec)
            : h;
    IncidenceIncrement inc = draw_increment(x, hq, spec, dtau, rng);
    inc.t_start = start.time + static_cast<double>(j) * dtau;
    inc.t_end = start.time + static_cast<double>(j + 1) * dtau;
    const double lp = increment_logmass(x, inc, h, spec, dtau);
    out.log_p += lp;
    out.log_q += proposal == Proposal::Bridge ? increment_logmass(x, inc, hq, spec, dtau) : lp;
    on_step(static_cast<const CompartmentState&>(x), static_cast<const IncidenceIncrement&>(inc));
    x = apply_increment(x, inc, spec);
    for (std::size_t r = 0; r < spec.n_reactions(); ++r) out.totals[r] += inc.events[r];
  }
  x.time = start.time + static_cast<double>(m) * dtau;
  out.end_state = x;
  return out;
}

struct WindowPath {
  std::vector<IncidenceIncrement> increments;
  std::vector<CompartmentState> states;  // state at each sub-interval start
  WindowResult result;
};

WindowPath propagate_window(const CompartmentState& start, std::span<const RateState> rate_path,
                            const StaticParams& params, const WindowTarget& target,
                            const ModelSpec& spec, const ObsModelSpec& obs_spec, double dtau,
                            std::size_t m, Proposal proposal, Stream& rng);

}  // namespace epismc
