#include "epismc/gillespie.hpp"

#include <random>
#include <stdexcept>

namespace epismc {

CompartmentState JumpPath::state_at(double t, const ModelSpec& spec) const {
  CompartmentState x = initial;
  for (const auto& ev : events) {
    if (ev.time > t) break;
    for (std::size_t c = 0; c < spec.n_compartments(); ++c) {
      x.counts[c] += spec.net_effect(ev.reaction, c);
    }
  }
  x.time = t;
  return x;
}

JumpPath gillespie_simulate(const ModelSpec& spec, const StaticParams& params,
                            const CompartmentState& init_state, double t_end, Stream& rng) {
  if (spec.time_varying_contact()) {
    throw std::invalid_argument("gillespie_simulate: constant contact rate required");
  }
  JumpPath path{init_state, {}};
  CompartmentState x = init_state;
  const RateState unused{};
  double t = init_state.time;
  std::exponential_distribution<double> unit_exp(1.0);
  while (true) {
    const Rates h = hazard(x, params, unused, spec);
    double total = 0.0;
    for (std::size_t r = 0; r < spec.n_reactions(); ++r) total += h[r];
    if (!(total > 0.0)) break;
    t += unit_exp(rng) / total;
    if (t > t_end) break;
    double u = rng.uniform() * total;
    std::size_t reaction = 0;
    while (reaction + 1 < spec.n_reactions() && u >= h[reaction]) {
      u -= h[reaction];
      ++reaction;
    }
    for (std::size_t c = 0; c < spec.n_compartments(); ++c) {
      x.counts[c] += spec.net_effect(reaction, c);
    }
    path.events.push_back({t, reaction});
  }
  return path;
}

}  // namespace epismc
