#pragma once

#include <cstddef>
#include <vector>

#include "epismc/model.hpp"

namespace epismc {

// Exact Markov jump process simulation by Gillespie's direct method.
// Test oracle for the discretised simulator; not used by any inference code.

struct JumpEvent {
  double time = 0.0;
  std::size_t reaction = 0;
};

struct JumpPath {
  CompartmentState initial;
  std::vector<JumpEvent> events;

  /// Prevalence at time t (right-continuous).
  CompartmentState state_at(double t, const ModelSpec& spec) const;
};

/// Requires a constant contact rate.
JumpPath gillespie_simulate(const ModelSpec& spec, const StaticParams& params,
                            const CompartmentState& init_state, double t_end, Stream& rng);

}  // namespace epismc
