#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "epismc/model.hpp"
#include "epismc/observation.hpp"
#include "epismc/pmmh.hpp"
#include "epismc/smc.hpp"

namespace epismc {

/// First line of every output file.
struct OutputHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

void write_header(std::ostream& out, const OutputHeader& header);

/// time, compartments, cumulative events per reaction since the start of the
/// path and the live rate processes (log_beta, logit_rho). Every `stride`-th
/// state is written; the last state is always included.
void write_trajectory(std::ostream& out, const OutputHeader& header, const ModelSpec& spec,
                      const Trajectory& path, std::size_t stride = 1);

void write_series(std::ostream& out, const OutputHeader& header,
                  const std::vector<Observation>& series);

/// One row per (time, quantity) with mean, 2.5% and 97.5% quantiles and ESS.
void write_summary(std::ostream& out, const OutputHeader& header, const FilterOutput& output);

void write_particles(std::ostream& out, const OutputHeader& header, const ModelSpec& spec,
                     std::span<const Particle> particles);

void write_chain(std::ostream& out, const OutputHeader& header, const Chain& chain);

struct ForecastRow {
  double time = 0.0;
  std::int64_t observed = 0;
  bool has_observed = false;
  ForecastSummary summary;
};

void write_forecast(std::ostream& out, const OutputHeader& header,
                    const std::vector<ForecastRow>& rows);

struct BenchRow {
  std::size_t particles = 0;
  int workers = 0;
  double seconds = 0.0;
  double speedup = 0.0;
  bool identical = false;
};

void write_bench(std::ostream& out, const OutputHeader& header, const std::vector<BenchRow>& rows);

}  // namespace epismc
