#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "epismc/lna.hpp"
#include "epismc/observation.hpp"
#include "epismc/pmmh.hpp"
#include "epismc/smc.hpp"

namespace epismc {

/// Invalid or unreadable configuration or data file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter values used by `simulate`.
struct TruthBlock {
  bool present = false;
  StaticParams params;
  RateState rates;
  std::size_t n_obs = 0;
  double dtau = 0.0;  // defaults to the algorithm dtau
  double t0 = 0.0;
};

struct AlgorithmBlock {
  FilterOptions filter;
  std::size_t iterations = 1000;
  std::size_t pilot_iterations = 0;
  std::size_t mcmc_particles = 200;
  Proposal mcmc_proposal = Proposal::Blind;
  double ode_step = 0.01;
  std::size_t forecast_windows = 5;
  std::vector<std::size_t> bench_particles = {1000, 10000, 100000};
  std::vector<int> bench_workers = {1, 2, 4, 8};
};

struct IoBlock {
  std::string data;
  std::string output_dir = ".";
};

struct RunConfig {
  FilterProblem problem;
  std::string sde_driver = "scaled-brownian";
  double obs_spacing = 1.0;
  TruthBlock truth;
  AlgorithmBlock algorithm;
  IoBlock io;
  /// FNV-1a hash of the configuration text.
  std::uint64_t hash = 0;

  McmcOptions mcmc_options() const;
  LnaOptions lna_options() const;
};

/// Parses and validates configuration text. Relative io paths are resolved
/// against `base_dir`. Unknown keys, duplicate keys, missing priors and
/// priors for parameters the model does not use are errors.
RunConfig parse_config(std::string_view text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

/// Re-runs the cross-field checks after command-line overrides.
void validate_config(const RunConfig& config);

/// Reads a `time,count` CSV. Lines starting with '#' and a header row are
/// skipped.
std::vector<Observation> load_series(const std::string& path);

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace epismc
