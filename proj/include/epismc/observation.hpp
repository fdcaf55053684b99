#pragma once

#include <cstdint>
#include <vector>

#include "epismc/model.hpp"
#include "epismc/rng.hpp"

namespace epismc {

enum class ObsFamily { Binomial, NegativeBinomial };

struct ObsModelSpec {
  ObsFamily family = ObsFamily::Binomial;
  /// Reporting rate follows a logit-Brownian process (negative binomial only).
  bool dynamic_reporting = false;
};

struct Observation {
  double time = 0.0;
  std::int64_t count = 0;
};

/// Floor applied to the Gaussian observation variance used by the bridge.
inline constexpr double kObsVarianceFloor = 1e-6;

/// Throws std::invalid_argument unless times are strictly increasing and
/// equally spaced and counts are non-negative.
void validate_series(const std::vector<Observation>& series);

/// Log mass of y given the observed-reaction incidence `reported_source`
/// (that is, P' times the window increment). Returns -inf outside the
/// support. `nu` is ignored for the binomial family.
double obs_logpmf(std::int64_t y, std::int64_t reported_source, double rho, double nu,
                  const ObsModelSpec& spec);

std::int64_t sample_obs(std::int64_t reported_source, double rho, double nu,
                        const ObsModelSpec& spec, Stream& rng);

/// Negative binomial with mean mu and variance mu + mu^2 / nu, written as the
/// number of failures before r = nu successes with success probability p.
struct NegBinShape {
  double r;
  double p;
};
NegBinShape negbin_shape(double mu, double nu);

struct GaussianObsMoments {
  double mean;
  double variance;
};

/// Moments of the Gaussian approximation to the observation given the
/// observed-reaction incidence so far plus `predicted_remaining` expected
/// further events of that reaction.
GaussianObsMoments obs_gaussian_moments(double incidence_so_far, double predicted_remaining,
                                        double rho, double nu, const ObsModelSpec& spec);

}  // namespace epismc
