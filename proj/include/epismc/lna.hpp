#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "epismc/model.hpp"
#include "epismc/observation.hpp"
#include "epismc/pmmh.hpp"
#include "epismc/smc.hpp"

namespace epismc {

// Linear noise approximation of SEIR cumulative incidence with a constant
// contact rate. Coordinates are cumulative event counts n = (exposures,
// infections, removals) since the initial state x0.

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Deterministic incidence eta, fundamental matrix G and residual covariance V.
struct LnaState {
  Vec3 eta = Vec3::Zero();
  Mat3 G = Mat3::Identity();
  Mat3 V = Mat3::Zero();

  /// G = I and V = 0 at the given deterministic incidence.
  static LnaState reset(const Vec3& eta);
};

/// Hazard in incidence coordinates. Compartment sizes implied by n are
/// clamped at zero, so every component is non-negative.
Vec3 incidence_hazard(const Vec3& n, const Counts& x0, const StaticParams& theta);

/// Partial derivatives of incidence_hazard (zero where a compartment is clamped).
Mat3 jacobian(const Vec3& n, const Counts& x0, const StaticParams& theta);

/// Explicit Euler integration of the eta, G and V equations over `duration`.
/// Throws NumericalError on non-finite values and std::invalid_argument if
/// `ode_step` does not divide `duration`.
LnaState integrate_lna(const LnaState& state, const StaticParams& theta, const Counts& x0,
                       double duration, double ode_step);

struct LnaOptions {
  double ode_step = 0.01;
  double obs_spacing = 0.0;  // 0: inferred from the data
  /// Drops the residual process (V = 0, G ignored): the latent incidence is
  /// the deterministic eta path.
  bool deterministic_latent = false;
};

struct LnaWindow {
  double time = 0.0;
  double predictive_mean = 0.0;
  double predictive_var = 0.0;
  double log_lik = 0.0;
  Vec3 filtered_mean = Vec3::Zero();  // of cumulative incidence at the window end
  Mat3 filtered_cov = Mat3::Zero();
};

struct LnaFilterResult {
  double log_likelihood = 0.0;
  std::vector<LnaWindow> windows;
};

/// Forward filter for the Gaussian approximation of the observed-data
/// likelihood under negative binomial reporting of the infection events.
LnaFilterResult lna_forward_filter(const StaticParams& psi, const std::vector<Observation>& data,
                                   const CompartmentState& x0, const LnaOptions& options = {});

/// Throws std::invalid_argument unless the problem is an SEIR model with a
/// constant contact rate, constant reporting and negative binomial noise.
void require_lna_problem(const FilterProblem& problem);

/// Marginal MH with the LNA likelihood (no pseudo-marginal noise).
Chain run_lna_mh(const FilterProblem& problem, const std::vector<Observation>& data,
                 const McmcOptions& options, const LnaOptions& lna = {});

/// One-step-ahead predictive draws: for each parameter draw, the latent
/// incidence at the last observation is sampled from its filtered Gaussian,
/// pushed through the LNA over the next window and reported through the
/// negative binomial observation model.
Forecast lna_forecast_one_step(const std::vector<StaticParams>& draws,
                               const std::vector<Observation>& data, const CompartmentState& x0,
                               const LnaOptions& options, std::uint64_t seed);

}  // namespace epismc
