#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epismc/smc.hpp"

namespace epismc {

/// Log target of a random-walk chain on the unconstrained scale. The second
/// argument is the iteration index, used to key any randomness inside.
using LogTarget = std::function<double(const Eigen::VectorXd& u, std::size_t iteration)>;

struct RandomWalkResult {
  std::vector<Eigen::VectorXd> samples;  // one per iteration, after the accept step
  std::vector<double> log_target;
  std::vector<bool> accepted;
  double acceptance_rate = 0.0;
};

/// Gaussian random-walk Metropolis. A noisy (unbiased-estimate) target
/// gives a pseudo-marginal chain: the stored estimate is kept with the
/// state it was accepted with.
RandomWalkResult random_walk_metropolis(const Eigen::VectorXd& start, const LogTarget& target,
                                        const Eigen::MatrixXd& proposal_cov,
                                        std::size_t iterations, std::uint64_t seed);

/// Parameters explored by MCMC: static parameters whose prior is not fixed.
std::vector<Param> free_params(const FilterProblem& problem);

/// Central value of a prior, used to start chains.
double prior_centre(const Prior& prior);

/// Problem copy with every static parameter fixed at `psi`.
FilterProblem with_fixed_params(const FilterProblem& problem, const StaticParams& psi);

/// Log of the particle estimate of the observed-data likelihood with static
/// parameters held at `psi` (no rejuvenation or jitter). -inf on weight
/// collapse; 0 for an empty series.
double estimate_loglik(const FilterProblem& problem, const StaticParams& psi,
                       const std::vector<Observation>& data, std::size_t particles, double dtau,
                       std::uint64_t seed, Proposal proposal = Proposal::Blind, int workers = 0,
                       double obs_spacing = 0.0);

struct McmcOptions {
  std::size_t iterations = 1000;
  std::size_t particles = 200;
  double dtau = 0.1;
  double obs_spacing = 0.0;
  std::uint64_t seed = 1;
  Proposal proposal = Proposal::Blind;
  int workers = 0;
  /// Covariance on the unconstrained scale, ordered as free_params().
  Eigen::MatrixXd proposal_cov;
  /// Starting point on the natural scale; prior centres when empty.
  std::vector<double> start;
};

struct Chain {
  std::vector<Param> params;
  /// values[i][d]: natural-scale value of params[d] after iteration i.
  std::vector<std::vector<double>> values;
  std::vector<double> log_posterior;
  std::vector<bool> accepted;
  double acceptance_rate = 0.0;
};

/// Likelihood of static parameters for a given iteration.
using LogLikelihood = std::function<double(const StaticParams& psi, std::size_t iteration)>;

/// Random-walk MH over free_params() on the log/logit scale with
/// Jacobian-adjusted priors.
Chain run_mh(const FilterProblem& problem, const LogLikelihood& loglik, const McmcOptions& options);

/// Pseudo-marginal MH with the particle likelihood estimate.
Chain run_pmmh(const FilterProblem& problem, const std::vector<Observation>& data,
               const McmcOptions& options);

/// Pilot covariance of a chain on the unconstrained scale scaled by 2.38^2 / d.
Eigen::MatrixXd pilot_covariance(const Chain& chain, std::size_t burn_in = 0);

/// Chain with one row per iteration; `psi` in natural scale.
StaticParams chain_params(const Chain& chain, std::size_t iteration, const StaticParams& base);

}  // namespace epismc
