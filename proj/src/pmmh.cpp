#include "epismc/pmmh.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace epismc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::invalid_argument("proposal covariance is not symmetric");
  if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
    throw std::invalid_argument("proposal covariance is not positive semi-definite");
  }
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

RandomWalkResult random_walk_metropolis(const Eigen::VectorXd& start, const LogTarget& target,
                                        const Eigen::MatrixXd& proposal_cov,
                                        std::size_t iterations, std::uint64_t seed) {
  const Eigen::Index d = start.size();
  if (proposal_cov.rows() != d || proposal_cov.cols() != d) {
    throw std::invalid_argument("proposal covariance has the wrong dimension");
  }
  const Eigen::MatrixXd root = symmetric_sqrt(proposal_cov);
  Stream rng(seed, 0, 0, stream_tag::kChain);
  std::normal_distribution<double> normal;

  RandomWalkResult out;
  out.samples.reserve(iterations);
  Eigen::VectorXd current = start;
  double current_lt = target(current, 0);
  std::size_t n_accepted = 0;
  Eigen::VectorXd z(d);
  for (std::size_t it = 1; it <= iterations; ++it) {
    for (Eigen::Index i = 0; i < d; ++i) z[i] = normal(rng);
    const Eigen::VectorXd proposal = current + root * z;
    const double log_u = std::log(rng.uniform());
    bool accept = false;
    if (proposal == current) {
      accept = true;
    } else {
      const double proposal_lt = target(proposal, it);
      if (proposal_lt > kNegInf && (current_lt == kNegInf || log_u < proposal_lt - current_lt)) {
        accept = true;
        current = proposal;
        current_lt = proposal_lt;
      }
    }
    n_accepted += accept ? 1 : 0;
    out.samples.push_back(current);
    out.log_target.push_back(current_lt);
    out.accepted.push_back(accept);
  }
  out.acceptance_rate =
      iterations ? static_cast<double>(n_accepted) / static_cast<double>(iterations) : 0.0;
  return out;
}

std::vector<Param> free_params(const FilterProblem& problem) {
  std::vector<Param> out;
  for (Param p : static_params(problem.model, problem.obs)) {
    if (!problem.priors.at(p).is_fixed()) out.push_back(p);
  }
  return out;
}

double prior_centre(const Prior& prior) {
  switch (prior.family) {
    case PriorFamily::Fixed: return prior.a;
    case PriorFamily::Gamma: return prior.a / prior.b;
    case PriorFamily::Beta: return prior.a / (prior.a + prior.b);
    case PriorFamily::Normal: return prior.a;
    case PriorFamily::LogitNormal: return inv_logit(prior.a);
    case PriorFamily::InvSqrtUniform: {
      const double w = 0.5 * (prior.a + prior.b);
      return 1.0 / (w * w);
    }
  }
  return prior.a;
}

FilterProblem with_fixed_params(const FilterProblem& problem, const StaticParams& psi) {
  FilterProblem fixed = problem;
  for (Param p : static_params(problem.model, problem.obs)) {
    fixed.priors.set(p, Prior::fixed(get_param(psi, p)));
  }
  return fixed;
}

double estimate_loglik(const FilterProblem& problem, const StaticParams& psi,
                       const std::vector<Observation>& data, std::size_t particles, double dtau,
                       std::uint64_t seed, Proposal proposal, int workers, double obs_spacing) {
  if (data.empty()) return 0.0;
  FilterOptions options;
  options.particles = particles;
  options.dtau = dtau;
  options.seed = seed;
  options.proposal = proposal;
  options.workers = workers;
  options.obs_spacing = obs_spacing;
  options.summaries = false;
  try {
    return run_filter(with_fixed_params(problem, psi), data, options).output.log_likelihood;
  } catch (const WeightCollapse&) {
    return kNegInf;
  }
}

Chain run_mh(const FilterProblem& problem, const LogLikelihood& loglik,
             const McmcOptions& options) {
  Chain chain;
  chain.params = free_params(problem);
  const auto d = static_cast<Eigen::Index>(chain.params.size());
  StaticParams base;
  for (Param p : static_params(problem.model, problem.obs)) {
    set_param(base, p, prior_centre(problem.priors.at(p)));
  }
  Eigen::VectorXd start(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Param p = chain.params[static_cast<std::size_t>(i)];
    const double x = options.start.empty() ? prior_centre(problem.priors.at(p))
                                           : options.start.at(static_cast<std::size_t>(i));
    start[i] = to_unconstrained(p, x);
  }
  Eigen::MatrixXd cov = options.proposal_cov;
  if (cov.size() == 0) cov = Eigen::MatrixXd::Identity(d, d) * 0.01;

  auto to_params = [&](const Eigen::VectorXd& u) {
    StaticParams psi = base;
    for (Eigen::Index i = 0; i < d; ++i) {
      const Param p = chain.params[static_cast<std::size_t>(i)];
      set_param(psi, p, from_unconstrained(p, u[i]));
    }
    return psi;
  };
  const LogTarget target = [&](const Eigen::VectorXd& u, std::size_t it) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const Param p = chain.params[static_cast<std::size_t>(i)];
      const double x = from_unconstrained(p, u[i]);
      lp += problem.priors.at(p).log_density(x) + log_jacobian(p, u[i]);
    }
    if (!std::isfinite(lp)) return kNegInf;
    const double ll = loglik(to_params(u), it);
    return std::isnan(ll) ? kNegInf : lp + ll;
  };

  const RandomWalkResult rw = random_walk_metropolis(start, target, cov, options.iterations, options.seed);
  chain.values.reserve(rw.samples.size());
  for (const auto& u : rw.samples) {
    std::vector<double> row(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
      row[static_cast<std::size_t>(i)] = from_unconstrained(chain.params[static_cast<std::size_t>(i)], u[i]);
    }
    chain.values.push_back(std::move(row));
  }
  chain.log_posterior = rw.log_target;
  chain.accepted = rw.accepted;
  chain.acceptance_rate = rw.acceptance_rate;
  return chain;
}

Chain run_pmmh(const FilterProblem& problem, const std::vector<Observation>& data,
               const McmcOptions& options) {
  const LogLikelihood loglik = [&](const StaticParams& psi, std::size_t it) {
    // Fresh particle randomness per iteration, keyed off the chain seed.
    Stream key(options.seed, it, 0, stream_tag::kChain);
    return estimate_loglik(problem, psi, data, options.particles, options.dtau, key(),
                           options.proposal, options.workers, options.obs_spacing);
  };
  return run_mh(problem, loglik, options);
}

Eigen::MatrixXd pilot_covariance(const Chain& chain, std::size_t burn_in) {
  const std::size_t d = chain.params.size();
  if (chain.values.size() <= burn_in + 1) throw std::invalid_argument("pilot chain is too short");
  const std::size_t n = chain.values.size() - burn_in;
  Eigen::MatrixXd u(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      u(i, j) = to_unconstrained(chain.params[j], chain.values[burn_in + i][j]);
    }
  }
  const Eigen::RowVectorXd mean = u.colwise().mean();
  const Eigen::MatrixXd centred = u.rowwise() - mean;
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(n - 1);
  return cov * (2.38 * 2.38 / static_cast<double>(d));
}

StaticParams chain_params(const Chain& chain, std::size_t iteration, const StaticParams& base) {
  StaticParams psi = base;
  for (std::size_t j = 0; j < chain.params.size(); ++j) {
    set_param(psi, chain.params[j], chain.values.at(iteration)[j]);
  }
  return psi;
}

}  // namespace epismc
