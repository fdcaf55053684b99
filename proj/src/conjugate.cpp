#include "epismc/conjugate.hpp"

namespace epismc {

namespace {

// Reaction index and combinatorial factor of each conjugate rate.
std::size_t kappa_reaction(const ModelSpec&) { return 1; }
std::size_t gamma_reaction(const ModelSpec& spec) { return spec.kind == ModelKind::SIR ? 1 : 2; }

RateStats rate_prior(const PriorSet& priors, Param p, bool active) {
  if (!active) return {};
  const Prior& prior = priors.at(p);
  return {prior.a, prior.b, 0.0, 0.0};
}

PrecisionStats precision_prior(const PriorSet& priors, Param p, bool active) {
  if (!active) return {};
  const Prior& prior = priors.at(p);
  return {prior.a, prior.b, 0.0, 0.0};
}

}  // namespace

ConjugatePlan ConjugatePlan::from(const PriorSet& priors, const ModelSpec& spec,
                                  const ObsModelSpec& obs) {
  ConjugatePlan plan;
  for (Param p : static_params(spec, obs)) {
    const bool conj = treatment(p, priors, spec, obs) == Treatment::Conjugate;
    switch (p) {
      case Param::Beta: plan.beta = conj; break;
      case Param::Kappa: plan.kappa = conj; break;
      case Param::Gamma: plan.gamma = conj; break;
      case Param::LambdaBeta: plan.lambda_beta = conj; break;
      case Param::LambdaRho: plan.lambda_rho = conj; break;
      case Param::Rho: plan.rho = conj; break;
      default: break;
    }
  }
  return plan;
}

void WindowStats::add_step(const CompartmentState& before, const IncidenceIncrement& inc,
                           const ModelSpec& spec, double dtau) noexcept {
  const auto& x = before.counts;
  for (std::size_t r = 0; r < spec.n_reactions(); ++r) events[r] += static_cast<double>(inc.events[r]);
  if (spec.kind == ModelKind::SIR) {
    exposure[0] += static_cast<double>(x[0]) * static_cast<double>(x[1]) * dtau;
    exposure[1] += static_cast<double>(x[1]) * dtau;
  } else {
    exposure[0] += static_cast<double>(x[0]) * static_cast<double>(x[2]) * dtau;
    exposure[1] += static_cast<double>(x[1]) * dtau;
    exposure[2] += static_cast<double>(x[2]) * dtau;
  }
}

void WindowStats::add_rate_step(const RateState& from, const RateState& to, double dtau) noexcept {
  n_increments += 1.0;
  const double db = to.log_beta - from.log_beta;
  const double dr = to.logit_rho - from.logit_rho;
  beta_sum_sq += db * db / dtau;
  rho_sum_sq += dr * dr / dtau;
}

void WindowStats::add_observation(std::int64_t y, std::int64_t source) noexcept {
  sum_y += static_cast<double>(y);
  sum_source += static_cast<double>(source);
}

WindowStats& WindowStats::operator+=(const WindowStats& other) noexcept {
  for (std::size_t r = 0; r < kMaxDim; ++r) {
    events[r] += other.events[r];
    exposure[r] += other.exposure[r];
  }
  n_increments += other.n_increments;
  beta_sum_sq += other.beta_sum_sq;
  rho_sum_sq += other.rho_sum_sq;
  sum_y += other.sum_y;
  sum_source += other.sum_source;
  return *this;
}

SufficientStats init_stats(const PriorSet& priors, const ConjugatePlan& plan) {
  SufficientStats stats;
  stats.beta = rate_prior(priors, Param::Beta, plan.beta);
  stats.kappa = rate_prior(priors, Param::Kappa, plan.kappa);
  stats.gamma = rate_prior(priors, Param::Gamma, plan.gamma);
  stats.lambda_beta = precision_prior(priors, Param::LambdaBeta, plan.lambda_beta);
  stats.lambda_rho = precision_prior(priors, Param::LambdaRho, plan.lambda_rho);
  if (plan.rho) {
    const Prior& prior = priors.at(Param::Rho);
    stats.rho = {prior.a, prior.b, 0.0, 0.0};
  }
  return stats;
}

WindowStats window_stats(std::span<const CompartmentState> states,
                         std::span<const IncidenceIncrement> increments,
                         std::span<const RateState> rate_path, const ModelSpec& spec,
                         double dtau) {
  WindowStats out;
  for (std::size_t j = 0; j < increments.size(); ++j) out.add_step(states[j], increments[j], spec, dtau);
  for (std::size_t j = 1; j < rate_path.size(); ++j) out.add_rate_step(rate_path[j - 1], rate_path[j], dtau);
  return out;
}

SufficientStats update_stats(const SufficientStats& stats, const WindowStats& window,
                             const ModelSpec& spec) {
  SufficientStats out = stats;
  out.beta.events += window.events[0];
  out.beta.exposure += window.exposure[0];
  if (spec.kind == ModelKind::SEIR) {
    out.kappa.events += window.events[kappa_reaction(spec)];
    out.kappa.exposure += window.exposure[kappa_reaction(spec)];
  }
  out.gamma.events += window.events[gamma_reaction(spec)];
  out.gamma.exposure += window.exposure[gamma_reaction(spec)];
  out.lambda_beta.n_increments += window.n_increments;
  out.lambda_beta.sum_sq += window.beta_sum_sq;
  out.lambda_rho.n_increments += window.n_increments;
  out.lambda_rho.sum_sq += window.rho_sum_sq;
  out.rho.sum_y += window.sum_y;
  out.rho.sum_source += window.sum_source;
  return out;
}

void sample_conjugate(const SufficientStats& stats, const ConjugatePlan& plan,
                      StaticParams& params, Stream& rng) {
  if (plan.beta) params.beta = sample_gamma(stats.beta.shape(), stats.beta.rate(), rng);
  if (plan.kappa) params.kappa = sample_gamma(stats.kappa.shape(), stats.kappa.rate(), rng);
  if (plan.gamma) params.gamma = sample_gamma(stats.gamma.shape(), stats.gamma.rate(), rng);
  if (plan.lambda_beta) {
    params.lambda_beta = sample_gamma(stats.lambda_beta.shape(), stats.lambda_beta.rate(), rng);
  }
  if (plan.lambda_rho) {
    params.lambda_rho = sample_gamma(stats.lambda_rho.shape(), stats.lambda_rho.rate(), rng);
  }
  if (plan.rho) params.rho = sample_beta(stats.rho.alpha(), stats.rho.beta(), rng);
}

}  // namespace epismc
