#include "epismc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace epismc {

namespace {

constexpr int kSirEffect[2][2] = {{-1, 1}, {0, -1}};
constexpr int kSeirEffect[3][3] = {{-1, 1, 0}, {0, -1, 1}, {0, 0, -1}};

double zero_drift(double, double) { return 0.0; }
double inverse_sqrt_precision(double, double precision) { return 1.0 / std::sqrt(precision); }

constexpr SdeDriver kDrivers[] = {
    {"scaled-brownian", &zero_drift, &inverse_sqrt_precision},
};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

ModelSpec ModelSpec::sir(std::int64_t pop_size, ContactMode contact, ReportingMode reporting) {
  return ModelSpec{ModelKind::SIR, pop_size, contact, reporting};
}

ModelSpec ModelSpec::seir(std::int64_t pop_size, ContactMode contact, ReportingMode reporting) {
  return ModelSpec{ModelKind::SEIR, pop_size, contact, reporting};
}

int ModelSpec::net_effect(std::size_t reaction, std::size_t compartment) const noexcept {
  return kind == ModelKind::SIR ? kSirEffect[reaction][compartment]
                                : kSeirEffect[reaction][compartment];
}

std::vector<std::string> ModelSpec::compartment_names() const {
  if (kind == ModelKind::SIR) return {"S", "I"};
  return {"S", "E", "I"};
}

std::vector<std::string> ModelSpec::reaction_names() const {
  if (kind == ModelKind::SIR) return {"infection", "removal"};
  return {"exposure", "infection", "removal"};
}

const SdeDriver& find_sde_driver(std::string_view name) {
  for (const auto& driver : kDrivers) {
    if (driver.name == name) return driver;
  }
  throw std::invalid_argument("unknown SDE driver: " + std::string(name));
}

const SdeDriver& scaled_brownian() { return kDrivers[0]; }

bool is_valid(const CompartmentState& state, const ModelSpec& spec) noexcept {
  std::int64_t total = 0;
  for (std::size_t c = 0; c < spec.n_compartments(); ++c) {
    if (state.counts[c] < 0) return false;
    total += state.counts[c];
  }
  return total <= spec.pop_size;
}

double effective_beta(const StaticParams& params, const RateState& rates,
                      const ModelSpec& spec) noexcept {
  return spec.time_varying_contact() ? std::exp(rates.log_beta) : params.beta;
}

Rates hazard(const CompartmentState& state, const StaticParams& params, const RateState& rates,
             const ModelSpec& spec) noexcept {
  const double beta = effective_beta(params, rates, spec);
  const auto& x = state.counts;
  if (spec.kind == ModelKind::SIR) {
    const double s = static_cast<double>(x[0]);
    const double i = static_cast<double>(x[1]);
    return {beta * s * i, params.gamma * i, 0.0};
  }
  const double s = static_cast<double>(x[0]);
  const double e = static_cast<double>(x[1]);
  const double i = static_cast<double>(x[2]);
  return {beta * s * i, params.kappa * e, params.gamma * i};
}

RateState sde_step(const RateState& rates, const StaticParams& params, const ModelSpec& spec,
                   double dtau, double z_beta, double z_rho, const SdeDriver& driver) noexcept {
  RateState next = rates;
  const double sqrt_dt = std::sqrt(dtau);
  if (spec.time_varying_contact()) {
    next.log_beta += driver.drift(rates.log_beta, params.lambda_beta) * dtau +
                     driver.diffusion(rates.log_beta, params.lambda_beta) * sqrt_dt * z_beta;
  }
  if (spec.dynamic_reporting()) {
    next.logit_rho += driver.drift(rates.logit_rho, params.lambda_rho) * dtau +
                      driver.diffusion(rates.logit_rho, params.lambda_rho) * sqrt_dt * z_rho;
  }
  return next;
}

RateState sde_step(const RateState& rates, const StaticParams& params, const ModelSpec& spec,
                   double dtau, Stream& rng, const SdeDriver& driver) {
  std::normal_distribution<double> normal;
  const double z_beta = spec.time_varying_contact() ? normal(rng) : 0.0;
  const double z_rho = spec.dynamic_reporting() ? normal(rng) : 0.0;
  return sde_step(rates, params, spec, dtau, z_beta, z_rho, driver);
}

std::int64_t poisson_draw(double mean, Stream& rng) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

std::int64_t reaction_cap(const CompartmentState& state, std::span<const std::int64_t> events,
                          std::size_t reaction, const ModelSpec& spec) noexcept {
  // Source of reaction r is compartment r; earlier reactions in the same
  // sub-interval may already have moved individuals in or out of it.
  std::int64_t available = state.counts[reaction];
  for (std::size_t r = 0; r < reaction; ++r) {
    available += spec.net_effect(r, reaction) * events[r];
  }
  return std::max<std::int64_t>(available, 0);
}

IncidenceIncrement draw_increment(const CompartmentState& state, const Rates& rates,
                                  const ModelSpec& spec, double dtau, Stream& rng) {
  IncidenceIncrement inc;
  inc.t_start = state.time;
  inc.t_end = state.time + dtau;
  const std::size_t n = spec.n_reactions();
  for (std::size_t r = 0; r < n; ++r) {
    const std::int64_t raw = poisson_draw(rates[r] * dtau, rng);
    const std::int64_t cap = reaction_cap(state, inc.events, r, spec);
    inc.events[r] = std::min(raw, cap);
  }
  return inc;
}

IncidenceIncrement draw_increment(const CompartmentState& state, const StaticParams& params,
                                  const RateState& rates, const ModelSpec& spec, double dtau,
                                  Stream& rng) {
  return draw_increment(state, hazard(state, params, rates, spec), spec, dtau, rng);
}

double truncated_poisson_logmass(std::int64_t k, double mean, std::int64_t cap) {
  if (k < 0 || k > cap) return kNegInf;
  if (!(mean > 0.0)) return k == 0 ? 0.0 : kNegInf;
  if (k < cap) {
    const double kd = static_cast<double>(k);
    return kd * std::log(mean) - mean - std::lgamma(kd + 1.0);
  }
  if (k == 0) return 0.0;
  // P(X >= k) is the regularised lower incomplete gamma P(k, mean).
  const double tail = boost::math::gamma_p(static_cast<double>(k), mean);
  return tail > 0.0 ? std::log(tail) : kNegInf;
}

double increment_logmass(const CompartmentState& state, const IncidenceIncrement& inc,
                         const Rates& rates, const ModelSpec& spec, double dtau) {
  double total = 0.0;
  for (std::size_t r = 0; r < spec.n_reactions(); ++r) {
    const std::int64_t cap = reaction_cap(state, inc.events, r, spec);
    total += truncated_poisson_logmass(inc.events[r], rates[r] * dtau, cap);
    if (total == kNegInf) break;
  }
  return total;
}

CompartmentState apply_increment(const CompartmentState& state, const IncidenceIncrement& inc,
                                 const ModelSpec& spec) {
  CompartmentState next = state;
  next.time = inc.t_end > inc.t_start ? inc.t_end : state.time;
  for (std::size_t c = 0; c < spec.n_compartments(); ++c) {
    for (std::size_t r = 0; r < spec.n_reactions(); ++r) {
      next.counts[c] += spec.net_effect(r, c) * inc.events[r];
    }
    if (next.counts[c] < 0) {
      throw std::logic_error("increment drives compartment " + spec.compartment_names()[c] +
                             " negative; truncation was bypassed");
    }
  }
  return next;
}

Trajectory forward_simulate(const ModelSpec& spec, const StaticParams& params,
                            const CompartmentState& init_state, const RateState& init_rates,
                            double dtau, std::size_t n_steps, Stream& rng) {
  if (n_steps == 0) throw std::invalid_argument("forward_simulate: n_steps must be >= 1");
  Trajectory path;
  path.states.reserve(n_steps + 1);
  path.rates.reserve(n_steps + 1);
  path.increments.reserve(n_steps);
  path.states.push_back(init_state);
  path.rates.push_back(init_rates);
  std::normal_distribution<double> normal;
  for (std::size_t j = 0; j < n_steps; ++j) {
    const CompartmentState& x = path.states.back();
    const RateState& b = path.rates.back();
    auto inc = draw_increment(x, hazard(x, params, b, spec), spec, dtau, rng);
    inc.t_start = init_state.time + static_cast<double>(j) * dtau;
    inc.t_end = init_state.time + static_cast<double>(j + 1) * dtau;
    CompartmentState next = apply_increment(x, inc, spec);
    next.time = inc.t_end;
    const double z_beta = spec.time_varying_contact() ? normal(rng) : 0.0;
    const double z_rho = spec.dynamic_reporting() ? normal(rng) : 0.0;
    path.rates.push_back(sde_step(b, params, spec, dtau, z_beta, z_rho));
    path.states.push_back(next);
    path.increments.push_back(inc);
  }
  return path;
}

CompartmentState prevalence_from_incidence(const CompartmentState& init_state,
                                           std::span<const IncidenceIncrement> increments,
                                           const ModelSpec& spec) {
  Counts totals{};
  double t_end = init_state.time;
  for (const auto& inc : increments) {
    for (std::size_t r = 0; r < spec.n_reactions(); ++r) totals[r] += inc.events[r];
    t_end = std::max(t_end, inc.t_end);
  }
  CompartmentState out = init_state;
  out.time = t_end;
  for (std::size_t c = 0; c < spec.n_compartments(); ++c) {
    for (std::size_t r = 0; r < spec.n_reactions(); ++r) {
      out.counts[c] += spec.net_effect(r, c) * totals[r];
    }
    if (out.counts[c] < 0) {
      throw std::logic_error("prevalence reconstruction leaves compartment " +
                             spec.compartment_names()[c] + " negative");
    }
  }
  return out;
}

std::vector<IncidenceIncrement> aggregate_increments(std::span<const IncidenceIncrement> increments,
                                                     std::size_t per_window) {
  if (per_window == 0) throw std::invalid_argument("aggregate_increments: per_window == 0");
  std::vector<IncidenceIncrement> out;
  for (std::size_t start = 0; start + per_window <= increments.size(); start += per_window) {
    IncidenceIncrement total;
    total.t_start = increments[start].t_start;
    total.t_end = increments[start + per_window - 1].t_end;
    for (std::size_t j = start; j < start + per_window; ++j) {
      for (std::size_t r = 0; r < kMaxDim; ++r) total.events[r] += increments[j].events[r];
    }
    out.push_back(total);
  }
  return out;
}

double logit(double p) noexcept { return std::log(p) - std::log1p(-p); }

double inv_logit(double x) noexcept {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace epismc
