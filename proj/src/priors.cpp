#include "epismc/priors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace epismc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

constexpr std::array<std::string_view, kParamCount> kNames = {
    "kappa", "gamma", "beta", "lambda_beta", "lambda_rho", "rho", "nu", "log_beta0", "rho0"};

}  // namespace

double sample_gamma(double shape, double rate, Stream& rng) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

double sample_beta(double a, double b, Stream& rng) {
  const double x = sample_gamma(a, 1.0, rng);
  const double y = sample_gamma(b, 1.0, rng);
  return x / (x + y);
}

double Prior::sample(Stream& rng) const {
  switch (family) {
    case PriorFamily::Fixed:
      return a;
    case PriorFamily::Gamma:
      return sample_gamma(a, b, rng);
    case PriorFamily::Beta:
      return sample_beta(a, b, rng);
    case PriorFamily::Normal: {
      std::normal_distribution<double> dist(a, b);
      return dist(rng);
    }
    case PriorFamily::LogitNormal: {
      std::normal_distribution<double> dist(a, b);
      return inv_logit(dist(rng));
    }
    case PriorFamily::InvSqrtUniform: {
      double w = 0.0;
      while (w == 0.0) w = a + (b - a) * rng.uniform();
      return 1.0 / (w * w);
    }
  }
  return a;
}

double Prior::log_density(double x) const {
  switch (family) {
    case PriorFamily::Fixed:
      return x == a ? 0.0 : kNegInf;
    case PriorFamily::Gamma:
      if (!(x > 0.0)) return kNegInf;
      return a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(x) - b * x;
    case PriorFamily::Beta:
      if (!(x > 0.0 && x < 1.0)) return kNegInf;
      return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
             (b - 1.0) * std::log1p(-x);
    case PriorFamily::Normal: {
      const double z = (x - a) / b;
      return -0.5 * z * z - std::log(b) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    case PriorFamily::LogitNormal: {
      if (!(x > 0.0 && x < 1.0)) return kNegInf;
      const double z = (logit(x) - a) / b;
      return -0.5 * z * z - std::log(b) - 0.5 * std::log(2.0 * std::numbers::pi) -
             std::log(x) - std::log1p(-x);
    }
    case PriorFamily::InvSqrtUniform: {
      if (!(x > 0.0)) return kNegInf;
      const double w = 1.0 / std::sqrt(x);
      if (w < a || w > b) return kNegInf;
      // |dw/dx| = x^(-3/2) / 2
      return -std::log(b - a) - std::log(2.0) - 1.5 * std::log(x);
    }
  }
  return kNegInf;
}

void Prior::validate(std::string_view name) const {
  const std::string where(name);
  switch (family) {
    case PriorFamily::Fixed:
      if (!std::isfinite(a)) throw std::invalid_argument(where + ": fixed value must be finite");
      return;
    case PriorFamily::Gamma:
    case PriorFamily::Beta:
      if (!(a > 0.0 && b > 0.0)) {
        throw std::invalid_argument(where + ": hyper-parameters must be positive");
      }
      return;
    case PriorFamily::Normal:
    case PriorFamily::LogitNormal:
      if (!(b > 0.0) || !std::isfinite(a)) {
        throw std::invalid_argument(where + ": sd must be positive");
      }
      return;
    case PriorFamily::InvSqrtUniform:
      if (!(a >= 0.0 && b > a)) {
        throw std::invalid_argument(where + ": need 0 <= lower < upper");
      }
      return;
  }
}

std::string_view param_name(Param p) { return kNames[static_cast<std::size_t>(p)]; }

std::optional<Param> param_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (kNames[i] == name) return static_cast<Param>(i);
  }
  return std::nullopt;
}

std::vector<Param> static_params(const ModelSpec& spec, const ObsModelSpec& obs) {
  std::vector<Param> out;
  if (!spec.time_varying_contact()) out.push_back(Param::Beta);
  if (spec.kind == ModelKind::SEIR) out.push_back(Param::Kappa);
  out.push_back(Param::Gamma);
  if (spec.time_varying_contact()) out.push_back(Param::LambdaBeta);
  if (spec.dynamic_reporting()) {
    out.push_back(Param::LambdaRho);
  } else {
    out.push_back(Param::Rho);
  }
  if (obs.family == ObsFamily::NegativeBinomial) out.push_back(Param::Nu);
  return out;
}

std::vector<Param> active_params(const ModelSpec& spec, const ObsModelSpec& obs) {
  auto out = static_params(spec, obs);
  if (spec.time_varying_contact()) out.push_back(Param::LogBeta0);
  if (spec.dynamic_reporting()) out.push_back(Param::Rho0);
  return out;
}

double get_param(const StaticParams& params, Param p) {
  switch (p) {
    case Param::Kappa: return params.kappa;
    case Param::Gamma: return params.gamma;
    case Param::Beta: return params.beta;
    case Param::LambdaBeta: return params.lambda_beta;
    case Param::LambdaRho: return params.lambda_rho;
    case Param::Rho: return params.rho;
    case Param::Nu: return params.nu;
    default: break;
  }
  throw std::invalid_argument("not a static parameter: " + std::string(param_name(p)));
}

void set_param(StaticParams& params, Param p, double value) {
  switch (p) {
    case Param::Kappa: params.kappa = value; return;
    case Param::Gamma: params.gamma = value; return;
    case Param::Beta: params.beta = value; return;
    case Param::LambdaBeta: params.lambda_beta = value; return;
    case Param::LambdaRho: params.lambda_rho = value; return;
    case Param::Rho: params.rho = value; return;
    case Param::Nu: params.nu = value; return;
    default: break;
  }
  throw std::invalid_argument("not a static parameter: " + std::string(param_name(p)));
}

ParamTransform param_transform(Param p) {
  return (p == Param::Rho || p == Param::Rho0) ? ParamTransform::Logit : ParamTransform::Log;
}

double to_unconstrained(Param p, double x) {
  return param_transform(p) == ParamTransform::Logit ? logit(x) : std::log(x);
}

double from_unconstrained(Param p, double u) {
  return param_transform(p) == ParamTransform::Logit ? inv_logit(u) : std::exp(u);
}

double log_jacobian(Param p, double u) {
  if (param_transform(p) == ParamTransform::Log) return u;
  // d/du inv_logit(u) = x (1 - x)
  return -std::log1p(std::exp(-u)) - std::log1p(std::exp(u));
}

InitialStatePrior InitialStatePrior::fixed(std::span<const std::int64_t> counts) {
  InitialStatePrior prior;
  for (auto c : counts) prior.compartments.push_back({{c, 1.0}});
  return prior;
}

bool InitialStatePrior::is_fixed() const {
  for (const auto& support : compartments) {
    if (support.size() != 1) return false;
  }
  return true;
}

CompartmentState InitialStatePrior::sample(Stream& rng) const {
  CompartmentState x;
  for (std::size_t c = 0; c < compartments.size(); ++c) {
    const auto& support = compartments[c];
    if (support.size() == 1) {
      x.counts[c] = support.front().first;
      continue;
    }
    double total = 0.0;
    for (const auto& [value, prob] : support) total += prob;
    double u = rng.uniform() * total;
    std::size_t k = 0;
    while (k + 1 < support.size() && u >= support[k].second) {
      u -= support[k].second;
      ++k;
    }
    x.counts[c] = support[k].first;
  }
  return x;
}

CompartmentState InitialStatePrior::mode() const {
  CompartmentState x;
  for (std::size_t c = 0; c < compartments.size(); ++c) {
    const auto& support = compartments[c];
    std::size_t best = 0;
    for (std::size_t k = 1; k < support.size(); ++k) {
      if (support[k].second > support[best].second) best = k;
    }
    x.counts[c] = support[best].first;
  }
  return x;
}

const Prior& PriorSet::at(Param p) const {
  const auto& entry = entries[static_cast<std::size_t>(p)];
  if (!entry) throw std::invalid_argument("no prior for " + std::string(param_name(p)));
  return *entry;
}

Treatment treatment(Param p, const PriorSet& priors, const ModelSpec& spec,
                    const ObsModelSpec& obs) {
  const Prior& prior = priors.at(p);
  if (prior.is_fixed()) return Treatment::Fixed;
  switch (p) {
    case Param::Kappa:
    case Param::Gamma:
    case Param::Beta:
    case Param::LambdaBeta:
    case Param::LambdaRho:
      return prior.family == PriorFamily::Gamma ? Treatment::Conjugate : Treatment::Jitter;
    case Param::Rho:
      return (obs.family == ObsFamily::Binomial && !spec.dynamic_reporting() &&
              prior.family == PriorFamily::Beta)
                 ? Treatment::Conjugate
                 : Treatment::Jitter;
    default:
      return Treatment::Jitter;
  }
}

void sample_prior(const PriorSet& priors, const ModelSpec& spec, const ObsModelSpec& obs,
                  StaticParams& params, RateState& rates, Stream& rng) {
  for (Param p : static_params(spec, obs)) set_param(params, p, priors.at(p).sample(rng));
  if (spec.time_varying_contact()) rates.log_beta = priors.at(Param::LogBeta0).sample(rng);
  if (spec.dynamic_reporting()) rates.logit_rho = logit(priors.at(Param::Rho0).sample(rng));
}

}  // namespace epismc
