#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "epismc/model.hpp"
#include "epismc/observation.hpp"
#include "epismc/rng.hpp"

namespace epismc {

enum class PriorFamily { Fixed, Gamma, Beta, Normal, LogitNormal, InvSqrtUniform };

/// A univariate prior. Gamma is shape-rate (density ∝ x^(a-1) e^(-b x)).
/// LogitNormal places a normal on logit(x); InvSqrtUniform places a uniform
/// on 1/sqrt(x).
struct Prior {
  PriorFamily family = PriorFamily::Fixed;
  double a = 0.0;
  double b = 0.0;

  static Prior fixed(double value) { return {PriorFamily::Fixed, value, 0.0}; }
  static Prior gamma(double shape, double rate) { return {PriorFamily::Gamma, shape, rate}; }
  static Prior beta(double a, double b) { return {PriorFamily::Beta, a, b}; }
  static Prior normal(double mean, double sd) { return {PriorFamily::Normal, mean, sd}; }
  static Prior logit_normal(double mean, double sd) { return {PriorFamily::LogitNormal, mean, sd}; }
  static Prior inv_sqrt_uniform(double lower, double upper) {
    return {PriorFamily::InvSqrtUniform, lower, upper};
  }

  bool is_fixed() const noexcept { return family == PriorFamily::Fixed; }
  double sample(Stream& rng) const;
  /// Log density on the natural scale (0 for fixed priors at their value).
  double log_density(double x) const;
  /// Throws std::invalid_argument on non-positive hyper-parameters.
  void validate(std::string_view name) const;
};

double sample_gamma(double shape, double rate, Stream& rng);
double sample_beta(double a, double b, Stream& rng);

/// Parameters that can carry a prior. LogBeta0 and Rho0 are the initial
/// values of the dynamic contact and reporting processes.
enum class Param : std::size_t {
  Kappa,
  Gamma,
  Beta,
  LambdaBeta,
  LambdaRho,
  Rho,
  Nu,
  LogBeta0,
  Rho0,
  Count
};
inline constexpr std::size_t kParamCount = static_cast<std::size_t>(Param::Count);

std::string_view param_name(Param p);
std::optional<Param> param_from_name(std::string_view name);

/// Static parameters of the model (excludes LogBeta0 and Rho0).
std::vector<Param> static_params(const ModelSpec& spec, const ObsModelSpec& obs);
/// Static parameters plus initial conditions of the rate processes.
std::vector<Param> active_params(const ModelSpec& spec, const ObsModelSpec& obs);

double get_param(const StaticParams& params, Param p);
void set_param(StaticParams& params, Param p, double value);

enum class ParamTransform { Log, Logit };
ParamTransform param_transform(Param p);
double to_unconstrained(Param p, double x);
double from_unconstrained(Param p, double u);
/// log |dx/du| at unconstrained value u.
double log_jacobian(Param p, double u);

/// Product of independent categorical priors, one per compartment. A fixed
/// initial state is the special case with one support point each.
struct InitialStatePrior {
  std::vector<std::vector<std::pair<std::int64_t, double>>> compartments;

  static InitialStatePrior fixed(std::span<const std::int64_t> counts);
  bool is_fixed() const;
  CompartmentState sample(Stream& rng) const;
  CompartmentState mode() const;
};

struct PriorSet {
  std::array<std::optional<Prior>, kParamCount> entries;

  bool has(Param p) const { return entries[static_cast<std::size_t>(p)].has_value(); }
  const Prior& at(Param p) const;
  void set(Param p, Prior prior) { entries[static_cast<std::size_t>(p)] = prior; }
};

/// How the particle filter treats each static parameter.
enum class Treatment { Fixed, Conjugate, Jitter };
Treatment treatment(Param p, const PriorSet& priors, const ModelSpec& spec,
                    const ObsModelSpec& obs);

/// Draws static parameters and the initial rate state from the priors.
void sample_prior(const PriorSet& priors, const ModelSpec& spec, const ObsModelSpec& obs,
                  StaticParams& params, RateState& rates, Stream& rng);

}  // namespace epismc
