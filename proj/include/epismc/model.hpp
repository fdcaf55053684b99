#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epismc/rng.hpp"

namespace epismc {

enum class ModelKind { SIR, SEIR };
enum class ContactMode { Constant, BrownianLog };
enum class ReportingMode { Constant, BrownianLogit };

inline constexpr std::size_t kMaxDim = 3;

/// Per-compartment or per-reaction integer counts. Only the first
/// `n_compartments()` / `n_reactions()` entries are meaningful; the rest
/// stay zero.
using Counts = std::array<std::int64_t, kMaxDim>;
using Rates = std::array<double, kMaxDim>;

/// Compartment structure of a dSIR / dSEIR model.
///
/// SIR state is (S, I) with reactions (infection, removal); SEIR state is
/// (S, E, I) with reactions (exposure, infection, removal). Reaction `r`
/// always consumes one individual from compartment `r`, which is what the
/// truncation rule relies on.
struct ModelSpec {
  ModelKind kind = ModelKind::SIR;
  std::int64_t pop_size = 0;
  ContactMode contact_mode = ContactMode::Constant;
  ReportingMode reporting_mode = ReportingMode::Constant;

  static ModelSpec sir(std::int64_t pop_size,
                       ContactMode contact = ContactMode::Constant,
                       ReportingMode reporting = ReportingMode::Constant);
  static ModelSpec seir(std::int64_t pop_size,
                        ContactMode contact = ContactMode::Constant,
                        ReportingMode reporting = ReportingMode::Constant);

  std::size_t n_compartments() const noexcept { return kind == ModelKind::SIR ? 2 : 3; }
  std::size_t n_reactions() const noexcept { return n_compartments(); }

  /// Entry (reaction, compartment) of the net effect matrix A.
  int net_effect(std::size_t reaction, std::size_t compartment) const noexcept;

  /// Index of the reaction selected by the observation vector P.
  std::size_t observed_reaction() const noexcept { return kind == ModelKind::SIR ? 0 : 1; }

  /// Entry of P (0/1 indicator).
  int obs_matrix(std::size_t reaction) const noexcept {
    return reaction == observed_reaction() ? 1 : 0;
  }

  bool time_varying_contact() const noexcept { return contact_mode == ContactMode::BrownianLog; }
  bool dynamic_reporting() const noexcept { return reporting_mode == ReportingMode::BrownianLogit; }

  std::vector<std::string> compartment_names() const;
  std::vector<std::string> reaction_names() const;
};

struct CompartmentState {
  Counts counts{};
  double time = 0.0;
};

struct IncidenceIncrement {
  Counts events{};
  double t_start = 0.0;
  double t_end = 0.0;
};

/// Log contact rate and logit reporting rate. Which field is live depends
/// on the ModelSpec modes.
struct RateState {
  double log_beta = 0.0;
  double logit_rho = 0.0;
};

struct StaticParams {
  double kappa = 0.0;
  double gamma = 0.0;
  double beta = 0.0;
  double lambda_beta = 1.0;
  double lambda_rho = 1.0;
  double rho = 1.0;
  double nu = 1.0;
};

/// Drift a(x, precision) and diffusion b(x, precision) of a scalar SDE driving
/// a transformed rate.
struct SdeDriver {
  std::string_view name;
  double (*drift)(double x, double precision);
  double (*diffusion)(double x, double precision);
};

/// Built-in drivers. "scaled-brownian" (zero drift, diffusion precision^-1/2)
/// is the default for both the contact and reporting processes.
const SdeDriver& find_sde_driver(std::string_view name);
const SdeDriver& scaled_brownian();

bool is_valid(const CompartmentState& state, const ModelSpec& spec) noexcept;

/// Contact rate in force for the given rate state.
double effective_beta(const StaticParams& params, const RateState& rates,
                      const ModelSpec& spec) noexcept;

Rates hazard(const CompartmentState& state, const StaticParams& params,
             const RateState& rates, const ModelSpec& spec) noexcept;

/// One Euler-Maruyama step of the active rate processes. `z_beta` and
/// `z_rho` are independent standard normal draws; `z_rho` is ignored unless
/// reporting is dynamic.
RateState sde_step(const RateState& rates, const StaticParams& params,
                   const ModelSpec& spec, double dtau, double z_beta,
                   double z_rho = 0.0,
                   const SdeDriver& driver = scaled_brownian()) noexcept;

RateState sde_step(const RateState& rates, const StaticParams& params,
                   const ModelSpec& spec, double dtau, Stream& rng,
                   const SdeDriver& driver = scaled_brownian());

std::int64_t poisson_draw(double mean, Stream& rng);

/// Upper bound on each reaction's count given the counts already assigned to
/// the earlier reactions in the same sub-interval.
std::int64_t reaction_cap(const CompartmentState& state, std::span<const std::int64_t> events,
                          std::size_t reaction, const ModelSpec& spec) noexcept;

/// Poisson draws for every reaction with means `rates * dtau`, truncated in
/// reaction order at the available source count.
IncidenceIncrement draw_increment(const CompartmentState& state, const Rates& rates,
                                  const ModelSpec& spec, double dtau, Stream& rng);

IncidenceIncrement draw_increment(const CompartmentState& state, const StaticParams& params,
                                  const RateState& rates, const ModelSpec& spec, double dtau,
                                  Stream& rng);

/// log P(min(X, cap) = k) for X ~ Po(mean).
double truncated_poisson_logmass(std::int64_t k, double mean, std::int64_t cap);

/// Log mass of `inc` under the truncated sampler of draw_increment with the
/// given hazard.
double increment_logmass(const CompartmentState& state, const IncidenceIncrement& inc,
                         const Rates& rates, const ModelSpec& spec, double dtau);

/// counts + A' events; throws std::logic_error if a count goes negative.
CompartmentState apply_increment(const CompartmentState& state, const IncidenceIncrement& inc,
                                 const ModelSpec& spec);

struct Trajectory {
  std::vector<CompartmentState> states;
  std::vector<RateState> rates;
  std::vector<IncidenceIncrement> increments;
};

Trajectory forward_simulate(const ModelSpec& spec, const StaticParams& params,
                            const CompartmentState& init_state, const RateState& init_rates,
                            double dtau, std::size_t n_steps, Stream& rng);

CompartmentState prevalence_from_incidence(const CompartmentState& init_state,
                                           std::span<const IncidenceIncrement> increments,
                                           const ModelSpec& spec);

/// Sums increments over consecutive blocks of `per_window` sub-intervals.
std::vector<IncidenceIncrement> aggregate_increments(std::span<const IncidenceIncrement> increments,
                                                     std::size_t per_window);

double logit(double p) noexcept;
double inv_logit(double x) noexcept;

}  // namespace epismc
