#include "epismc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <omp.h>

namespace epismc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int resolve_workers(int workers) { return workers > 0 ? workers : omp_get_max_threads(); }

std::string collapse_message(std::size_t index, double time) {
  std::ostringstream msg;
  msg << "all particle weights are zero at observation " << index + 1 << " (time " << time
      << ")";
  return msg.str();
}

struct JitterPlan {
  std::vector<Param> params;
  bool empty() const { return params.empty(); }
};

JitterPlan jitter_plan(const FilterProblem& problem) {
  JitterPlan plan;
  for (Param p : static_params(problem.model, problem.obs)) {
    if (treatment(p, problem.priors, problem.model, problem.obs) == Treatment::Jitter) {
      plan.params.push_back(p);
    }
  }
  return plan;
}

double observed_rho(const Particle& particle, const ModelSpec& spec) {
  return spec.dynamic_reporting() ? inv_logit(particle.rates.logit_rho) : particle.params.rho;
}

void add_summary(FilterOutput& out, double time, const std::string& quantity,
                 std::span<const double> values, double ess_value) {
  static constexpr double kProbs[] = {0.025, 0.975};
  const Summary s = filtering_summary(values, kProbs);
  out.rows.push_back({time, quantity, s.mean, s.quantiles[0], s.quantiles[1], ess_value});
}

void summarise_window(FilterOutput& out, double time, std::span<const Particle> particles,
                      const FilterProblem& problem, double ess_value, double log_lik_inc) {
  const auto& spec = problem.model;
  std::vector<double> values(particles.size());
  auto emit = [&](const std::string& name, auto&& getter) {
    for (std::size_t k = 0; k < particles.size(); ++k) values[k] = getter(particles[k]);
    add_summary(out, time, name, values, ess_value);
  };
  for (Param p : static_params(spec, problem.obs)) {
    if (problem.priors.at(p).is_fixed()) continue;
    emit(std::string(param_name(p)), [p](const Particle& q) { return get_param(q.params, p); });
  }
  if (spec.time_varying_contact()) {
    emit("beta_t", [](const Particle& q) { return std::exp(q.rates.log_beta); });
  }
  if (spec.dynamic_reporting()) {
    emit("rho_t", [](const Particle& q) { return inv_logit(q.rates.logit_rho); });
  }
  const auto compartments = spec.compartment_names();
  for (std::size_t c = 0; c < spec.n_compartments(); ++c) {
    emit(compartments[c], [c](const Particle& q) { return static_cast<double>(q.state.counts[c]); });
  }
  const auto reactions = spec.reaction_names();
  for (std::size_t r = 0; r < spec.n_reactions(); ++r) {
    emit("incidence_" + reactions[r],
         [r](const Particle& q) { return static_cast<double>(q.window_incidence[r]); });
  }
  out.rows.push_back({time, "log_lik_increment", log_lik_inc, log_lik_inc, log_lik_inc, ess_value});
}

}  // namespace

WeightCollapse::WeightCollapse(std::size_t index, double time)
    : NumericalError(collapse_message(index, time)), observation_index(index) {}

std::size_t substeps_per_window(double spacing, double dtau) {
  if (!(dtau > 0.0) || !(spacing > 0.0)) {
    throw std::invalid_argument("time step and observation spacing must be positive");
  }
  const double ratio = spacing / dtau;
  const double m = std::round(ratio);
  if (m < 1.0 || std::abs(ratio - m) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << "dtau " << dtau << " does not divide the observation spacing " << spacing;
    throw std::invalid_argument(msg.str());
  }
  return static_cast<std::size_t>(m);
}

double liu_west_shrinkage(double discount) { return (3.0 * discount - 1.0) / (2.0 * discount); }

LiuWestKernel::LiuWestKernel(const Eigen::MatrixXd& population, double shrinkage, double scale)
    : shrinkage_(shrinkage) {
  const auto n = static_cast<double>(population.rows());
  const Eigen::Index d = population.cols();
  mean_ = population.colwise().mean().transpose();
  const Eigen::MatrixXd centred = population.rowwise() - mean_.transpose();
  Eigen::MatrixXd cov = (centred.transpose() * centred) / n;
  cov += 1e-10 * Eigen::MatrixXd::Identity(d, d);
  noise_chol_ = Eigen::MatrixXd(Eigen::LLT<Eigen::MatrixXd>(cov).matrixL()) * scale;
}

Eigen::VectorXd LiuWestKernel::apply(const Eigen::VectorXd& value, Stream& rng) const {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(value.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return shrinkage_ * value + (1.0 - shrinkage_) * mean_ + noise_chol_ * z;
}

Eigen::MatrixXd liu_west_jitter(const Eigen::MatrixXd& population, double shrinkage,
                                double scale, Stream& rng) {
  const LiuWestKernel kernel(population, shrinkage, scale);
  Eigen::MatrixXd out(population.rows(), population.cols());
  for (Eigen::Index k = 0; k < population.rows(); ++k) {
    out.row(k) = kernel.apply(population.row(k).transpose(), rng).transpose();
  }
  return out;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, Stream& rng) {
  const std::size_t n = weights.size();
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("systematic_resample: all weights are zero");
  std::vector<std::size_t> idx(n);
  const double step = total / static_cast<double>(n);
  double position = rng.uniform() * step;
  double cumulative = weights[0];
  std::size_t k = 0;
  for (std::size_t j = 0; j < n; ++j) {
    while (position >= cumulative && k + 1 < n) cumulative += weights[++k];
    idx[j] = k;
    position += step;
  }
  return idx;
}

std::vector<std::size_t> multinomial_resample(std::span<const double> weights, Stream& rng) {
  const std::size_t n = weights.size();
  std::vector<double> cumulative(n);
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  const double total = cumulative.back();
  if (!(total > 0.0)) throw std::invalid_argument("multinomial_resample: all weights are zero");
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) {
    const double u = rng.uniform() * total;
    i = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                 cumulative.begin());
    i = std::min(i, n - 1);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

double ess(std::span<const double> weights) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double w : weights) {
    sum += w;
    sum_sq += w * w;
  }
  return sum * sum / sum_sq;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double below = values[lo];
  if (lo + 1 >= values.size()) return below;
  const double above = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return below + (h - static_cast<double>(lo)) * (above - below);
}

Summary filtering_summary(std::span<const double> values, std::span<const double> probs) {
  Summary out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  for (double p : probs) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    out.quantiles.push_back(sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]));
  }
  return out;
}

FilterResult run_filter(const FilterProblem& problem, const std::vector<Observation>& data,
                        const FilterOptions& options, const WindowObserver& observer) {
  validate_series(data);
  const auto& spec = problem.model;
  const auto& obs_spec = problem.obs;
  const std::size_t n = options.particles;
  if (n < 2) throw std::invalid_argument("run_filter: need at least 2 particles");
  double spacing = options.obs_spacing;
  if (spacing <= 0.0) spacing = data.size() > 1 ? data[1].time - data[0].time : data[0].time;
  const std::size_t m = substeps_per_window(spacing, options.dtau);
  const double dtau = options.dtau;
  const int workers = resolve_workers(options.workers);
  const ConjugatePlan conj = ConjugatePlan::from(problem.priors, spec, obs_spec);
  const JitterPlan jitter = jitter_plan(problem);
  const double shrinkage = liu_west_shrinkage(options.discount);
  const double scale = std::sqrt(std::max(0.0, 1.0 - shrinkage * shrinkage));
  const std::uint64_t seed = options.seed;
  const double t0 = data.front().time - spacing;

  FilterResult result;
  FilterOutput& out = result.output;
  if (!jitter.empty() && obs_spec.family == ObsFamily::NegativeBinomial &&
      n < kJitterDegeneracyThreshold) {
    std::ostringstream msg;
    msg << "N = " << n << " is below " << kJitterDegeneracyThreshold
        << " particles; jittered observation parameters may degenerate";
    out.warnings.push_back(msg.str());
  }

  std::vector<Particle> particles(n);
  const SufficientStats stats0 = init_stats(problem.priors, conj);
#pragma omp parallel for num_threads(workers) schedule(static)
  for (std::size_t k = 0; k < n; ++k) {
    Stream rng(seed, 0, k, stream_tag::kInit);
    Particle& p = particles[k];
    p.state = problem.initial_state.sample(rng);
    p.state.time = t0;
    sample_prior(problem.priors, spec, obs_spec, p.params, p.rates, rng);
    p.stats = stats0;
  }

  std::vector<Particle> next(n);
  std::vector<double> weights(n);
  const std::size_t obs_reaction = spec.observed_reaction();

  for (std::size_t w = 0; w < data.size(); ++w) {
    const Observation& y = data[w];
    std::optional<LiuWestKernel> kernel;
    if (!jitter.empty()) {
      Eigen::MatrixXd population(n, jitter.params.size());
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t d = 0; d < jitter.params.size(); ++d) {
          const Param p = jitter.params[d];
          population(k, d) = to_unconstrained(p, get_param(particles[k].params, p));
        }
      }
      kernel.emplace(population, shrinkage, scale);
    }

#pragma omp parallel num_threads(workers)
    {
      std::vector<RateState> path(m + 1);
      Eigen::VectorXd phi(jitter.params.size());
#pragma omp for schedule(static)
      for (std::size_t k = 0; k < n; ++k) {
        Stream rng(seed, w + 1, k, stream_tag::kPropagate);
        Particle& p = particles[k];
        if (kernel) {
          for (std::size_t d = 0; d < jitter.params.size(); ++d) {
            phi[d] = to_unconstrained(jitter.params[d], get_param(p.params, jitter.params[d]));
          }
          const Eigen::VectorXd moved = kernel->apply(phi, rng);
          for (std::size_t d = 0; d < jitter.params.size(); ++d) {
            set_param(p.params, jitter.params[d], from_unconstrained(jitter.params[d], moved[d]));
          }
        }
        WindowStats ws;
        path[0] = p.rates;
        if (spec.time_varying_contact() || spec.dynamic_reporting()) {
          std::normal_distribution<double> normal;
          for (std::size_t j = 0; j < m; ++j) {
            const double zb = spec.time_varying_contact() ? normal(rng) : 0.0;
            const double zr = spec.dynamic_reporting() ? normal(rng) : 0.0;
            path[j + 1] = sde_step(path[j], p.params, spec, dtau, zb, zr);
            ws.add_rate_step(path[j], path[j + 1], dtau);
          }
        } else {
          std::fill(path.begin() + 1, path.end(), p.rates);
        }
        p.rates = path[m];
        const double rho = observed_rho(p, spec);
        const WindowTarget target{y.count, rho, p.params.nu};
        const WindowResult res = propagate_window(
            p.state, path, p.params, target, spec, obs_spec, dtau, m, options.proposal, rng,
            [&](const CompartmentState& x, const IncidenceIncrement& inc) {
              ws.add_step(x, inc, spec, dtau);
            });
        const std::int64_t source = res.totals[obs_reaction];
        ws.add_observation(y.count, source);
        p.state = res.end_state;
        p.window_incidence = res.totals;
        p.pending = ws;
        const double obs_ll = obs_logpmf(y.count, source, rho, p.params.nu, obs_spec);
        p.log_weight = obs_ll == kNegInf ? kNegInf : res.log_p - res.log_q + obs_ll;
        if (std::isnan(p.log_weight)) p.log_weight = kNegInf;
      }
    }

    double max_lw = kNegInf;
    for (const auto& p : particles) max_lw = std::max(max_lw, p.log_weight);
    if (max_lw == kNegInf) throw WeightCollapse(w, y.time);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      weights[k] = std::exp(particles[k].log_weight - max_lw);
      total += weights[k];
    }
    const double log_lik_inc = max_lw + std::log(total / static_cast<double>(n));
    for (auto& wk : weights) wk /= total;
    const double ess_value = ess(weights);
    out.times.push_back(y.time);
    out.ess.push_back(ess_value);
    out.log_lik_increments.push_back(log_lik_inc);
    out.log_likelihood += log_lik_inc;

    Stream resample_rng(seed, w + 1, 0, stream_tag::kResample);
    const auto idx = options.resampler == Resampler::Systematic
                         ? systematic_resample(weights, resample_rng)
                         : multinomial_resample(weights, resample_rng);

#pragma omp parallel for num_threads(workers) schedule(static)
    for (std::size_t k = 0; k < n; ++k) {
      Particle p = particles[idx[k]];
      p.stats = update_stats(p.stats, p.pending, spec);
      p.pending = WindowStats{};
      p.log_weight = 0.0;
      if (conj.any()) {
        Stream rng(seed, w + 1, k, stream_tag::kRejuvenate);
        sample_conjugate(p.stats, conj, p.params, rng);
      }
      next[k] = p;
    }
    particles.swap(next);

    if (options.summaries) summarise_window(out, y.time, particles, problem, ess_value, log_lik_inc);
    if (observer) observer(w, y.time, particles);
  }
  result.particles = std::move(particles);
  return result;
}

ForecastSummary summarise_forecast(std::span<const std::int64_t> samples) {
  std::vector<double> values(samples.begin(), samples.end());
  static constexpr double kProbs[] = {0.0, 0.25, 0.5, 0.75, 1.0, 0.025, 0.975};
  const Summary s = filtering_summary(values, kProbs);
  return {s.quantiles[0], s.quantiles[1], s.quantiles[2], s.quantiles[3],
          s.quantiles[4], s.quantiles[5], s.quantiles[6]};
}

Forecast forecast_one_step(std::span<const Particle> particles, const FilterProblem& problem,
                           double start_time, double dtau, std::size_t m, std::uint64_t seed,
                           std::size_t window_index, int workers) {
  const auto& spec = problem.model;
  const std::size_t n = particles.size();
  Forecast out;
  out.samples.resize(n);
  const int threads = resolve_workers(workers);
#pragma omp parallel num_threads(threads)
  {
    std::vector<RateState> path(m + 1);
#pragma omp for schedule(static)
    for (std::size_t k = 0; k < n; ++k) {
      Stream rng(seed, window_index, k, stream_tag::kForecast);
      const Particle& p = particles[k];
      path[0] = p.rates;
      std::normal_distribution<double> normal;
      for (std::size_t j = 0; j < m; ++j) {
        const double zb = spec.time_varying_contact() ? normal(rng) : 0.0;
        const double zr = spec.dynamic_reporting() ? normal(rng) : 0.0;
        path[j + 1] = sde_step(path[j], p.params, spec, dtau, zb, zr);
      }
      CompartmentState start = p.state;
      start.time = start_time;
      const double rho = spec.dynamic_reporting() ? inv_logit(path[m].logit_rho) : p.params.rho;
      const WindowResult res =
          propagate_window(start, path, p.params, WindowTarget{0, rho, p.params.nu}, spec,
                           problem.obs, dtau, m, Proposal::Blind, rng,
                           [](const CompartmentState&, const IncidenceIncrement&) {});
      out.samples[k] =
          sample_obs(res.totals[spec.observed_reaction()], rho, p.params.nu, problem.obs, rng);
    }
  }
  out.summary = summarise_forecast(out.samples);
  return out;
}

SyntheticData simulate_data(const FilterProblem& problem, const StaticParams& params,
                            const RateState& rates, double t0, double spacing, double dtau,
                            std::size_t n_obs, std::uint64_t seed) {
  const auto& spec = problem.model;
  Stream rng(seed, 0, 0, stream_tag::kSimulate);
  CompartmentState x0 = problem.initial_state.sample(rng);
  x0.time = t0;
  const std::size_t m = substeps_per_window(spacing, dtau);
  SyntheticData out;
  out.path = forward_simulate(spec, params, x0, rates, dtau, m * n_obs, rng);
  const auto windows = aggregate_increments(out.path.increments, m);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const double rho = spec.dynamic_reporting() ? inv_logit(out.path.rates[(w + 1) * m].logit_rho)
                                                : params.rho;
    const auto source = windows[w].events[spec.observed_reaction()];
    out.series.push_back({t0 + static_cast<double>(w + 1) * spacing,
                          sample_obs(source, rho, params.nu, problem.obs, rng)});
  }
  return out;
}

}  // namespace epismc
