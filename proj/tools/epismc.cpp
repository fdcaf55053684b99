#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epismc/config.hpp"
#include "epismc/csv.hpp"
#include "epismc/lna.hpp"
#include "epismc/pmmh.hpp"
#include "epismc/rng.hpp"
#include "epismc/smc.hpp"

namespace fs = std::filesystem;
using namespace epismc;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> particles;
  std::optional<int> workers;
  std::optional<std::string> data;
  std::string out;
};

RunConfig load(const Common& common) {
  RunConfig c = load_config(common.config);
  if (common.seed) c.algorithm.filter.seed = *common.seed;
  if (common.particles) c.algorithm.filter.particles = *common.particles;
  if (common.workers) c.algorithm.filter.workers = *common.workers;
  if (common.data) c.io.data = *common.data;
  validate_config(c);
  return c;
}

std::string output_path(const RunConfig& c, const std::string& requested,
                        const std::string& fallback) {
  fs::path p = requested.empty() ? fs::path(c.io.output_dir) / fallback : fs::path(requested);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p.string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot open for writing");
  return out;
}

std::vector<Observation> load_data(const RunConfig& c) {
  if (c.io.data.empty()) throw ConfigError("io.data: a data file is required");
  auto data = load_series(c.io.data);
  if (data.size() >= 2 && std::abs((data[1].time - data[0].time) - c.obs_spacing) > 1e-9) {
    throw ConfigError(c.io.data + ": grid spacing differs from observation.spacing");
  }
  return data;
}

OutputHeader header(const RunConfig& c) { return {c.hash, c.algorithm.filter.seed}; }

int cmd_simulate(const Common& common, const std::string& obs_out) {
  const RunConfig c = load(common);
  if (!c.truth.present) throw ConfigError("truth: block required for simulate");
  const SyntheticData sim =
      simulate_data(c.problem, c.truth.params, c.truth.rates, c.truth.t0, c.obs_spacing,
                    c.truth.dtau, c.truth.n_obs, c.algorithm.filter.seed);

  const std::string traj_path = output_path(c, common.out, "trajectory.csv");
  auto traj = open_out(traj_path);
  write_trajectory(traj, header(c), c.problem.model, sim.path);
  const std::string series_path = output_path(c, obs_out, "observations.csv");
  auto obs = open_out(series_path);
  write_series(obs, header(c), sim.series);
  std::cerr << "wrote " << traj_path << " and " << series_path << '\n';
  return 0;
}

int cmd_filter(const Common& common, const std::string& particles_out) {
  const RunConfig c = load(common);
  const auto data = load_data(c);
  const FilterResult result = run_filter(c.problem, data, c.algorithm.filter);
  for (const auto& w : result.output.warnings) std::cerr << "warning: " << w << '\n';
  const std::string path = output_path(c, common.out, "filter_summary.csv");
  auto out = open_out(path);
  write_summary(out, header(c), result.output);
  if (!particles_out.empty()) {
    auto dump = open_out(output_path(c, particles_out, ""));
    write_particles(dump, header(c), c.problem.model, result.particles);
  }
  std::cout << "log_likelihood " << format_double(result.output.log_likelihood) << '\n';
  return 0;
}

std::vector<StaticParams> thin_chain(const Chain& chain, const FilterProblem& problem,
                                     std::size_t burn_in, std::size_t draws) {
  StaticParams base;
  for (Param p : static_params(problem.model, problem.obs)) {
    set_param(base, p, prior_centre(problem.priors.at(p)));
  }
  std::vector<StaticParams> out;
  const std::size_t n = chain.values.size();
  if (n <= burn_in) burn_in = 0;
  const std::size_t step = std::max<std::size_t>(1, (n - burn_in) / std::max<std::size_t>(1, draws));
  for (std::size_t i = burn_in; i < n && out.size() < draws; i += step) {
    out.push_back(chain_params(chain, i, base));
  }
  return out;
}

int cmd_forecast(const Common& common, int horizon, std::size_t windows, const std::string& method,
                 std::optional<std::size_t> iters) {
  if (horizon != 1) throw ConfigError("--horizon: only one-step-ahead forecasts are supported");
  RunConfig c = load(common);
  if (iters) c.algorithm.iterations = *iters;
  const auto data = load_data(c);
  if (windows == 0 || windows >= data.size()) {
    throw ConfigError("--windows: must be between 1 and the number of observations minus 1");
  }
  const std::size_t first = data.size() - windows;
  std::vector<ForecastRow> rows;
  const auto& f = c.algorithm.filter;
  if (method == "pf") {
    const std::size_t m = substeps_per_window(c.obs_spacing, f.dtau);
    const WindowObserver observer = [&](std::size_t i, double time,
                                        std::span<const Particle> particles) {
      if (i + 1 < first || i + 1 >= data.size()) return;
      const Forecast fc = forecast_one_step(particles, c.problem, time, f.dtau, m, f.seed, i + 1,
                                            f.workers);
      rows.push_back({data[i + 1].time, data[i + 1].count, true, fc.summary});
    };
    const std::vector<Observation> fit(data.begin(), data.end() - 1);
    const FilterResult result = run_filter(c.problem, fit, f, observer);
    for (const auto& w : result.output.warnings) std::cerr << "warning: " << w << '\n';
  } else if (method == "lna") {
    require_lna_problem(c.problem);
    const CompartmentState x0 = c.problem.initial_state.mode();
    for (std::size_t t = first; t < data.size(); ++t) {
      const std::vector<Observation> fit(data.begin(), data.begin() + static_cast<long>(t));
      McmcOptions mcmc = c.mcmc_options();
      mcmc.seed = Stream(f.seed, t, 0, stream_tag::kChain)();
      const Chain chain = run_lna_mh(c.problem, fit, mcmc, c.lna_options());
      const auto draws = thin_chain(chain, c.problem, chain.values.size() / 5, f.particles);
      const Forecast fc = lna_forecast_one_step(draws, fit, x0, c.lna_options(), f.seed);
      rows.push_back({data[t].time, data[t].count, true, fc.summary});
    }
  } else {
    throw ConfigError("--method: must be pf or lna");
  }
  const std::string path = output_path(c, common.out, "forecast.csv");
  auto out = open_out(path);
  write_forecast(out, header(c), rows);
  return 0;
}

Chain run_chain(const RunConfig& c, const std::vector<Observation>& data, bool lna,
                std::size_t pilot) {
  McmcOptions options = c.mcmc_options();
  auto run = [&](const McmcOptions& o) {
    return lna ? run_lna_mh(c.problem, data, o, c.lna_options()) : run_pmmh(c.problem, data, o);
  };
  if (pilot > 0) {
    McmcOptions pilot_options = options;
    pilot_options.iterations = pilot;
    pilot_options.seed = Stream(options.seed, 0, 1, stream_tag::kChain)();
    const Chain pilot_chain = run(pilot_options);
    std::cerr << "pilot acceptance " << format_double(pilot_chain.acceptance_rate) << '\n';
    options.proposal_cov = pilot_covariance(pilot_chain, pilot / 5);
    options.start = pilot_chain.values.back();
  }
  return run(options);
}

int cmd_mcmc(const Common& common, std::optional<std::size_t> iters, std::size_t pilot, bool lna) {
  RunConfig c = load(common);
  if (iters) c.algorithm.iterations = *iters;
  if (common.particles) c.algorithm.mcmc_particles = *common.particles;
  if (pilot == 0) pilot = c.algorithm.pilot_iterations;
  const auto data = load_data(c);
  const Chain chain = run_chain(c, data, lna, pilot);
  const std::string path = output_path(c, common.out, lna ? "lna_chain.csv" : "pmmh_chain.csv");
  auto out = open_out(path);
  write_chain(out, header(c), chain);
  std::cout << "acceptance_rate " << format_double(chain.acceptance_rate) << '\n';
  return 0;
}

bool same_output(const FilterOutput& a, const FilterOutput& b) {
  if (a.rows.size() != b.rows.size() || a.log_lik_increments != b.log_lik_increments) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& x = a.rows[i];
    const auto& y = b.rows[i];
    if (x.quantity != y.quantity || x.mean != y.mean || x.q025 != y.q025 || x.q975 != y.q975 ||
        x.ess != y.ess) {
      return false;
    }
  }
  return true;
}

int cmd_bench(const Common& common, std::vector<std::size_t> particles, std::vector<int> workers) {
  const RunConfig c = load(common);
  if (particles.empty()) particles = c.algorithm.bench_particles;
  if (workers.empty()) workers = c.algorithm.bench_workers;
  const auto data = load_data(c);
  std::vector<BenchRow> rows;
  for (std::size_t n : particles) {
    std::optional<FilterOutput> reference;
    double serial = 0.0;
    for (int w : workers) {
      FilterOptions options = c.algorithm.filter;
      options.particles = n;
      options.workers = w;
      const auto start = std::chrono::steady_clock::now();
      const FilterResult result = run_filter(c.problem, data, options);
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (!reference) {
        reference = result.output;
        serial = seconds;
      }
      rows.push_back({n, w, seconds, serial / seconds, same_output(*reference, result.output)});
      std::cerr << "N=" << n << " workers=" << w << " seconds=" << format_double(seconds) << '\n';
    }
  }
  const std::string path = output_path(c, common.out, "bench.csv");
  auto out = open_out(path);
  write_bench(out, header(c), rows);
  return 0;
}

void add_common(CLI::App* cmd, Common& common, bool particles) {
  cmd->add_option("--config", common.config, "Configuration file")->required();
  cmd->add_option("--seed", common.seed, "Override algorithm.seed");
  cmd->add_option("--workers", common.workers, "Worker threads (0: all cores)");
  cmd->add_option("--data", common.data, "Override io.data");
  cmd->add_option("--out", common.out, "Output file");
  if (particles) cmd->add_option("--particles", common.particles, "Override the particle count");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle inference for stochastic epidemic models"};
  app.require_subcommand(1);
  Common common;

  auto* simulate = app.add_subcommand("simulate", "Simulate a path and observations");
  add_common(simulate, common, false);
  std::string obs_out;
  simulate->add_option("--obs-out", obs_out, "Observation CSV");

  auto* filter = app.add_subcommand("filter", "Run the particle filter");
  add_common(filter, common, true);
  std::string particles_out;
  filter->add_option("--particles-out", particles_out, "Final particle cloud CSV");

  auto* forecast = app.add_subcommand("forecast", "One-step-ahead forecasts");
  add_common(forecast, common, true);
  int horizon = 1;
  std::size_t windows = 5;
  std::string method = "pf";
  std::optional<std::size_t> forecast_iters;
  forecast->add_option("--horizon", horizon, "Steps ahead")->default_val(1);
  forecast->add_option("--windows", windows, "Number of final observations to forecast")
      ->default_val(5);
  forecast->add_option("--method", method, "pf or lna")->default_val("pf");
  forecast->add_option("--iters", forecast_iters, "MH iterations per window (lna)");

  auto* pmmh = app.add_subcommand("pmmh", "Pseudo-marginal Metropolis-Hastings");
  add_common(pmmh, common, true);
  std::optional<std::size_t> iters;
  std::size_t pilot = 0;
  pmmh->add_option("--iters", iters, "Iterations");
  pmmh->add_option("--pilot", pilot, "Pilot iterations used to tune the proposal");

  auto* lna = app.add_subcommand("lna-fit", "Metropolis-Hastings with the LNA likelihood");
  add_common(lna, common, false);
  lna->add_option("--iters", iters, "Iterations");
  lna->add_option("--pilot", pilot, "Pilot iterations used to tune the proposal");

  auto* bench = app.add_subcommand("bench", "Time the filter across worker counts");
  add_common(bench, common, false);
  std::vector<std::size_t> particle_list;
  std::vector<int> worker_list;
  bench->add_option("--particles-list", particle_list, "Particle counts")->delimiter(',');
  bench->add_option("--workers-list", worker_list, "Worker counts")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(common, obs_out);
    if (*filter) return cmd_filter(common, particles_out);
    if (*forecast) return cmd_forecast(common, horizon, windows, method, forecast_iters);
    if (*pmmh) return cmd_mcmc(common, iters, pilot, false);
    if (*lna) return cmd_mcmc(common, iters, pilot, true);
    if (*bench) return cmd_bench(common, particle_list, worker_list);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
