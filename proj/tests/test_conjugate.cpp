#include <doctest.h>

#include <cmath>
#include <vector>

#include "epismc/conjugate.hpp"
#include "oracles.hpp"

using namespace epismc;

namespace {

PriorSet synthetic_priors() {
  PriorSet priors;
  priors.set(Param::Gamma, Prior::gamma(11, 20));
  priors.set(Param::LambdaBeta, Prior::gamma(15, 0.14));
  priors.set(Param::Rho, Prior::beta(90, 15));
  priors.set(Param::LogBeta0, Prior::normal(-6.5, 0.5));
  return priors;
}

const ObsModelSpec kBinomial{ObsFamily::Binomial, false};

}  // namespace

TEST_CASE("initial statistics equal the prior hyper-parameters") {
  const auto spec = ModelSpec::sir(767, ContactMode::BrownianLog);
  const auto priors = synthetic_priors();
  const auto plan = ConjugatePlan::from(priors, spec, kBinomial);
  CHECK(plan.gamma);
  CHECK(plan.lambda_beta);
  CHECK(plan.rho);
  CHECK_FALSE(plan.beta);
  CHECK_FALSE(plan.kappa);
  const auto t = init_stats(priors, plan);
  CHECK(t.gamma.shape() == 11.0);
  CHECK(t.gamma.rate() == 20.0);
  CHECK(t.lambda_beta.shape() == 15.0);
  CHECK(t.lambda_beta.rate() == 0.14);
  CHECK(t.rho.alpha() == 90.0);
  CHECK(t.rho.beta() == 15.0);
}

TEST_CASE("window statistics") {
  const auto spec = ModelSpec::sir(100, ContactMode::BrownianLog);
  const double dtau = 0.1;

  SUBCASE("constant infectives and three removals") {
    WindowStats w;
    for (int j = 0; j < 10; ++j) {
      IncidenceIncrement inc;
      inc.events = {0, j < 3 ? 1 : 0, 0};
      w.add_step({{50, 5, 0}, 0.0}, inc, spec, dtau);
    }
    CHECK(w.events[1] == 3);
    CHECK(w.exposure[1] == doctest::Approx(5.0));
    CHECK(w.exposure[0] == doctest::Approx(50.0 * 5.0 * 10.0 * dtau));
    auto t = update_stats(init_stats(synthetic_priors(),
                                     ConjugatePlan::from(synthetic_priors(), spec, kBinomial)),
                          w, spec);
    CHECK(t.gamma.shape() == 14.0);
    CHECK(t.gamma.rate() == doctest::Approx(25.0));
  }
  SUBCASE("equal rate increments") {
    WindowStats w;
    const double c = 0.03;
    RateState b{-6.0, 0.0};
    for (int j = 0; j < 10; ++j) {
      RateState next{b.log_beta + c, 0.0};
      w.add_rate_step(b, next, dtau);
      b = next;
    }
    CHECK(w.n_increments == 10.0);
    CHECK(w.beta_sum_sq == doctest::Approx(10.0 * c * c / dtau));
  }
  SUBCASE("zero increments move only the precision shape") {
    WindowStats w;
    for (int j = 0; j < 100; ++j) w.add_rate_step({-6.0, 0.0}, {-6.0, 0.0}, dtau);
    auto priors = synthetic_priors();
    auto t = update_stats(init_stats(priors, ConjugatePlan::from(priors, spec, kBinomial)), w, spec);
    CHECK(t.lambda_beta.shape() == 65.0);
    CHECK(t.lambda_beta.rate() == 0.14);
    CHECK(t.lambda_beta.shape() / t.lambda_beta.rate() == doctest::Approx(65.0 / 0.14));
  }
  SUBCASE("reporting counts") {
    WindowStats w;
    w.add_observation(9, 10);
    w.add_observation(3, 4);
    auto priors = synthetic_priors();
    auto t = update_stats(init_stats(priors, ConjugatePlan::from(priors, spec, kBinomial)), w, spec);
    CHECK(t.rho.alpha() == 102.0);
    CHECK(t.rho.beta() == 17.0);
  }
}

TEST_CASE("per-window accumulation equals one batch accumulation") {
  const auto spec = ModelSpec::seir(500, ContactMode::BrownianLog);
  StaticParams p{0.8, 0.5, 0.0, 50.0};
  Stream rng(4);
  const auto path = forward_simulate(spec, p, {{480, 10, 10}, 0.0}, {-5.0, 0.0}, 0.1, 60, rng);
  const std::span<const CompartmentState> states(path.states.data(), 60);
  const WindowStats batch = window_stats(states, path.increments, path.rates, spec, 0.1);
  WindowStats windows;
  for (std::size_t w = 0; w < 6; ++w) {
    windows += window_stats(states.subspan(w * 10, 10),
                            std::span(path.increments).subspan(w * 10, 10),
                            std::span(path.rates).subspan(w * 10, 11), spec, 0.1);
  }
  CHECK(batch.events == windows.events);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(batch.exposure[r] == doctest::Approx(windows.exposure[r]).epsilon(1e-12));
  }
  CHECK(batch.n_increments == windows.n_increments);
  CHECK(batch.beta_sum_sq == doctest::Approx(windows.beta_sum_sq).epsilon(1e-12));
}

TEST_CASE("conjugate draws") {
  auto priors = synthetic_priors();
  const auto spec = ModelSpec::sir(767, ContactMode::BrownianLog);
  const auto plan = ConjugatePlan::from(priors, spec, kBinomial);
  const auto t = init_stats(priors, plan);
  Stream rng(8);
  const std::size_t n = 1000000;
  std::vector<double> gammas(n);
  bool valid = true;
  for (auto& g : gammas) {
    StaticParams p;
    sample_conjugate(t, plan, p, rng);
    g = p.gamma;
    valid = valid && p.gamma > 0.0 && p.lambda_beta > 0.0 && p.rho > 0.0 && p.rho < 1.0;
  }
  CHECK(valid);
  const auto ms = oracle::mean_se(gammas);
  CHECK(std::abs(ms.mean - 0.55) < 3.0 * ms.se);
}

TEST_CASE("conjugate posterior mean matches grid integration") {
  // Fully observed removals of an SIR path; the posterior of gamma is
  // integrated on a grid from prior times Poisson likelihoods.
  const auto spec = ModelSpec::sir(200);
  StaticParams p{0.0, 0.5, 0.004};
  Stream rng(21);
  const auto path = forward_simulate(spec, p, {{190, 10, 0}, 0.0}, {}, 0.1, 50, rng);
  const std::span<const CompartmentState> states(path.states.data(), 50);
  const WindowStats w = window_stats(states, path.increments, {}, spec, 0.1);
  PriorSet priors;
  priors.set(Param::Gamma, Prior::gamma(11, 20));
  priors.set(Param::Beta, Prior::fixed(0.004));
  priors.set(Param::Rho, Prior::fixed(1.0));
  const auto plan = ConjugatePlan::from(priors, spec, kBinomial);
  const auto t = update_stats(init_stats(priors, plan), w, spec);

  const std::size_t grid = 20000;
  const double hi = 3.0;
  double norm = 0.0;
  double first = 0.0;
  for (std::size_t g = 1; g < grid; ++g) {
    const double x = hi * static_cast<double>(g) / grid;
    double log_density = oracle::gamma_logpdf(x, 11, 20);
    for (std::size_t j = 0; j < 50; ++j) {
      const double mean = x * static_cast<double>(path.states[j].counts[1]) * 0.1;
      log_density += std::log(oracle::poisson_pmf(path.increments[j].events[1], mean));
    }
    const double d = std::exp(log_density);
    norm += d;
    first += x * d;
  }
  const double grid_mean = first / norm;
  CHECK(t.gamma.shape() / t.gamma.rate() == doctest::Approx(grid_mean).epsilon(0.01));
}
