#include <doctest.h>

#include <cmath>
#include <vector>

#include "epismc/pmmh.hpp"
#include "oracles.hpp"

using namespace epismc;

namespace {

const ObsModelSpec kBinomial{ObsFamily::Binomial, false};

FilterProblem tiny_sir_free_gamma() {
  FilterProblem problem;
  problem.model = ModelSpec::sir(6);
  problem.obs = kBinomial;
  problem.priors.set(Param::Beta, Prior::fixed(0.15));
  problem.priors.set(Param::Gamma, Prior::gamma(6, 10));
  problem.priors.set(Param::Rho, Prior::fixed(0.8));
  const std::int64_t x0[] = {5, 1};
  problem.initial_state = InitialStatePrior::fixed(x0);
  return problem;
}

std::vector<double> column(const Chain& chain, std::size_t d, std::size_t burn = 0) {
  std::vector<double> out;
  for (std::size_t i = burn; i < chain.values.size(); ++i) out.push_back(chain.values[i][d]);
  return out;
}

// Standard error of a correlated sample mean from 20 batch means.
double batch_se(const std::vector<double>& xs) {
  const std::size_t batches = 20;
  const std::size_t len = xs.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += xs[i];
    means.push_back(s / static_cast<double>(len));
  }
  return oracle::mean_se(means).se;
}

}  // namespace

TEST_CASE("random-walk Metropolis") {
  SUBCASE("zero proposal covariance gives a constant chain") {
    Eigen::VectorXd start(2);
    start << 0.3, -1.0;
    const auto rw = random_walk_metropolis(
        start, [](const Eigen::VectorXd&, std::size_t) { return 0.0; }, Eigen::MatrixXd::Zero(2, 2),
        100, 1);
    CHECK(rw.acceptance_rate == 1.0);
    for (const auto& s : rw.samples) CHECK(s == start);
  }
  SUBCASE("samples a bivariate Gaussian") {
    Eigen::Vector2d mu(1.0, -2.0);
    Eigen::Matrix2d sigma;
    sigma << 1.0, 0.6, 0.6, 2.0;
    const Eigen::Matrix2d prec = sigma.inverse();
    const LogTarget target = [&](const Eigen::VectorXd& u, std::size_t) {
      const Eigen::Vector2d r = u - mu;
      return -0.5 * r.dot(prec * r);
    };
    const auto rw = random_walk_metropolis(Eigen::Vector2d::Zero(), target,
                                           sigma * (2.38 * 2.38 / 2.0), 60000, 7);
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 1000; i < rw.samples.size(); ++i) {
      x.push_back(rw.samples[i][0]);
      y.push_back(rw.samples[i][1]);
    }
    const auto mx = oracle::mean_se(x);
    const auto my = oracle::mean_se(y);
    CHECK(std::abs(mx.mean - 1.0) < 4.0 * batch_se(x));
    CHECK(std::abs(my.mean + 2.0) < 4.0 * batch_se(y));
    CHECK(mx.var == doctest::Approx(1.0).epsilon(0.1));
    CHECK(my.var == doctest::Approx(2.0).epsilon(0.1));
    CHECK(rw.acceptance_rate > 0.2);
    CHECK(rw.acceptance_rate < 0.5);
  }
  SUBCASE("a chain stuck at an impossible start rejects impossible proposals") {
    const auto rw = random_walk_metropolis(
        Eigen::VectorXd::Zero(1),
        [](const Eigen::VectorXd&, std::size_t) { return -INFINITY; },
        Eigen::MatrixXd::Identity(1, 1), 50, 2);
    CHECK(rw.acceptance_rate == 0.0);
    for (double lt : rw.log_target) CHECK(lt == -INFINITY);
  }
  SUBCASE("bad covariances are rejected") {
    const LogTarget flat = [](const Eigen::VectorXd&, std::size_t) { return 0.0; };
    CHECK_THROWS_AS(random_walk_metropolis(Eigen::VectorXd::Zero(2), flat,
                                           Eigen::MatrixXd::Identity(3, 3), 10, 1),
                    std::invalid_argument);
    Eigen::Matrix2d indefinite;
    indefinite << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(random_walk_metropolis(Eigen::VectorXd::Zero(2), flat, indefinite, 10, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("prior centres") {
  CHECK(prior_centre(Prior::gamma(11, 20)) == doctest::Approx(0.55));
  CHECK(prior_centre(Prior::beta(90, 15)) == doctest::Approx(90.0 / 105.0));
  CHECK(prior_centre(Prior::normal(-6.5, 0.5)) == -6.5);
  CHECK(prior_centre(Prior::fixed(3.0)) == 3.0);
  CHECK(prior_centre(Prior::logit_normal(0.0, 1.0)) == doctest::Approx(0.5));
  CHECK(prior_centre(Prior::inv_sqrt_uniform(0.0, 0.5)) == doctest::Approx(16.0));
}

TEST_CASE("free parameters skip fixed priors") {
  const auto problem = tiny_sir_free_gamma();
  const auto free = free_params(problem);
  REQUIRE(free.size() == 1);
  CHECK(free[0] == Param::Gamma);
  const auto fixed = with_fixed_params(problem, StaticParams{0.0, 0.7, 0.2, 1.0, 1.0, 0.5, 1.0});
  CHECK(fixed.priors.at(Param::Gamma).is_fixed());
  CHECK(fixed.priors.at(Param::Gamma).a == 0.7);
  CHECK(fixed.priors.at(Param::Rho).a == 0.5);
}

TEST_CASE("pilot covariance") {
  Chain chain;
  chain.params = {Param::Gamma, Param::Rho};
  const std::vector<std::vector<double>> u = {{0.0, 1.0}, {1.0, -1.0}, {2.0, 0.0}, {3.0, 2.0}};
  for (const auto& row : u) {
    chain.values.push_back({std::exp(row[0]), inv_logit(row[1])});
  }
  // Sample covariance of the rows above: var 5/3 and 5/3, covariance 2/3.
  const Eigen::MatrixXd cov = pilot_covariance(chain);
  const double scale = 2.38 * 2.38 / 2.0;
  CHECK(cov(0, 0) == doctest::Approx(5.0 / 3.0 * scale));
  CHECK(cov(1, 1) == doctest::Approx(5.0 / 3.0 * scale));
  CHECK(cov(0, 1) == doctest::Approx(2.0 / 3.0 * scale));
  CHECK(cov(1, 0) == doctest::Approx(cov(0, 1)));
  CHECK_THROWS_AS(pilot_covariance(chain, 3), std::invalid_argument);

  const StaticParams psi = chain_params(chain, 2, StaticParams{});
  CHECK(psi.gamma == doctest::Approx(std::exp(2.0)));
  CHECK(psi.rho == doctest::Approx(0.5));
}

TEST_CASE("empty data leave the prior") {
  FilterProblem problem = tiny_sir_free_gamma();
  problem.priors.set(Param::Rho, Prior::beta(8, 2));
  McmcOptions options;
  options.iterations = 40000;
  options.particles = 10;
  options.dtau = 0.25;
  options.seed = 3;
  options.proposal_cov = Eigen::Vector2d(1.0 / 6.0, 0.6).asDiagonal();
  const Chain chain = run_pmmh(problem, {}, options);
  REQUIRE(chain.params.size() == 2);
  const auto g = column(chain, 0, 2000);
  const auto r = column(chain, 1, 2000);
  CHECK(std::abs(oracle::mean_se(g).mean - 0.6) < 4.0 * batch_se(g));
  CHECK(std::abs(oracle::mean_se(r).mean - 0.8) < 4.0 * batch_se(r));
  CHECK(oracle::mean_se(g).var == doctest::Approx(0.06).epsilon(0.15));
  CHECK(oracle::mean_se(r).var == doctest::Approx(16.0 / 1100.0).epsilon(0.15));
}

TEST_CASE("likelihood estimator variance falls with the particle count") {
  const auto problem = tiny_sir_free_gamma();
  const StaticParams psi{0.0, 0.6, 0.15, 1.0, 1.0, 0.8, 1.0};
  const std::vector<Observation> data = {{1.0, 1}, {2.0, 2}};
  auto spread = [&](std::size_t n) {
    std::vector<double> ll;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
      ll.push_back(estimate_loglik(problem, psi, data, n, 0.25, 500 + rep, Proposal::Blind, 1));
    }
    return oracle::mean_se(ll).var;
  };
  const double v20 = spread(20);
  const double v400 = spread(400);
  INFO("var(N=20) " << v20 << " var(N=400) " << v400);
  CHECK(v400 < v20 / 5.0);
  CHECK(estimate_loglik(problem, psi, {}, 10, 0.25, 1) == 0.0);
}

TEST_CASE("pseudo-marginal chain targets the exact posterior") {
  const auto problem = tiny_sir_free_gamma();
  const std::vector<Observation> data = {{1.0, 1}, {2.0, 2}};
  const oracle::Reporting reporting{false, 0.8, 1.0};
  McmcOptions options;
  options.iterations = 20000;
  options.particles = 40;
  options.dtau = 0.25;
  options.seed = 11;
  options.proposal_cov = Eigen::MatrixXd::Constant(1, 1, 0.3);
  const Chain exact = run_mh(
      problem,
      [&](const StaticParams& psi, std::size_t) {
        const oracle::Model model{false, psi.beta, 0.0, psi.gamma};
        return oracle::enumerate_loglik(model, {5, 1, 0}, {1, 2}, 4, 0.25, reporting, 0);
      },
      options);
  options.seed = 12;
  const Chain noisy = run_pmmh(problem, data, options);
  const auto a = column(exact, 0, 1000);
  const auto b = column(noisy, 0, 1000);
  const double se = std::hypot(batch_se(a), batch_se(b));
  INFO("exact mean " << oracle::mean_se(a).mean << " pseudo-marginal mean "
                     << oracle::mean_se(b).mean << " se " << se);
  CHECK(std::abs(oracle::mean_se(a).mean - oracle::mean_se(b).mean) < 4.0 * se);
  CHECK(oracle::mean_se(b).var == doctest::Approx(oracle::mean_se(a).var).epsilon(0.25));

  // Thinned far enough that successive draws are close to independent.
  std::vector<double> thin_a;
  std::vector<double> thin_b;
  for (std::size_t i = 0; i < a.size(); i += 40) {
    thin_a.push_back(a[i]);
    thin_b.push_back(b[i]);
  }
  const double p = oracle::ks_two_sample_pvalue(thin_a, thin_b);
  INFO("KS p-value " << p);
  CHECK(p > 0.01);
}

TEST_CASE("two-sample KS oracle") {
  Stream rng(5);
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> shifted;
  for (int i = 0; i < 400; ++i) {
    x.push_back(rng.uniform());
    y.push_back(rng.uniform());
    shifted.push_back(rng.uniform() + 0.3);
  }
  CHECK(oracle::ks_two_sample_pvalue(x, y) > 0.01);
  CHECK(oracle::ks_two_sample_pvalue(x, shifted) < 1e-6);
}
