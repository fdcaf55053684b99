#include <doctest.h>

#include <cmath>
#include <vector>

#include "epismc/lna.hpp"
#include "oracles.hpp"

using namespace epismc;

namespace {

StaticParams seir_params(double beta, double kappa, double gamma, double rho = 0.7,
                         double nu = 25.0) {
  StaticParams p;
  p.beta = beta;
  p.kappa = kappa;
  p.gamma = gamma;
  p.rho = rho;
  p.nu = nu;
  return p;
}

FilterProblem ebola_like() {
  FilterProblem problem;
  problem.model = ModelSpec::seir(44351);
  problem.obs = ObsModelSpec{ObsFamily::NegativeBinomial, false};
  problem.priors.set(Param::Beta, Prior::gamma(4, 1e5));
  problem.priors.set(Param::Kappa, Prior::gamma(10, 10));
  problem.priors.set(Param::Gamma, Prior::gamma(10, 10));
  problem.priors.set(Param::Rho, Prior::beta(7, 3));
  problem.priors.set(Param::Nu, Prior::gamma(25, 1));
  const std::int64_t x0[] = {44326, 15, 10};
  problem.initial_state = InitialStatePrior::fixed(x0);
  return problem;
}

double min_eigenvalue(const Mat3& m) {
  return Eigen::SelfAdjointEigenSolver<Mat3>(m).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("restart state") {
  const LnaState st = LnaState::reset(Vec3(1.0, 2.0, 3.0));
  CHECK(st.eta == Vec3(1.0, 2.0, 3.0));
  CHECK(st.G == Mat3::Identity());
  CHECK(st.V == Mat3::Zero());
}

TEST_CASE("incidence hazard") {
  const Counts x0{100, 10, 5};
  const auto theta = seir_params(0.01, 0.5, 0.2);
  SUBCASE("hand-evaluated point") {
    // s = 80, e = 10 + 20 - 8 = 22, i = 5 + 8 - 3 = 10
    const Vec3 h = incidence_hazard(Vec3(20.0, 8.0, 3.0), x0, theta);
    CHECK(h[0] == doctest::Approx(8.0));
    CHECK(h[1] == doctest::Approx(11.0));
    CHECK(h[2] == doctest::Approx(2.0));
  }
  SUBCASE("Ebola-scale point") {
    const Counts big{44326, 15, 10};
    const auto prior_means = seir_params(2.0 / 50000.0, 5.0 / 4.6, 1.0);
    // s = 44226, e = 25, i = 20
    const Vec3 h = incidence_hazard(Vec3(100.0, 90.0, 80.0), big, prior_means);
    CHECK(h[0] == doctest::Approx(35.3808));
    CHECK(h[1] == doctest::Approx(25.0 * 5.0 / 4.6));
    CHECK(h[2] == doctest::Approx(20.0));
    const Vec3 h0 = incidence_hazard(Vec3::Zero(), big, prior_means);
    CHECK(h0[0] == doctest::Approx(2.0 / 50000.0 * 44326.0 * 10.0));
    CHECK(h0[1] == doctest::Approx(15.0 * 5.0 / 4.6));
    CHECK(h0[2] == doctest::Approx(10.0));
  }
  SUBCASE("exhausted susceptibles stop exposure") {
    const Vec3 h = incidence_hazard(Vec3(100.0, 50.0, 10.0), x0, theta);
    CHECK(h[0] == 0.0);
    CHECK(h[1] == doctest::Approx(30.0));
  }
  SUBCASE("overshoot is clamped") {
    const Vec3 h = incidence_hazard(Vec3(120.0, 50.0, 70.0), x0, theta);
    CHECK(h[0] == 0.0);
    CHECK(h[2] == 0.0);
    CHECK(h.minCoeff() >= 0.0);
  }
}

TEST_CASE("jacobian matches finite differences") {
  const Counts x0{1000, 20, 30};
  const auto theta = seir_params(3e-4, 0.9, 1.3);
  Stream rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const double n0 = 900.0 * rng.uniform();
    const double n1 = (n0 + 20.0) * rng.uniform();
    const double n2 = (n1 + 30.0) * rng.uniform();
    const Vec3 n(n0, n1, n2);
    const Mat3 F = jacobian(n, x0, theta);
    const double eps = 1e-5;
    for (int j = 0; j < 3; ++j) {
      Vec3 up = n;
      Vec3 down = n;
      up[j] += eps;
      down[j] -= eps;
      const Vec3 fd = (incidence_hazard(up, x0, theta) - incidence_hazard(down, x0, theta)) / (2 * eps);
      for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(F(i, j) - fd[i]) < 1e-4 * std::max(1.0, std::abs(fd[i])));
      }
    }
  }
  SUBCASE("closed form at the origin") {
    const Mat3 F = jacobian(Vec3::Zero(), x0, theta);
    CHECK(F(0, 0) == doctest::Approx(-3e-4 * 30.0));
    CHECK(F(0, 1) == doctest::Approx(3e-4 * 1000.0));
    CHECK(F(0, 2) == doctest::Approx(-3e-4 * 1000.0));
    CHECK(F(1, 0) == doctest::Approx(0.9));
    CHECK(F(1, 1) == doctest::Approx(-0.9));
    CHECK(F(1, 2) == 0.0);
    CHECK(F(2, 0) == 0.0);
    CHECK(F(2, 1) == doctest::Approx(1.3));
    CHECK(F(2, 2) == doctest::Approx(-1.3));
  }
  SUBCASE("zero contact rate gives an empty exposure row") {
    const Mat3 F = jacobian(Vec3(10.0, 5.0, 2.0), x0, seir_params(0.0, 0.9, 1.3));
    CHECK(F.row(0).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("an empty compartment contributes no partials") {
    const Mat3 F = jacobian(Vec3(1000.0, 500.0, 10.0), x0, theta);
    CHECK(F(0, 0) == 0.0);
    CHECK(F(0, 1) == 0.0);
    CHECK(F(0, 2) == 0.0);
  }
}

TEST_CASE("integration") {
  const Counts x0{0, 0, 10};
  const auto theta = seir_params(0.0, 1.0, 1.0);

  SUBCASE("zero duration returns the state") {
    const LnaState st = LnaState::reset(Vec3(1.0, 2.0, 3.0));
    const LnaState out = integrate_lna(st, theta, x0, 0.0, 0.01);
    CHECK(out.eta == st.eta);
    CHECK(out.G == st.G);
    CHECK(out.V == st.V);
  }
  SUBCASE("invalid steps are rejected") {
    const LnaState st;
    CHECK_THROWS_AS(integrate_lna(st, theta, x0, 1.0, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(integrate_lna(st, theta, x0, -1.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(integrate_lna(st, theta, x0, 1.0, 0.0), std::invalid_argument);
  }
  SUBCASE("pure removal follows exponential decay with first-order error") {
    for (double t : {0.25, 1.0, 2.0, 5.0}) {
      const double exact = 10.0 * (1.0 - std::exp(-t));
      const double coarse = integrate_lna(LnaState{}, theta, x0, t, 0.01).eta[2] - exact;
      const double fine = integrate_lna(LnaState{}, theta, x0, t, 0.005).eta[2] - exact;
      CHECK(std::abs(coarse) < 1e-2 * exact);
      CHECK(coarse / fine == doctest::Approx(2.0).epsilon(0.1));
    }
  }
  SUBCASE("residual variance of pure removal is binomial and not monotone") {
    // V = i0 e^{-t} (1 - e^{-t}) peaks at t = log 2 and then decays.
    auto variance = [&](double t) {
      const double coarse = integrate_lna(LnaState{}, theta, x0, t, 2e-4).V(2, 2);
      const double fine = integrate_lna(LnaState{}, theta, x0, t, 1e-4).V(2, 2);
      return 2.0 * fine - coarse;
    };
    for (double t : {0.5, 1.0, 3.0}) {
      CHECK(variance(t) == doctest::Approx(10.0 * std::exp(-t) * (1.0 - std::exp(-t))).epsilon(1e-5));
    }
    CHECK(variance(3.0) < variance(1.0));
  }
}

TEST_CASE("linear incubation has the exact binomial variance") {
  const double e0 = 10.0;
  const double kappa = 0.8;
  const Counts x0{0, 10, 0};
  const auto theta = seir_params(0.0, kappa, 0.0);
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    const LnaState coarse = integrate_lna(LnaState{}, theta, x0, t, 1e-4);
    const LnaState fine = integrate_lna(LnaState{}, theta, x0, t, 5e-5);
    const double v = 2.0 * fine.V(1, 1) - coarse.V(1, 1);
    const double eta = 2.0 * fine.eta[1] - coarse.eta[1];
    const double p = std::exp(-kappa * t);
    CHECK(std::abs(v - e0 * p * (1.0 - p)) < 1e-6);
    CHECK(std::abs(eta - e0 * (1.0 - p)) < 1e-6);
    CHECK(fine.G(1, 1) == doctest::Approx(p).epsilon(1e-3));
  }
}

TEST_CASE("residual covariance stays positive semi-definite") {
  const Counts x0{44326, 15, 10};
  const auto theta = seir_params(4e-5, 1.087, 1.0);
  LnaState st;
  for (int week = 0; week < 40; ++week) {
    st = integrate_lna(st, theta, x0, 1.0, 0.01);
    CHECK(min_eigenvalue(st.V) > -1e-6 * std::max(1.0, st.V.trace()));
    CHECK((st.V - st.V.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(st.eta[0] > 0.5 * 44326.0);
}

TEST_CASE("forward filter") {
  const CompartmentState x0{{44326, 15, 10}, 0.0};
  const auto theta = seir_params(4e-5, 1.087, 1.0);
  std::vector<Observation> data;
  for (int w = 1; w <= 10; ++w) data.push_back({static_cast<double>(w), 10 + 5 * w});

  SUBCASE("deterministic latent gives the observation-noise variance") {
    LnaOptions options;
    options.deterministic_latent = true;
    const auto out = lna_forward_filter(theta, data, x0, options);
    REQUIRE(out.windows.size() == data.size());
    double prev = 0.0;
    LnaState st;
    for (std::size_t w = 0; w < data.size(); ++w) {
      st = integrate_lna(LnaState::reset(st.eta), theta, x0.counts, 1.0, 0.01);
      const double mu = theta.rho * (st.eta[1] - prev);
      prev = st.eta[1];
      CHECK(out.windows[w].predictive_mean == doctest::Approx(mu));
      CHECK(out.windows[w].predictive_var == doctest::Approx(mu + mu * mu / theta.nu));
    }
  }
  SUBCASE("likelihood is the sum of Gaussian predictive terms") {
    const auto out = lna_forward_filter(theta, data, x0);
    double total = 0.0;
    for (std::size_t w = 0; w < data.size(); ++w) {
      const auto& row = out.windows[w];
      CHECK(row.predictive_var > row.predictive_mean);
      const double ll = oracle::normal_logpdf(static_cast<double>(data[w].count),
                                              row.predictive_mean, row.predictive_var);
      CHECK(row.log_lik == doctest::Approx(ll));
      CHECK(min_eigenvalue(row.filtered_cov) > -1e-6 * std::max(1.0, row.filtered_cov.trace()));
      total += ll;
    }
    CHECK(out.log_likelihood == doctest::Approx(total));
  }
  SUBCASE("first window update matches direct Gaussian conditioning") {
    const std::vector<Observation> one = {{1.0, 30}};
    const auto out = lna_forward_filter(theta, one, x0);
    const LnaState st = integrate_lna(LnaState{}, theta, x0.counts, 1.0, 0.01);
    // Joint Gaussian of (N_end, Y) with N_start = 0 known.
    const double mu = theta.rho * st.eta[1];
    const double var_y = theta.rho * theta.rho * st.V(1, 1) + mu + mu * mu / theta.nu;
    const Vec3 cov_ny = theta.rho * st.V.col(1);
    const Vec3 mean = st.eta + cov_ny * (30.0 - mu) / var_y;
    const Mat3 cov = st.V - cov_ny * cov_ny.transpose() / var_y;
    CHECK((out.windows[0].filtered_mean - mean).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((out.windows[0].filtered_cov - cov).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("empty data") {
    CHECK(lna_forward_filter(theta, {}, x0).log_likelihood == 0.0);
  }
}

TEST_CASE("LNA fitting") {
  SUBCASE("only SEIR with negative binomial reporting is accepted") {
    FilterProblem sir;
    sir.model = ModelSpec::sir(100);
    sir.obs = ObsModelSpec{ObsFamily::NegativeBinomial, false};
    CHECK_THROWS_AS(require_lna_problem(sir), std::invalid_argument);
    auto binomial = ebola_like();
    binomial.obs.family = ObsFamily::Binomial;
    CHECK_THROWS_AS(require_lna_problem(binomial), std::invalid_argument);
    CHECK_NOTHROW(require_lna_problem(ebola_like()));
  }
  SUBCASE("zero proposal covariance holds the chain at its start") {
    const auto problem = ebola_like();
    McmcOptions options;
    options.iterations = 20;
    options.proposal_cov = Eigen::MatrixXd::Zero(5, 5);
    const std::vector<Observation> data = {{1.0, 10}, {2.0, 14}};
    const Chain chain = run_lna_mh(problem, data, options);
    CHECK(chain.acceptance_rate == 1.0);
    CHECK(chain.values.back()[0] == doctest::Approx(4e-5));
    CHECK(std::isfinite(chain.log_posterior.back()));
  }
  SUBCASE("empty data sample the prior") {
    const auto problem = ebola_like();
    McmcOptions options;
    options.iterations = 30000;
    options.seed = 5;
    options.proposal_cov = Eigen::VectorXd::Constant(5, 0.1).asDiagonal();
    const Chain chain = run_lna_mh(problem, {}, options);
    double gamma_mean = 0.0;
    for (std::size_t i = 5000; i < chain.values.size(); ++i) gamma_mean += chain.values[i][2];
    gamma_mean /= static_cast<double>(chain.values.size() - 5000);
    CHECK(chain.params[2] == Param::Gamma);
    CHECK(gamma_mean == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("LNA forecast") {
  const CompartmentState x0{{44326, 15, 10}, 0.0};
  std::vector<Observation> data;
  for (int w = 1; w <= 6; ++w) data.push_back({static_cast<double>(w), 10 + 4 * w});
  std::vector<StaticParams> draws(2000, seir_params(4e-5, 1.087, 1.0));
  const Forecast f = lna_forecast_one_step(draws, data, x0, LnaOptions{}, 3);
  REQUIRE(f.samples.size() == draws.size());
  std::vector<double> ys;
  for (auto y : f.samples) {
    CHECK(y >= 0);
    ys.push_back(static_cast<double>(y));
  }
  // The forecast mean equals the one-step predictive mean after the last
  // observation, up to rounding of the latent count.
  auto extended = data;
  extended.push_back({7.0, 0});
  const double predicted = lna_forward_filter(draws[0], extended, x0).windows.back().predictive_mean;
  const auto m = oracle::mean_se(ys);
  CHECK(std::abs(m.mean - predicted) < 4.0 * m.se + 0.5);

  const Forecast again = lna_forecast_one_step(draws, data, x0, LnaOptions{}, 3);
  CHECK(again.samples == f.samples);
  CHECK_THROWS_AS(lna_forecast_one_step({}, data, x0, LnaOptions{}, 3), std::invalid_argument);
}
