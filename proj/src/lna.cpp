#include "epismc/lna.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "epismc/rng.hpp"

namespace epismc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Compartments {
  double s, e, i;
  bool s_pos, e_pos, i_pos;
};

Compartments compartments(const Vec3& n, const Counts& x0) {
  const double s = static_cast<double>(x0[0]) - n[0];
  const double e = static_cast<double>(x0[1]) + n[0] - n[1];
  const double i = static_cast<double>(x0[2]) + n[1] - n[2];
  return {std::max(s, 0.0), std::max(e, 0.0), std::max(i, 0.0), s > 0.0, e > 0.0, i > 0.0};
}

bool all_finite(const LnaState& st) {
  return st.eta.allFinite() && st.G.allFinite() && st.V.allFinite();
}

std::size_t ode_steps(double duration, double ode_step) {
  if (!(ode_step > 0.0) || !(duration >= 0.0) || !std::isfinite(duration)) {
    throw std::invalid_argument("LNA: need a positive ode_step and a non-negative duration");
  }
  if (duration == 0.0) return 0;
  const double ratio = duration / ode_step;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("LNA: ode_step " + std::to_string(ode_step) +
                                " does not divide the window length " + std::to_string(duration));
  }
  return static_cast<std::size_t>(rounded);
}

double gaussian_logpdf(double y, double mean, double var) {
  const double z = y - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + z * z / var);
}

struct WindowMoments {
  Vec3 mean_end;       // E N at the window end
  Mat3 cov_end;        // Var N at the window end
  Vec3 inc_mean;       // E of the window increment
  Mat3 inc_cov;        // Var of the window increment
  Mat3 cross;          // Cov(N_end, increment)
};

WindowMoments propagate(const Vec3& m, const Mat3& C, const StaticParams& theta, const Counts& x0,
                        double spacing, const LnaOptions& options) {
  LnaState st = integrate_lna(LnaState::reset(m), theta, x0, spacing, options.ode_step);
  WindowMoments w;
  w.mean_end = st.eta;
  w.inc_mean = st.eta - m;
  if (options.deterministic_latent) {
    w.cov_end = Mat3::Zero();
    w.inc_cov = Mat3::Zero();
    w.cross = Mat3::Zero();
    return w;
  }
  const Mat3 GmI = st.G - Mat3::Identity();
  w.cov_end = st.G * C * st.G.transpose() + st.V;
  w.inc_cov = GmI * C * GmI.transpose() + st.V;
  w.cross = st.G * C * GmI.transpose() + st.V;
  return w;
}

double infer_spacing(const std::vector<Observation>& data, double spacing) {
  if (spacing > 0.0) return spacing;
  if (data.size() >= 2) return data[1].time - data[0].time;
  return data.empty() ? 1.0 : data[0].time;
}

}  // namespace

LnaState LnaState::reset(const Vec3& eta) {
  LnaState st;
  st.eta = eta;
  return st;
}

Vec3 incidence_hazard(const Vec3& n, const Counts& x0, const StaticParams& theta) {
  const Compartments c = compartments(n, x0);
  return {theta.beta * c.s * c.i, theta.kappa * c.e, theta.gamma * c.i};
}

Mat3 jacobian(const Vec3& n, const Counts& x0, const StaticParams& theta) {
  const Compartments c = compartments(n, x0);
  // ds/dn = (-1, 0, 0), de/dn = (1, -1, 0), di/dn = (0, 1, -1)
  const double ds = c.s_pos ? 1.0 : 0.0;
  const double de = c.e_pos ? 1.0 : 0.0;
  const double di = c.i_pos ? 1.0 : 0.0;
  Mat3 F;
  F << -theta.beta * c.i * ds, theta.beta * c.s * di, -theta.beta * c.s * di,
      theta.kappa * de, -theta.kappa * de, 0.0,
      0.0, theta.gamma * di, -theta.gamma * di;
  return F;
}

LnaState integrate_lna(const LnaState& state, const StaticParams& theta, const Counts& x0,
                       double duration, double ode_step) {
  const std::size_t steps = ode_steps(duration, ode_step);
  LnaState st = state;
  if (steps == 0) return st;
  const double dt = duration / static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const Vec3 h = incidence_hazard(st.eta, x0, theta);
    const Mat3 F = jacobian(st.eta, x0, theta);
    const Mat3 FV = F * st.V;
    st.eta += dt * h;
    st.G += dt * (F * st.G);
    st.V += dt * (FV + FV.transpose() + Mat3(h.asDiagonal()));
    st.V = 0.5 * (st.V + st.V.transpose()).eval();
    if (!all_finite(st)) {
      throw NumericalError("LNA integration produced a non-finite value at step " +
                           std::to_string(k + 1));
    }
  }
  return st;
}

LnaFilterResult lna_forward_filter(const StaticParams& psi, const std::vector<Observation>& data,
                                   const CompartmentState& x0, const LnaOptions& options) {
  LnaFilterResult out;
  if (data.empty()) return out;
  validate_series(data);
  if (!(psi.nu > 0.0)) throw std::domain_error("LNA: nu must be positive");
  const double spacing = infer_spacing(data, options.obs_spacing);
  const Vec3 P(0.0, 1.0, 0.0);
  const double rho = psi.rho;

  Vec3 m = Vec3::Zero();
  Mat3 C = Mat3::Zero();
  for (const auto& obs : data) {
    const WindowMoments w = propagate(m, C, psi, x0.counts, spacing, options);
    const double mu = rho * P.dot(w.inc_mean);
    const double noise = std::max(mu, 0.0) + mu * mu / psi.nu;
    const double S = std::max(rho * rho * P.dot(w.inc_cov * P) + noise, kObsVarianceFloor);
    const double y = static_cast<double>(obs.count);
    const double ll = gaussian_logpdf(y, mu, S);

    const Vec3 K = rho * (w.cross * P) / S;
    m = w.mean_end + K * (y - mu);
    C = w.cov_end - S * K * K.transpose();
    C = 0.5 * (C + C.transpose()).eval();
    if (!m.allFinite() || !C.allFinite() || !std::isfinite(ll)) {
      throw NumericalError("LNA filter produced a non-finite value at t=" +
                           std::to_string(obs.time));
    }

    out.log_likelihood += ll;
    LnaWindow row;
    row.time = obs.time;
    row.predictive_mean = mu;
    row.predictive_var = S;
    row.log_lik = ll;
    row.filtered_mean = m;
    row.filtered_cov = C;
    out.windows.push_back(row);
  }
  return out;
}

void require_lna_problem(const FilterProblem& problem) {
  if (problem.model.kind != ModelKind::SEIR || problem.model.time_varying_contact() ||
      problem.model.dynamic_reporting() || problem.obs.family != ObsFamily::NegativeBinomial) {
    throw std::invalid_argument(
        "LNA fit needs an SEIR model with constant contact, constant reporting and negative "
        "binomial observations");
  }
  if (!problem.initial_state.is_fixed()) {
    throw std::invalid_argument("LNA fit needs a fixed initial state");
  }
}

Chain run_lna_mh(const FilterProblem& problem, const std::vector<Observation>& data,
                 const McmcOptions& options, const LnaOptions& lna) {
  require_lna_problem(problem);
  const CompartmentState x0 = problem.initial_state.mode();
  LnaOptions opts = lna;
  if (opts.obs_spacing <= 0.0) opts.obs_spacing = options.obs_spacing;
  const LogLikelihood loglik = [&](const StaticParams& psi, std::size_t) {
    try {
      return lna_forward_filter(psi, data, x0, opts).log_likelihood;
    } catch (const NumericalError&) {
      return kNegInf;
    }
  };
  return run_mh(problem, loglik, options);
}

Forecast lna_forecast_one_step(const std::vector<StaticParams>& draws,
                               const std::vector<Observation>& data, const CompartmentState& x0,
                               const LnaOptions& options, std::uint64_t seed) {
  if (draws.empty()) throw std::invalid_argument("LNA forecast: no parameter draws");
  const double spacing = infer_spacing(data, options.obs_spacing);
  const ObsModelSpec obs_spec{ObsFamily::NegativeBinomial, false};
  Forecast out;
  out.samples.reserve(draws.size());
  for (std::size_t k = 0; k < draws.size(); ++k) {
    const StaticParams& psi = draws[k];
    Stream rng(seed, data.size(), k, stream_tag::kForecast);
    std::normal_distribution<double> normal;
    Vec3 m = Vec3::Zero();
    Mat3 C = Mat3::Zero();
    if (!data.empty()) {
      const auto filt = lna_forward_filter(psi, data, x0, options);
      m = filt.windows.back().filtered_mean;
      C = filt.windows.back().filtered_cov;
    }
    auto draw_mvn = [&](const Vec3& mean, const Mat3& cov) {
      Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
      const Vec3 root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      Vec3 z(normal(rng), normal(rng), normal(rng));
      return Vec3(mean + eig.eigenvectors() * root.cwiseProduct(z));
    };
    const Vec3 n_now = options.deterministic_latent ? m : draw_mvn(m, C);
    const LnaState st =
        integrate_lna(LnaState::reset(n_now), psi, x0.counts, spacing, options.ode_step);
    const Vec3 inc_mean = st.eta - n_now;
    const Vec3 inc = options.deterministic_latent ? inc_mean : draw_mvn(inc_mean, st.V);
    const auto infections = static_cast<std::int64_t>(std::llround(std::max(inc[1], 0.0)));
    out.samples.push_back(sample_obs(infections, psi.rho, psi.nu, obs_spec, rng));
  }
  out.summary = summarise_forecast(out.samples);
  return out;
}

}  // namespace epismc
