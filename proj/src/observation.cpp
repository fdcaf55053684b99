#include "epismc/observation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace epismc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::domain_error("reporting rate outside [0, 1]: " + std::to_string(rho));
  }
}

void check_nu(double nu) {
  if (!(nu > 0.0)) throw std::domain_error("over-dispersion must be positive");
}

}  // namespace

void validate_series(const std::vector<Observation>& series) {
  if (series.empty()) throw std::invalid_argument("observation series is empty");
  for (const auto& obs : series) {
    if (obs.count < 0) throw std::invalid_argument("negative observation count");
  }
  if (series.size() < 2) return;
  const double spacing = series[1].time - series[0].time;
  if (!(spacing > 0.0)) throw std::invalid_argument("observation times must increase");
  for (std::size_t i = 1; i < series.size(); ++i) {
    const double gap = series[i].time - series[i - 1].time;
    if (std::abs(gap - spacing) > 1e-9 * std::max(1.0, std::abs(spacing))) {
      throw std::invalid_argument("observation grid is irregular at row " + std::to_string(i + 1));
    }
  }
}

NegBinShape negbin_shape(double mu, double nu) { return {nu, nu / (nu + mu)}; }

double obs_logpmf(std::int64_t y, std::int64_t reported_source, double rho, double nu,
                  const ObsModelSpec& spec) {
  check_rho(rho);
  if (y < 0) return kNegInf;
  const double yd = static_cast<double>(y);
  if (spec.family == ObsFamily::Binomial) {
    const std::int64_t n = reported_source;
    if (y > n) return kNegInf;
    if (rho == 0.0) return y == 0 ? 0.0 : kNegInf;
    if (rho == 1.0) return y == n ? 0.0 : kNegInf;
    const double nd = static_cast<double>(n);
    return std::lgamma(nd + 1.0) - std::lgamma(yd + 1.0) - std::lgamma(nd - yd + 1.0) +
           yd * std::log(rho) + (nd - yd) * std::log1p(-rho);
  }
  check_nu(nu);
  const double mu = rho * static_cast<double>(reported_source);
  if (!(mu > 0.0)) return y == 0 ? 0.0 : kNegInf;
  const auto [r, p] = negbin_shape(mu, nu);
  // log(1 - p) = log(mu / (nu + mu)), written to avoid cancellation.
  return std::lgamma(yd + r) - std::lgamma(r) - std::lgamma(yd + 1.0) + r * std::log(p) +
         yd * (std::log(mu) - std::log(nu + mu));
}

std::int64_t sample_obs(std::int64_t reported_source, double rho, double nu,
                        const ObsModelSpec& spec, Stream& rng) {
  check_rho(rho);
  if (reported_source <= 0) return 0;
  if (spec.family == ObsFamily::Binomial) {
    std::binomial_distribution<std::int64_t> dist(reported_source, rho);
    return dist(rng);
  }
  check_nu(nu);
  const double mu = rho * static_cast<double>(reported_source);
  if (!(mu > 0.0)) return 0;
  // Gamma-Poisson mixture; std::negative_binomial_distribution needs integer r.
  std::gamma_distribution<double> mixing(nu, mu / nu);
  return poisson_draw(mixing(rng), rng);
}

GaussianObsMoments obs_gaussian_moments(double incidence_so_far, double predicted_remaining,
                                        double rho, double nu, const ObsModelSpec& spec) {
  const double expected_source = incidence_so_far + predicted_remaining;
  const double mean = rho * expected_source;
  double variance = spec.family == ObsFamily::Binomial ? rho * (1.0 - rho) * expected_source
                                                       : mean + mean * mean / nu;
  return {mean, std::max(variance, kObsVarianceFloor)};
}

}  // namespace epismc
