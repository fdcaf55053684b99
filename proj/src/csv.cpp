#include "epismc/csv.hpp"

#include <charconv>
#include <cmath>

namespace epismc {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_header(std::ostream& out, const OutputHeader& header) {
  char hash[17];
  const auto res = std::to_chars(hash, hash + 16, header.config_hash, 16);
  const std::string digits(hash, res.ptr);
  out << "# config_hash=" << std::string(16 - digits.size(), '0') << digits
      << " seed=" << header.seed << '\n';
}

void write_trajectory(std::ostream& out, const OutputHeader& header, const ModelSpec& spec,
                      const Trajectory& path, std::size_t stride) {
  write_header(out, header);
  if (stride == 0) stride = 1;
  out << "time";
  for (const auto& c : spec.compartment_names()) out << ',' << c;
  for (const auto& r : spec.reaction_names()) out << ",cum_" << r;
  if (spec.time_varying_contact()) out << ",log_beta";
  if (spec.dynamic_reporting()) out << ",logit_rho";
  out << '\n';
  Counts cumulative{};
  const std::size_t n = path.states.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0) {
      for (std::size_t r = 0; r < spec.n_reactions(); ++r) {
        cumulative[r] += path.increments[j - 1].events[r];
      }
    }
    if (j % stride != 0 && j + 1 != n) continue;
    const auto& x = path.states[j];
    out << format_double(x.time);
    for (std::size_t c = 0; c < spec.n_compartments(); ++c) out << ',' << x.counts[c];
    for (std::size_t r = 0; r < spec.n_reactions(); ++r) out << ',' << cumulative[r];
    if (spec.time_varying_contact()) out << ',' << format_double(path.rates[j].log_beta);
    if (spec.dynamic_reporting()) out << ',' << format_double(path.rates[j].logit_rho);
    out << '\n';
  }
}

void write_series(std::ostream& out, const OutputHeader& header,
                  const std::vector<Observation>& series) {
  write_header(out, header);
  out << "time,count\n";
  for (const auto& obs : series) out << format_double(obs.time) << ',' << obs.count << '\n';
}

void write_summary(std::ostream& out, const OutputHeader& header, const FilterOutput& output) {
  write_header(out, header);
  out << "time,quantity,mean,q025,q975,ess\n";
  for (const auto& row : output.rows) {
    out << format_double(row.time) << ',' << row.quantity << ',' << format_double(row.mean) << ','
        << format_double(row.q025) << ',' << format_double(row.q975) << ','
        << format_double(row.ess) << '\n';
  }
}

void write_particles(std::ostream& out, const OutputHeader& header, const ModelSpec& spec,
                     std::span<const Particle> particles) {
  write_header(out, header);
  out << "index,time";
  for (const auto& c : spec.compartment_names()) out << ',' << c;
  out << ",log_beta,logit_rho,kappa,gamma,beta,lambda_beta,lambda_rho,rho,nu\n";
  for (std::size_t k = 0; k < particles.size(); ++k) {
    const Particle& p = particles[k];
    out << k << ',' << format_double(p.state.time);
    for (std::size_t c = 0; c < spec.n_compartments(); ++c) out << ',' << p.state.counts[c];
    out << ',' << format_double(p.rates.log_beta) << ',' << format_double(p.rates.logit_rho);
    const StaticParams& s = p.params;
    for (double v : {s.kappa, s.gamma, s.beta, s.lambda_beta, s.lambda_rho, s.rho, s.nu}) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

void write_chain(std::ostream& out, const OutputHeader& header, const Chain& chain) {
  write_header(out, header);
  out << "iteration";
  for (Param p : chain.params) out << ',' << param_name(p);
  out << ",log_posterior,accepted\n";
  for (std::size_t i = 0; i < chain.values.size(); ++i) {
    out << i;
    for (double v : chain.values[i]) out << ',' << format_double(v);
    out << ',' << format_double(chain.log_posterior[i]) << ',' << (chain.accepted[i] ? 1 : 0)
        << '\n';
  }
}

void write_forecast(std::ostream& out, const OutputHeader& header,
                    const std::vector<ForecastRow>& rows) {
  write_header(out, header);
  out << "time,observed,min,q1,median,q3,max,q025,q975\n";
  for (const auto& row : rows) {
    const auto& s = row.summary;
    out << format_double(row.time) << ',';
    if (row.has_observed) out << row.observed;
    for (double v : {s.min, s.q1, s.median, s.q3, s.max, s.q025, s.q975}) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

void write_bench(std::ostream& out, const OutputHeader& header, const std::vector<BenchRow>& rows) {
  write_header(out, header);
  out << "particles,workers,seconds,speedup,identical\n";
  for (const auto& row : rows) {
    out << row.particles << ',' << row.workers << ',' << format_double(row.seconds) << ','
        << format_double(row.speedup) << ',' << (row.identical ? 1 : 0) << '\n';
  }
}

}  // namespace epismc
