#include "epismc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace epismc {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

// Read-only view of one JSON object that remembers which keys were used.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "must be an object");
  }

  const std::string& path() const { return path_; }
  std::string at(std::string_view key) const { return join(path_, key); }

  const json* find(std::string_view key) {
    seen_.emplace(key);
    const auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  double number(std::string_view key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(at(key), "must be a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(at(key), "must be finite");
    return x;
  }

  double required_number(std::string_view key) {
    if (!has(key)) fail(at(key), "is required");
    return number(key, 0.0);
  }

  std::int64_t integer(std::string_view key, std::int64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(at(key), "must be an integer");
    return v->get<std::int64_t>();
  }

  std::size_t count(std::string_view key, std::size_t fallback, std::size_t minimum = 1) {
    const std::int64_t v = integer(key, static_cast<std::int64_t>(fallback));
    if (v < static_cast<std::int64_t>(minimum)) {
      fail(at(key), "must be at least " + std::to_string(minimum));
    }
    return static_cast<std::size_t>(v);
  }

  std::string string(std::string_view key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(at(key), "must be a string");
    return v->get<std::string>();
  }

  std::string required_string(std::string_view key) {
    if (!has(key)) fail(at(key), "is required");
    return string(key, "");
  }

  Block child(std::string_view key) {
    const json* v = find(key);
    if (!v) fail(at(key), "is required");
    return Block(*v, at(key));
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) fail(at(item.key()), "unknown key");
    }
  }

  const json& raw() const { return j_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

template <typename Enum>
Enum choose(const std::string& path, const std::string& value,
            std::initializer_list<std::pair<const char*, Enum>> options) {
  std::string allowed;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    allowed += allowed.empty() ? name : std::string(", ") + name;
  }
  fail(path, "'" + value + "' is not one of: " + allowed);
}

Prior parse_prior(const json& j, const std::string& path) {
  if (j.is_number()) return Prior::fixed(j.get<double>());
  Block b(j, path);
  const std::string family = b.required_string("family");
  Prior prior;
  if (family == "fixed") {
    prior = Prior::fixed(b.required_number("value"));
  } else if (family == "gamma") {
    prior = Prior::gamma(b.required_number("shape"), b.required_number("rate"));
  } else if (family == "beta") {
    prior = Prior::beta(b.required_number("a"), b.required_number("b"));
  } else if (family == "normal") {
    prior = Prior::normal(b.required_number("mean"), b.required_number("sd"));
  } else if (family == "logit_normal") {
    prior = Prior::logit_normal(b.required_number("mean"), b.required_number("sd"));
  } else if (family == "inv_sqrt_uniform") {
    prior = Prior::inv_sqrt_uniform(b.required_number("lower"), b.required_number("upper"));
  } else {
    fail(b.at("family"), "'" + family +
                             "' is not one of: fixed, gamma, beta, normal, logit_normal, "
                             "inv_sqrt_uniform");
  }
  b.finish();
  try {
    prior.validate(path);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return prior;
}

InitialStatePrior parse_initial_state(Block& model, const ModelSpec& spec) {
  Block b = model.child("initial_state");
  InitialStatePrior prior;
  std::int64_t max_total = 0;
  for (const auto& name : spec.compartment_names()) {
    const json* v = b.find(name);
    const std::string path = b.at(name);
    if (!v) fail(path, "is required");
    std::vector<std::pair<std::int64_t, double>> support;
    if (v->is_number_integer()) {
      support.emplace_back(v->get<std::int64_t>(), 1.0);
    } else if (v->is_array() && !v->empty()) {
      for (const auto& entry : *v) {
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer() ||
            !entry[1].is_number()) {
          fail(path, "support points must be [count, probability] pairs");
        }
        const double prob = entry[1].get<double>();
        if (!(prob > 0.0)) fail(path, "probabilities must be positive");
        support.emplace_back(entry[0].get<std::int64_t>(), prob);
      }
    } else {
      fail(path, "must be an integer or a list of [count, probability] pairs");
    }
    std::int64_t largest = 0;
    for (const auto& [count, prob] : support) {
      if (count < 0) fail(path, "counts must be non-negative");
      largest = std::max(largest, count);
    }
    max_total += largest;
    prior.compartments.push_back(std::move(support));
  }
  b.finish();
  if (max_total > spec.pop_size) fail(b.path(), "compartments exceed pop_size");
  return prior;
}

void check_divides(const std::string& path, double spacing, double step) {
  try {
    substeps_per_window(spacing, step);
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
}

// Rejects duplicate keys, which the parser would otherwise resolve silently.
json parse_strict(std::string_view text) {
  std::vector<std::set<std::string>> open;
  const json::parser_callback_t cb = [&](int, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start:
        open.emplace_back();
        break;
      case json::parse_event_t::object_end:
        if (!open.empty()) open.pop_back();
        break;
      case json::parse_event_t::key: {
        const auto key = parsed.get<std::string>();
        if (!open.empty() && !open.back().insert(key).second) {
          throw ConfigError(key + ": duplicate key");
        }
        break;
      }
      default:
        break;
    }
    return true;
  };
  try {
    return json::parse(text.begin(), text.end(), cb);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || path.front() == '/' || base_dir.empty() || base_dir == ".") return path;
  return base_dir + "/" + path;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

McmcOptions RunConfig::mcmc_options() const {
  McmcOptions o;
  o.iterations = algorithm.iterations;
  o.particles = algorithm.mcmc_particles;
  o.dtau = algorithm.filter.dtau;
  o.obs_spacing = obs_spacing;
  o.seed = algorithm.filter.seed;
  o.proposal = algorithm.mcmc_proposal;
  o.workers = algorithm.filter.workers;
  return o;
}

LnaOptions RunConfig::lna_options() const {
  LnaOptions o;
  o.ode_step = algorithm.ode_step;
  o.obs_spacing = obs_spacing;
  return o;
}

void validate_config(const RunConfig& c) {
  const auto& a = c.algorithm;
  if (a.filter.particles < 1) fail("algorithm.particles", "must be at least 1");
  if (!(a.filter.dtau > 0.0)) fail("algorithm.dtau", "must be positive");
  check_divides("algorithm.dtau", c.obs_spacing, a.filter.dtau);
  if (!(a.filter.discount > 1.0 / 3.0 && a.filter.discount <= 1.0)) {
    fail("algorithm.discount", "must lie in (1/3, 1]");
  }
  if (!(a.ode_step > 0.0)) fail("algorithm.ode_step", "must be positive");
  check_divides("algorithm.ode_step", c.obs_spacing, a.ode_step);
  if (a.filter.workers < 0) fail("algorithm.workers", "must be non-negative");
  if (c.truth.present) {
    if (!(c.truth.dtau > 0.0)) fail("truth.dtau", "must be positive");
    check_divides("truth.dtau", c.obs_spacing, c.truth.dtau);
  }
}

RunConfig parse_config(std::string_view text, const std::string& base_dir) {
  const json root = parse_strict(text);
  RunConfig c;
  c.hash = fnv1a(text);
  Block top(root, "");

  // model
  Block model = top.child("model");
  const auto kind = choose<ModelKind>(model.at("kind"), model.required_string("kind"),
                           {{"sir", ModelKind::SIR}, {"seir", ModelKind::SEIR}});
  const std::int64_t pop = model.integer("pop_size", -1);
  if (pop <= 0) fail(model.at("pop_size"), "is required and must be positive");
  const auto contact =
      choose<ContactMode>(model.at("contact"), model.string("contact", "constant"),
             {{"constant", ContactMode::Constant}, {"brownian_log", ContactMode::BrownianLog}});
  const auto reporting = choose<ReportingMode>(
      model.at("reporting"), model.string("reporting", "constant"),
      {{"constant", ReportingMode::Constant}, {"brownian_logit", ReportingMode::BrownianLogit}});
  c.problem.model = ModelSpec{kind, pop, contact, reporting};
  c.sde_driver = model.string("sde_driver", c.sde_driver);
  try {
    find_sde_driver(c.sde_driver);
  } catch (const std::invalid_argument& e) {
    fail(model.at("sde_driver"), e.what());
  }
  c.problem.initial_state = parse_initial_state(model, c.problem.model);
  model.finish();

  // observation
  Block obs = top.child("observation");
  c.problem.obs.family =
      choose<ObsFamily>(obs.at("family"), obs.required_string("family"),
             {{"binomial", ObsFamily::Binomial}, {"negative_binomial", ObsFamily::NegativeBinomial}});
  c.problem.obs.dynamic_reporting = c.problem.model.dynamic_reporting();
  c.obs_spacing = obs.number("spacing", 1.0);
  if (!(c.obs_spacing > 0.0)) fail(obs.at("spacing"), "must be positive");
  obs.finish();

  // priors
  Block priors = top.child("priors");
  const auto active = active_params(c.problem.model, c.problem.obs);
  for (const auto& item : priors.raw().items()) {
    const auto p = param_from_name(item.key());
    const std::string path = priors.at(item.key());
    if (!p) fail(path, "unknown parameter");
    if (std::find(active.begin(), active.end(), *p) == active.end()) {
      fail(path, "parameter is not used by this model");
    }
    priors.find(item.key());
    c.problem.priors.set(*p, parse_prior(item.value(), path));
  }
  for (Param p : active) {
    if (!c.problem.priors.has(p)) fail(priors.at(param_name(p)), "prior or fixed value required");
  }
  if (c.problem.priors.has(Param::Rho) || c.problem.priors.has(Param::Rho0)) {
    const Param p = c.problem.priors.has(Param::Rho) ? Param::Rho : Param::Rho0;
    const Prior& prior = c.problem.priors.at(p);
    if (prior.is_fixed() && !(prior.a >= 0.0 && prior.a <= 1.0)) {
      fail(priors.at(param_name(p)), "reporting probability must lie in [0, 1]");
    }
  }
  priors.finish();

  // algorithm
  if (top.has("algorithm")) {
    Block alg = top.child("algorithm");
    auto& f = c.algorithm.filter;
    f.particles = alg.count("particles", f.particles);
    f.dtau = alg.number("dtau", f.dtau);
    f.discount = alg.number("discount", f.discount);
    f.seed = static_cast<std::uint64_t>(alg.integer("seed", static_cast<std::int64_t>(f.seed)));
    f.resampler = choose<Resampler>(alg.at("resampler"), alg.string("resampler", "systematic"),
                         {{"systematic", Resampler::Systematic},
                          {"multinomial", Resampler::Multinomial}});
    f.proposal = choose<Proposal>(alg.at("proposal"), alg.string("proposal", "bridge"),
                        {{"bridge", Proposal::Bridge}, {"blind", Proposal::Blind}});
    f.workers = static_cast<int>(alg.integer("workers", f.workers));
    auto& a = c.algorithm;
    a.iterations = alg.count("iterations", a.iterations);
    a.pilot_iterations = alg.count("pilot_iterations", a.pilot_iterations, 0);
    a.mcmc_particles = alg.count("mcmc_particles", a.mcmc_particles);
    a.mcmc_proposal = choose<Proposal>(alg.at("mcmc_proposal"), alg.string("mcmc_proposal", "blind"),
                             {{"bridge", Proposal::Bridge}, {"blind", Proposal::Blind}});
    a.ode_step = alg.number("ode_step", a.ode_step);
    a.forecast_windows = alg.count("forecast_windows", a.forecast_windows);
    if (const json* v = alg.find("bench_particles")) {
      if (!v->is_array() || v->empty()) fail(alg.at("bench_particles"), "must be a list");
      a.bench_particles.clear();
      for (const auto& n : *v) {
        if (!n.is_number_integer() || n.get<std::int64_t>() < 1) {
          fail(alg.at("bench_particles"), "entries must be positive integers");
        }
        a.bench_particles.push_back(n.get<std::size_t>());
      }
    }
    if (const json* v = alg.find("bench_workers")) {
      if (!v->is_array() || v->empty()) fail(alg.at("bench_workers"), "must be a list");
      a.bench_workers.clear();
      for (const auto& n : *v) {
        if (!n.is_number_integer() || n.get<int>() < 1) {
          fail(alg.at("bench_workers"), "entries must be positive integers");
        }
        a.bench_workers.push_back(n.get<int>());
      }
    }
    alg.finish();
  }
  c.algorithm.filter.obs_spacing = c.obs_spacing;

  // truth
  if (top.has("truth")) {
    Block truth = top.child("truth");
    c.truth.present = true;
    c.truth.n_obs = truth.count("n_obs", 10);
    c.truth.dtau = truth.number("dtau", c.algorithm.filter.dtau);
    c.truth.t0 = truth.number("t0", 0.0);
    for (Param p : active) {
      const Prior& prior = c.problem.priors.at(p);
      const std::string name(param_name(p));
      if (!truth.has(name) && !prior.is_fixed()) fail(truth.at(name), "is required");
      const double value = truth.number(name, prior.a);
      if (p == Param::LogBeta0) {
        c.truth.rates.log_beta = value;
      } else if (p == Param::Rho0) {
        if (!(value > 0.0 && value < 1.0)) fail(truth.at(name), "must lie in (0, 1)");
        c.truth.rates.logit_rho = logit(value);
      } else {
        set_param(c.truth.params, p, value);
      }
    }
    truth.finish();
  }

  // io
  if (top.has("io")) {
    Block io = top.child("io");
    c.io.data = resolve(base_dir, io.string("data", ""));
    c.io.output_dir = resolve(base_dir, io.string("output_dir", c.io.output_dir));
    io.finish();
  }
  top.finish();
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const auto slash = path.find_last_of('/');
  const std::string dir = slash == std::string::npos ? "." : path.substr(0, slash);
  return parse_config(buffer.str(), dir);
}

std::vector<Observation> load_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open data file");
  std::vector<Observation> series;
  std::string line;
  std::size_t line_no = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.find(',');
    const std::string where = path + ":" + std::to_string(line_no);
    if (comma == std::string::npos) throw ConfigError(where + ": expected 'time,count'");
    const std::string t_text = line.substr(0, comma);
    const std::string y_text = line.substr(comma + 1);
    if (header_allowed && t_text == "time") {
      header_allowed = false;
      continue;
    }
    header_allowed = false;
    Observation obs;
    try {
      std::size_t used = 0;
      obs.time = std::stod(t_text, &used);
      if (used != t_text.size()) throw std::invalid_argument("trailing text");
      obs.count = std::stoll(y_text, &used);
      if (used != y_text.size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw ConfigError(where + ": cannot parse '" + line + "'");
    }
    series.push_back(obs);
  }
  try {
    validate_series(series);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return series;
}

}  // namespace epismc
