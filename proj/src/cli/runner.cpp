#include "conflap/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "conflap/errors.hpp"

namespace conflap::cli {

namespace {

const double two_pi = 2.0 * std::numbers::pi;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
}

// Copies defaults for keys missing from `given`.
json with_defaults(const json& given, const json& defaults) {
  json out = defaults;
  for (auto it = given.begin(); it != given.end(); ++it) out[it.key()] = it.value();
  return out;
}

void require_expression(const json& v, const std::string& key) {
  if (v.is_number()) return;
  if (!v.is_string()) throw std::invalid_argument(key + " must be a number or an expression string");
  Expression::parse(v.get<std::string>());
}

Expression expression_of(const json& v) {
  return v.is_number() ? Expression::constant(v.get<double>()) : Expression::parse(v.get<std::string>());
}

const std::set<std::string> tasks = {"spectrum", "eval", "derivative", "certify", "maximize", "optimize", "sweep"};

}  // namespace

std::map<std::string, double> tolerance_env_overrides() {
  std::map<std::string, double> out;
  const std::pair<const char*, const char*> vars[] = {{"CONFLAP_SOLVER_TOL", "solver_tol"},
                                                      {"CONFLAP_CLUSTER_TOL", "cluster_tol"},
                                                      {"CONFLAP_CERT_TOL", "cert_tol"},
                                                      {"CONFLAP_OPT_TOL", "opt_tol"}};
  for (const auto& [var, key] : vars)
    if (const char* v = std::getenv(var)) {
      char* end = nullptr;
      const double x = std::strtod(v, &end);
      if (end == v || *end != '\0' || !(x > 0.0)) throw std::invalid_argument(std::string(var) + " is not a positive number");
      out[key] = x;
    }
  return out;
}

json resolve_config(const json& raw, const Overrides& ov) {
  check_keys(raw, {"backend", "curvature", "factor", "sampler", "task", "k", "tolerances", "direction", "zero_mean",
                   "steps", "fd", "max_iter", "seed", "reproducible", "threads", "output", "sweep"},
             "config");
  if (!raw.contains("task") || !raw["task"].is_string() || !tasks.count(raw["task"].get<std::string>()))
    throw std::invalid_argument("task must be one of spectrum|eval|derivative|certify|maximize|optimize|sweep");

  json c = with_defaults(raw, {{"curvature", 6.0},
                               {"factor", 1.0},
                               {"k", 1},
                               {"direction", "sin(x1)"},
                               {"zero_mean", true},
                               {"steps", {1e-3, 5e-4, 2.5e-4}},
                               {"fd", false},
                               {"max_iter", 500},
                               {"seed", 1},
                               {"reproducible", true},
                               {"threads", 1}});
  if (ov.seed) c["seed"] = *ov.seed;
  if (ov.reproducible) c["reproducible"] = true;
  if (ov.threads) c["threads"] = *ov.threads;

  const json backend = raw.value("backend", json{{"type", "torus"}});
  check_keys(backend, {"type", "grid", "edges", "dim", "degree_cutoff", "nodes", "length"}, "backend");
  const std::string type = backend.value("type", "torus");
  if (type == "torus") {
    check_keys(backend, {"type", "grid", "edges", "dim"}, "torus backend");
    c["backend"] = with_defaults(backend, {{"type", "torus"},
                                           {"grid", {16, 16, 16}},
                                           {"edges", {two_pi, two_pi, two_pi}},
                                           {"dim", 3}});
    if (c["backend"]["grid"].size() != 3 || c["backend"]["edges"].size() != 3)
      throw std::invalid_argument("torus grid and edges need three entries");
  } else if (type == "sphere3") {
    check_keys(backend, {"type", "degree_cutoff"}, "sphere3 backend");
    c["backend"] = with_defaults(backend, {{"type", "sphere3"}, {"degree_cutoff", 4}});
  } else if (type == "synthetic") {
    check_keys(backend, {"type", "nodes", "length", "dim"}, "synthetic backend");
    c["backend"] = with_defaults(backend, {{"type", "synthetic"}, {"nodes", 64}, {"length", two_pi}, {"dim", 3}});
  } else {
    throw std::invalid_argument("backend type must be torus, sphere3 or synthetic");
  }

  const std::uint64_t seed = c["seed"].get<std::uint64_t>();
  if (raw.contains("sampler")) {
    check_keys(raw["sampler"], {"band_limit", "amplitude", "seed", "samples"}, "sampler");
    c["sampler"] = with_defaults(raw["sampler"], {{"band_limit", 2}, {"amplitude", 0.3}, {"seed", seed}, {"samples", 0}});
  }
  const json tol = raw.value("tolerances", json::object());
  check_keys(tol, {"solver_tol", "cluster_tol", "cert_tol", "opt_tol"}, "tolerances");
  c["tolerances"] = with_defaults(tol, {{"solver_tol", 1e-9}, {"cluster_tol", 1e-7}, {"cert_tol", 1e-8}, {"opt_tol", 1e-7}});
  for (const auto& [key, value] : ov.tolerances) c["tolerances"][key] = value;
  const json out = raw.value("output", json::object());
  check_keys(out, {"report", "csv", "trace"}, "output");
  c["output"] = with_defaults(out, {{"report", "report.json"}, {"csv", "sweep.csv"}, {"trace", "trace.csv"}});

  if (c["task"] == "sweep") {
    if (!raw.contains("sweep")) throw std::invalid_argument("task sweep needs a sweep section");
    check_keys(raw["sweep"], {"axis", "values", "range"}, "sweep");
    const json& sw = raw["sweep"];
    const std::string axis = sw.value("axis", "");
    if (axis != "scale" && axis != "seed" && axis != "t")
      throw std::invalid_argument("sweep axis must be scale, seed or t");
    json values = json::array();
    if (sw.contains("values")) values = sw["values"];
    if (sw.contains("range")) {
      if (axis != "seed" || sw["range"].size() != 2) throw std::invalid_argument("sweep range is [first, last] seeds");
      for (std::int64_t s = sw["range"][0].get<std::int64_t>(); s <= sw["range"][1].get<std::int64_t>(); ++s)
        values.push_back(s);
    }
    if (!values.is_array() || values.empty()) throw std::invalid_argument("sweep needs values or range");
    for (const json& v : values)
      if (!v.is_number()) throw std::invalid_argument("sweep values must be numbers");
    c["sweep"] = {{"axis", axis}, {"values", values}};
  }

  require_expression(c["curvature"], "curvature");
  require_expression(c["factor"], "factor");
  require_expression(c["direction"], "direction");
  if (!c["k"].is_number_integer() || c["k"].get<int>() < 1) throw std::invalid_argument("k must be an integer >= 1");
  if (!c["steps"].is_array() || c["steps"].empty()) throw std::invalid_argument("steps must be a non-empty list");
  if (c["threads"].get<int>() < 1) throw std::invalid_argument("threads must be >= 1");
  return c;
}

namespace {

DiscreteConformalClass build_class(const json& c) {
  const json& b = c["backend"];
  const Expression R = expression_of(c["curvature"]);
  const std::string type = b["type"];
  if (type == "torus") {
    const auto g = b["grid"].get<std::vector<int>>();
    const auto e = b["edges"].get<std::vector<double>>();
    return build_torus_class({g[0], g[1], g[2]}, {e[0], e[1], e[2]}, R, b["dim"].get<int>());
  }
  if (type == "sphere3") {
    DiscreteConformalClass cls = build_sphere3_class(b["degree_cutoff"].get<int>());
    return c["curvature"].is_number() && c["curvature"].get<double>() == 6.0 ? cls : cls.with_curvature(cls.sample(R));
  }
  return build_ring_class(b["nodes"].get<int>(), b["length"].get<double>(), R, b["dim"].get<int>());
}

SolverOptions solver_options(const json& c) {
  SolverOptions o;
  o.solver_tol = c["tolerances"]["solver_tol"];
  o.cluster_tol = c["tolerances"]["cluster_tol"];
  o.reproducible = c["reproducible"];
  o.seed = c["seed"].get<std::uint64_t>();
  return o;
}

SamplerSpec sampler_spec(const json& c) {
  SamplerSpec s;
  if (c.contains("sampler")) {
    s.band_limit = c["sampler"]["band_limit"];
    s.amplitude = c["sampler"]["amplitude"];
    s.seed = c["sampler"]["seed"].get<std::uint64_t>();
  } else {
    s.seed = c["seed"].get<std::uint64_t>();
  }
  return s;
}

ConformalFactor factor_of(const DiscreteConformalClass& cls, const json& c) {
  return ConformalFactor(cls.sample(expression_of(c["factor"])));
}

std::string csv_number(double x) {
  if (!std::isfinite(x)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

struct SweepRow {
  double parameter = 0.0;
  double lambda_k = NAN, mass = NAN, F = NAN, quotient = NAN, F_right = NAN, F_left = NAN;
};

// Evaluates rows in parallel; rows are stored by index so the output order is fixed.
void parallel_rows(std::vector<SweepRow>& rows, unsigned threads, const std::function<void(SweepRow&)>& fill) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows.size())));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned id) {
    try {
      for (std::size_t i = id; i < rows.size(); i += workers) fill(rows[i]);
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work, t);
  work(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

json run_task(const json& c, const DiscreteConformalClass& cls, std::map<std::string, std::string>& files) {
  const std::string task = c["task"];
  const Eigen::Index k = c["k"].get<Eigen::Index>();
  const SolverOptions opts = solver_options(c);
  const unsigned threads = c["threads"].get<unsigned>();

  if (task == "spectrum") return to_json(solve_through_cluster(cls, factor_of(cls, c), k, opts));

  if (task == "eval") {
    if (c.contains("sampler") && c["sampler"]["samples"].get<std::size_t>() > 0) {
      const SupEstimate est =
          sup_estimate(cls, k, sampler_spec(c), c["sampler"]["samples"].get<std::size_t>(), opts, threads);
      files[c["output"]["trace"]] = trace_csv(est);
      return to_json(est);
    }
    return to_json(eval_F(cls, factor_of(cls, c), k, opts));
  }

  if (task == "maximize") {
    const MaximizerResult m = construct_maximizer(cls, 1e-10, opts);
    json j = to_json(m);
    j["necessary_condition_sup"] = necessary_condition_residual(cls, m.mu_max, m.Lambda1).sup;
    return j;
  }

  if (task == "optimize") {
    ConformalFactor init = factor_of(cls, c);
    if (c.contains("sampler")) init = ConformalFactor(sample_log_factor(smooth_modes(cls, c["sampler"]["band_limit"]),
                                                                        sampler_spec(c), 0));
    OptimizerOptions oo;
    oo.opt_tol = c["tolerances"]["opt_tol"];
    oo.max_iter = c["max_iter"];
    const OptimizerResult r = optimize_F1(cls, init, oo, opts);
    json j = to_json(r);
    const MaximizerResult m = construct_maximizer(cls, oo.r_floor, opts);
    const Field target = m.mu_max.values().array().pow(cls.q()).matrix();
    const Field got = r.mu_star.values().array().pow(cls.q()).matrix();
    j["Lambda1"] = m.Lambda1;
    j["relative_l2_error"] =
        std::sqrt((got - target).cwiseAbs2().dot(cls.dv()) / target.cwiseAbs2().dot(cls.dv()));
    return j;
  }

  const ConformalFactor mu = normalize_factor(cls, factor_of(cls, c));
  const Field w_field = cls.sample(expression_of(c["direction"]));
  const DeformationDirection h =
      c["zero_mean"].get<bool>() ? zero_mean_generator(cls, mu, w_field) : DeformationDirection{w_field};

  if (task == "derivative") {
    json j = to_json(one_sided_F_derivatives(cls, mu, h, k, opts));
    if (c["fd"].get<bool>()) j["fd"] = to_json(fd_oracle(cls, mu, h, k, c["steps"].get<std::vector<double>>(), opts));
    return j;
  }

  if (task == "certify") {
    if (k == 1) {
      const NecessaryCondition nc = necessary_condition_residual(cls, mu, 1.0);
      if (!nc.sign_constant) throw HypothesisViolation(tags::necessary_condition_sign, nc.message);
    }
    CertificateOptions co;
    co.cert_tol = c["tolerances"]["cert_tol"];
    return to_json(certify_extremal(cls, mu, k, co, opts));
  }

  // sweep
  const std::string axis = c["sweep"]["axis"];
  const auto values = c["sweep"]["values"].get<std::vector<double>>();
  std::vector<SweepRow> rows(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) rows[i].parameter = values[i];
  const ConformalFactor base = factor_of(cls, c);

  if (axis == "scale") {
    parallel_rows(rows, threads, [&](SweepRow& r) {
      const FunctionalValue f = eval_F(cls, ConformalFactor(base.values() * r.parameter), k, opts);
      r.lambda_k = f.lambda_k;
      r.mass = f.mass;
      r.F = f.value;
    });
  } else if (axis == "seed") {
    const SamplerSpec spec = sampler_spec(c);
    const Eigen::MatrixXd modes = smooth_modes(cls, spec.band_limit);
    parallel_rows(rows, threads, [&](SweepRow& r) {
      SamplerSpec s = spec;
      s.seed = static_cast<std::uint64_t>(r.parameter);
      const FunctionalValue f = eval_F(cls, ConformalFactor(sample_log_factor(modes, s, 0)), k, opts);
      r.lambda_k = f.lambda_k;
      r.mass = f.mass;
      r.F = f.value;
    });
  } else {
    const PerturbationReport pr = one_sided_F_derivatives(cls, mu, h, k, opts);
    const FunctionalValue f0 = eval_F(cls, mu, k, opts);
    parallel_rows(rows, threads, [&](SweepRow& r) {
      const Field m = mu.values().cwiseProduct((1.0 + r.parameter * h.h.array()).matrix());
      const FunctionalValue f = eval_F(cls, ConformalFactor(m, mu.floor()), k, opts);
      r.lambda_k = f.lambda_k;
      r.mass = f.mass;
      r.F = f.value;
      r.quotient = r.parameter != 0.0 ? (f.value - f0.value) / r.parameter : NAN;
      r.F_right = pr.F_right;
      r.F_left = pr.F_left;
    });
  }

  std::ostringstream csv;
  csv << "index,parameter,lambda_k,mass,F,quotient,F_right,F_left\n";
  double best = -INFINITY;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& r = rows[i];
    csv << i << ',' << csv_number(r.parameter) << ',' << csv_number(r.lambda_k) << ',' << csv_number(r.mass) << ','
        << csv_number(r.F) << ',' << csv_number(r.quotient) << ',' << csv_number(r.F_right) << ','
        << csv_number(r.F_left) << '\n';
    best = std::max(best, r.F);
  }
  files[c["output"]["csv"]] = csv.str();
  return {{"axis", axis}, {"points", rows.size()}, {"max_F", best}, {"csv", c["output"]["csv"]}};
}

}  // namespace

Outcome run(const json& raw_config, const Overrides& ov) {
  Outcome out;
  json& rep = out.report;
  rep["toolkit_version"] = toolkit_version;
  json c;
  try {
    c = resolve_config(raw_config, ov);
  } catch (const std::exception& e) {
    rep["config"] = raw_config;
    rep["status"] = "error";
    rep["message"] = std::string("invalid config: ") + e.what();
    out.exit_code = 1;
    return out;
  }
  rep["config"] = c;
  rep["task"] = c["task"];
  try {
    const DiscreteConformalClass cls = build_class(c);
    rep["backend"] = backend_summary(cls);
    rep["result"] = run_task(c, cls, out.files);
    rep["status"] = "ok";
  } catch (const HypothesisViolation& e) {
    rep["status"] = "hypothesis_violation";
    rep["tag"] = e.tag();
    rep["message"] = e.what();
    out.exit_code = 2;
  } catch (const std::exception& e) {
    rep["status"] = "error";
    rep["message"] = e.what();
    out.exit_code = 1;
  }
  return out;
}

}  // namespace conflap::cli
