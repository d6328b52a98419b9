#include "conflap/report.hpp"

#include <cmath>

namespace conflap {

namespace {

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

json to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
  return a;
}

json to_json(const Cluster& c) {
  return {{"first", c.first + 1},   {"size", c.size},          {"value", c.value},
          {"gap_below", number(c.gap_below)}, {"gap_above", number(c.gap_above)}, {"closed_above", c.closed_above}};
}

json to_json(const SpectrumResult& s) {
  json clusters = json::array();
  for (const Cluster& c : s.clusters) clusters.push_back(to_json(c));
  return {{"eigenvalues", to_json(s.eigenvalues)},
          {"residuals", to_json(s.residuals)},
          {"clusters", clusters},
          {"method", s.method},
          {"iterations", s.iterations},
          {"diagnostics", s.diagnostics}};
}

json to_json(const FunctionalValue& f) {
  return {{"k", f.k}, {"lambda_k", f.lambda_k}, {"mass", f.mass}, {"F", f.value}};
}

json to_json(const PerturbationReport& r) {
  return {{"k", r.k},
          {"lambda_k", r.lambda_k},
          {"multiplicity", r.multiplicity},
          {"derivative_set", to_json(r.derivative_set)},
          {"case_tag", to_string(r.case_tag)},
          {"lambda_right", r.lambda_right},
          {"lambda_left", r.lambda_left},
          {"F_right", r.F_right},
          {"F_left", r.F_left},
          {"volume_term", r.volume_term},
          {"canonical", r.canonical}};
}

json to_json(const FdEstimate& e) {
  return {{"steps", e.steps},
          {"lambda_right", e.lambda_right},
          {"lambda_left", e.lambda_left},
          {"F_right", e.F_right},
          {"F_left", e.F_left},
          {"errors",
           {{"lambda_right", e.lambda_right_err},
            {"lambda_left", e.lambda_left_err},
            {"F_right", e.F_right_err},
            {"F_left", e.F_left_err}}}};
}

json to_json(const ExtremalityCertificate& c) {
  json j = {{"k", c.k},
            {"lambda_k", c.lambda_k},
            {"gaps", to_string(c.gaps)},
            {"m", c.m()},
            {"p", c.p()},
            {"P", to_json(c.P)},
            {"feasible", c.feasible},
            {"sup_residual", c.sup_residual},
            {"cert_tol", c.cert_tol},
            {"iterations", c.iterations}};
  json family = json::array();
  for (Eigen::Index i = 0; i < c.family.cols(); ++i) family.push_back(to_json(Eigen::VectorXd(c.family.col(i))));
  j["family"] = family;
  if (c.witness) {
    j["witness"] = {{"h", to_json(c.witness->h)}, {"F_right", c.witness_F_right}, {"F_left", c.witness_F_left}};
  }
  return j;
}

json to_json(const MaximizerResult& m) {
  return {{"Lambda1", m.Lambda1},
          {"lambda1_check", m.lambda1_check},
          {"eigenvector_check", m.eigenvector_check},
          {"yamabe_sign", m.yamabe_sign},
          {"mu_max", to_json(m.mu_max.values())}};
}

json to_json(const OptimizerResult& r) {
  json trace = json::array();
  for (const OptimizerStep& s : r.trace)
    trace.push_back({{"iteration", s.iteration},
                     {"F", s.value},
                     {"slope", s.slope},
                     {"step", s.step},
                     {"backtracks", s.backtracks}});
  return {{"F", r.value},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"trace", trace},
          {"mu_star", to_json(r.mu_star.values())}};
}

json to_json(const SupEstimate& s) {
  json j = {{"best_value", s.best_value},
            {"samples", s.trace.size()},
            {"rejected", s.rejected},
            {"note", "sampled lower bound for Lambda_k; not a certificate of attainment"}};
  return j;
}

json backend_summary(const DiscreteConformalClass& cls) {
  json j = {{"type", to_string(cls.backend())},
            {"dim", cls.dim()},
            {"nodes", cls.num_nodes()},
            {"dofs", cls.num_dofs()},
            {"dv_sum", cls.volume()}};
  if (!cls.grid().empty()) j["grid"] = cls.grid();
  if (!cls.edges().empty()) j["edges"] = cls.edges();
  if (cls.analytic_volume()) j["analytic_volume"] = *cls.analytic_volume();
  return j;
}

}  // namespace conflap
