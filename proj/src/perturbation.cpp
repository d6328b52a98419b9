#include "conflap/perturbation.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "conflap/errors.hpp"

namespace conflap {

std::string to_string(GapCase c) {
  switch (c) {
    case GapCase::gap_below: return "gap_below";
    case GapCase::gap_above: return "gap_above";
    case GapCase::both_gaps: return "both_gaps";
    case GapCase::no_gap: return "no_gap";
  }
  return "unknown";
}

GapCase classify_gap(const SpectrumResult& spectrum, Eigen::Index k) {
  const Cluster& c = spectrum.cluster_of(k);
  const bool below = k - 1 == c.first;
  const bool above = k - 1 == c.last() && c.closed_above;
  if (below && above) return GapCase::both_gaps;
  if (below) return GapCase::gap_below;
  if (above) return GapCase::gap_above;
  return GapCase::no_gap;
}

ProjectedPerturbation projected_perturbation_matrix(const DiscreteConformalClass& cls, const ConformalFactor& mu,
                                                    const Eigen::MatrixXd& basis, double lambda_k,
                                                    const DeformationDirection& h) {
  if (basis.rows() != cls.num_nodes() || h.h.size() != cls.num_nodes())
    throw std::invalid_argument("cluster basis and direction must be node fields");
  const Field wdv = conformal_data(cls, mu).weight.cwiseProduct(cls.dv());
  const Eigen::MatrixXd gram = basis.transpose() * wdv.asDiagonal() * basis;
  const Eigen::Index m = basis.cols();
  if ((gram - Eigen::MatrixXd::Identity(m, m)).lpNorm<Eigen::Infinity>() > 1e-8)
    throw std::invalid_argument("cluster basis is not weighted-orthonormal");

  ProjectedPerturbation out;
  const Field density = h.h.cwiseProduct(wdv);
  out.T = -cls.q() * lambda_k * (basis.transpose() * density.asDiagonal() * basis);
  out.T = 0.5 * (out.T + out.T.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.T);
  out.derivative_set = es.eigenvalues();
  out.branch_basis = basis * es.eigenvectors();
  const double scale = std::max(1.0, out.derivative_set.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i + 1 < m; ++i)
    if (out.derivative_set[i + 1] - out.derivative_set[i] <= 1e-9 * scale) out.canonical = false;
  return out;
}

ProjectedPerturbation projected_perturbation_matrix(const DiscreteConformalClass& cls, const ConformalFactor& mu,
                                                    const SpectrumResult& spectrum, const Cluster& cluster,
                                                    const DeformationDirection& h) {
  if (cluster.first < 0 || cluster.last() >= spectrum.nodal.cols())
    throw std::invalid_argument("cluster indices exceed the computed eigenbasis");
  const Eigen::MatrixXd basis = spectrum.nodal.middleCols(cluster.first, cluster.size);
  const double lambda = spectrum.eigenvalues.segment(cluster.first, cluster.size).mean();
  return projected_perturbation_matrix(cls, mu, basis, lambda, h);
}

OneSidedDerivatives one_sided_lambda_derivatives(const Eigen::VectorXd& set, GapCase gaps) {
  if (set.size() == 0) throw std::invalid_argument("empty derivative set");
  OneSidedDerivatives d;
  d.tag = gaps;
  const double lo = set.minCoeff(), hi = set.maxCoeff();
  switch (gaps) {
    case GapCase::gap_below:
      d.right = lo;
      d.left = hi;
      break;
    case GapCase::gap_above:
      d.right = hi;
      d.left = lo;
      break;
    case GapCase::both_gaps:
      if (set.size() != 1) throw std::invalid_argument("both gaps hold but the cluster is not simple");
      d.right = d.left = set[0];
      break;
    case GapCase::no_gap:
      throw HypothesisViolation(tags::gap_condition,
                                "lambda_{k-1} = lambda_k = lambda_{k+1}: one-sided derivative formulas require "
                                "lambda_k > lambda_{k-1} or lambda_k < lambda_{k+1}");
  }
  return d;
}

PerturbationReport one_sided_F_derivatives(const DiscreteConformalClass& cls, const ConformalFactor& mu_tilde,
                                           const DeformationDirection& h, Eigen::Index k, const SolverOptions& opts) {
  const double mass = conformal_mass(cls, mu_tilde);
  if (std::abs(mass - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "factor is not normalized (sum mu^q dv = " << mass << "); apply normalize_factor first";
    throw HypothesisViolation(tags::normalization, os.str());
  }
  const SpectrumResult s = solve_through_cluster(cls, mu_tilde, k, opts);
  const GapCase gaps = classify_gap(s, k);
  if (gaps == GapCase::no_gap) one_sided_lambda_derivatives(Eigen::VectorXd::Zero(1), gaps);  // throws

  const Cluster& c = s.cluster_of(k);
  const ProjectedPerturbation pp = projected_perturbation_matrix(cls, mu_tilde, s, c, h);
  const OneSidedDerivatives d = one_sided_lambda_derivatives(pp.derivative_set, gaps);

  PerturbationReport r;
  r.k = k;
  r.lambda_k = s.eigenvalues[k - 1];
  r.multiplicity = c.size;
  r.derivative_set = pp.derivative_set;
  r.case_tag = gaps;
  r.canonical = pp.canonical;
  r.lambda_right = d.right;
  r.lambda_left = d.left;
  const Field w = conformal_data(cls, mu_tilde).weight;
  r.volume_term = cls.q() * r.lambda_k * h.h.cwiseProduct(w).dot(cls.dv());
  r.F_right = r.volume_term + d.right;
  r.F_left = r.volume_term + d.left;
  return r;
}

DeformationDirection zero_mean_generator(const DiscreteConformalClass& cls, const ConformalFactor& mu_tilde,
                                         const Field& w_field) {
  if (w_field.size() != cls.num_nodes()) throw std::invalid_argument("w field must be a node field");
  const ConformalData cd = conformal_data(cls, mu_tilde);
  const double mean = w_field.dot(cd.vol_tilde) / cd.vol_tilde.sum();
  const Field w0 = w_field.array() - mean;
  return {w0.cwiseProduct(mu_tilde.values().cwiseAbs2())};
}

namespace {

struct Extrapolated {
  double value = 0.0;
  double err = 0.0;
};

// Richardson on one-sided quotients with error expansion D(s) = D + c1 s + c2 s^2 + ...
Extrapolated richardson(const std::vector<double>& s, const std::vector<double>& d) {
  if (d.size() == 1) return {d[0], std::abs(d[0])};
  std::vector<double> d1;
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    const double r = s[i + 1] / s[i];
    d1.push_back((d[i + 1] - r * d[i]) / (1.0 - r));
  }
  if (d1.size() == 1) return {d1[0], std::abs(d1[0] - d.back())};
  // Remaining error of the first pass is c2 s_i s_{i+1}.
  const std::size_t n = d1.size();
  const double r = s[n] / s[n - 2];
  const double d2 = (d1[n - 1] - r * d1[n - 2]) / (1.0 - r);
  return {d2, std::abs(d2 - d1[n - 1])};
}

}  // namespace

FdEstimate fd_oracle(const DiscreteConformalClass& cls, const ConformalFactor& mu_tilde, const DeformationDirection& h,
                     Eigen::Index k, const std::vector<double>& steps, const SolverOptions& opts) {
  if (steps.empty()) throw std::invalid_argument("fd_oracle needs at least one step");
  for (double s : steps)
    if (!(s > 0.0)) throw std::invalid_argument("fd steps must be positive");
  const FunctionalValue f0 = eval_F(cls, mu_tilde, k, opts);

  auto at = [&](double t) {
    const Field mu = mu_tilde.values().cwiseProduct((1.0 + t * h.h.array()).matrix());
    std::ostringstream os;
    if (mu.minCoeff() < mu_tilde.floor()) {
      os << "deformed factor at t = " << t << " is not positive (min " << mu.minCoeff() << ")";
      throw std::invalid_argument(os.str());
    }
    return eval_F(cls, ConformalFactor(mu, mu_tilde.floor()), k, opts);
  };

  std::vector<double> lr, ll, Fr, Fl;
  for (double s : steps) {
    const FunctionalValue p = at(s), m = at(-s);
    lr.push_back((p.lambda_k - f0.lambda_k) / s);
    ll.push_back((m.lambda_k - f0.lambda_k) / -s);
    Fr.push_back((p.value - f0.value) / s);
    Fl.push_back((m.value - f0.value) / -s);
  }
  FdEstimate e;
  e.steps = steps;
  const auto a = richardson(steps, lr), b = richardson(steps, ll), c = richardson(steps, Fr),
             d = richardson(steps, Fl);
  e.lambda_right = a.value;
  e.lambda_right_err = a.err;
  e.lambda_left = b.value;
  e.lambda_left_err = b.err;
  e.F_right = c.value;
  e.F_right_err = c.err;
  e.F_left = d.value;
  e.F_left_err = d.err;
  return e;
}

}  // namespace conflap
