#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "conflap/perturbation.hpp"

namespace conflap {

struct CertificateOptions {
  double cert_tol = 1e-8;
  int max_alternations = 5000;
  /// Relative threshold for the zero-eigenvalue test |lambda_k| <= sign_tol * ||A||/min(w dv).
  double sign_tol = 1e-10;
  /// Eigenvalues of P below this are dropped from the family.
  double family_floor = 1e-12;
};

/// PSD trace-one P with diag(V P V^T) = 1 over the cluster basis V (node
/// fields, weighted-orthonormal), i.e. 1 in Conv{v^2 : v in E_k, |v|_w = 1}.
struct ExtremalityCertificate {
  Eigen::Index k = 1;
  double lambda_k = 0.0;
  GapCase gaps = GapCase::no_gap;
  Eigen::MatrixXd basis;   // nodes x m
  Eigen::MatrixXd P;       // m x m
  Eigen::MatrixXd family;  // nodes x p, v_j = sqrt(sigma_j) * basis combination
  double sup_residual = 0.0;
  bool feasible = false;
  double cert_tol = 1e-8;
  int iterations = 0;
  /// Infeasible only: zero-volume direction along which F^k increases (or
  /// decreases) on both sides, with its one-sided F-derivatives.
  std::optional<DeformationDirection> witness;
  double witness_F_right = 0.0;
  double witness_F_left = 0.0;

  Eigen::Index m() const { return basis.cols(); }
  Eigen::Index p() const { return family.cols(); }
};

/// Throws HypothesisViolation: normalization (mu_e not normalized),
/// gap_condition (no gap) or nonzero_eigenvalue (lambda_k ~ 0).
ExtremalityCertificate certify_extremal(const DiscreteConformalClass& cls, const ConformalFactor& mu_e, Eigen::Index k,
                                        const CertificateOptions& copts = {}, const SolverOptions& opts = {});

struct NodeResidual {
  Field residual;
  double sup = 0.0;
  double l2 = 0.0;  // L2 over the metric volume of the factor
};

/// lambda_k - [-1/2 mu^2 Lap_ge(mu^-2) + mu^2 sum |grad_ge u_j|^2 + c_n R_ge] at every node,
/// u_j = v_j / mu. Throws std::invalid_argument for infeasible certificates.
NodeResidual for_eigen_residual(const DiscreteConformalClass& cls, const ConformalFactor& mu_e,
                                const ExtremalityCertificate& cert);

struct HarmonicMapCheck {
  double residual = 0.0;       // max_j |S v_j - diag(rho dv) v_j|, rho = lambda w - c_n R
  double lambda_k = 0.0;
  double curvature_bound = 0.0;  // c_n max(R_ge)
  bool bound_holds = false;      // lambda_k >= curvature_bound - 1e-9
};

/// Requires a feasible certificate and constant mu_e (HypothesisViolation
/// "constant_factor" otherwise).
HarmonicMapCheck harmonic_map_residual(const DiscreteConformalClass& cls, const ConformalFactor& mu_e,
                                       const ExtremalityCertificate& cert);

struct NecessaryCondition {
  Field residual;  // c_n R - lambda_1 mu^q
  double sup = 0.0;
  bool sign_constant = false;
  bool sign_matches = false;  // sign(R) == sign(lambda_1)
  std::string message;
};

NecessaryCondition necessary_condition_residual(const DiscreteConformalClass& cls, const ConformalFactor& mu_e,
                                                double lambda1);

struct MaximizerResult {
  ConformalFactor mu_max = ConformalFactor::constant(1, 1.0);
  double Lambda1 = 0.0;
  /// lambda_1 of the pencil at mu_max.
  double lambda1_check = 0.0;
  /// |A 1 - Lambda1 M_w 1|_inf / (|Lambda1| |M_w 1|_inf)
  double eigenvector_check = 0.0;
  int yamabe_sign = 0;
};

/// mu_max = (R / sum(R dv))^{1/q}, Lambda1 = c_n sum(R dv). Throws
/// HypothesisViolation("necessary_condition_sign") unless |R| >= r_floor with one sign.
MaximizerResult construct_maximizer(const DiscreteConformalClass& cls, double r_floor = 1e-10,
                                    const SolverOptions& opts = {});

struct OptimizerOptions {
  double opt_tol = 1e-9;  // stop when the log-step sup norm falls below this
  int max_iter = 500;
  double max_log_step = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 40;
  double r_floor = 1e-10;
};

struct OptimizerStep {
  int iteration = 0;
  double value = 0.0;
  double slope = 0.0;     // directional derivative along the chosen direction
  double step = 0.0;      // sup |alpha h|
  int backtracks = 0;
};

struct OptimizerResult {
  ConformalFactor mu_star = ConformalFactor::constant(1, 1.0);
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<OptimizerStep> trace;
};

/// Projected ascent on F^1 with mu <- normalize(mu exp(alpha h)).
OptimizerResult optimize_F1(const DiscreteConformalClass& cls, const ConformalFactor& mu_init,
                            const OptimizerOptions& oopts = {}, const SolverOptions& opts = {});

}  // namespace conflap
