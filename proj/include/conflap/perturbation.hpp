#pragma once

#include <string>
#include <vector>

#include "conflap/functional.hpp"
#include "conflap/spectral.hpp"

namespace conflap {

/// Generator h = d/dt mu_t at t = 0 of the deformation g(t) = mu_t^q g~,
/// relative to the current metric: the total factor is mu_t * mu~.
struct DeformationDirection {
  Field h;
};

enum class GapCase { gap_below, gap_above, both_gaps, no_gap };
std::string to_string(GapCase c);

/// Which of lambda_k > lambda_{k-1} (gap_below) and lambda_k < lambda_{k+1}
/// (gap_above) hold for the 1-based index k. k = 1 always has a gap below.
GapCase classify_gap(const SpectrumResult& spectrum, Eigen::Index k);

struct ProjectedPerturbation {
  /// T_ij = -q lambda_k sum(h v_i v_j w dv) on a weighted-orthonormal basis.
  Eigen::MatrixXd T;
  /// Eigenvalues of T, ascending: the first-order branch rates.
  Eigen::VectorXd derivative_set;
  /// Cluster basis rotated to diagonalize T (node fields).
  Eigen::MatrixXd branch_basis;
  /// False when T has repeated eigenvalues: the branch vectors are then not
  /// determined at first order.
  bool canonical = true;
};

ProjectedPerturbation projected_perturbation_matrix(const DiscreteConformalClass& cls, const ConformalFactor& mu,
                                                    const SpectrumResult& spectrum, const Cluster& cluster,
                                                    const DeformationDirection& h);

/// Same, for an explicit cluster basis given as node fields (columns). The
/// basis must be weighted-orthonormal to 1e-8.
ProjectedPerturbation projected_perturbation_matrix(const DiscreteConformalClass& cls, const ConformalFactor& mu,
                                                    const Eigen::MatrixXd& basis_nodal, double lambda_k,
                                                    const DeformationDirection& h);

struct OneSidedDerivatives {
  double right = 0.0;
  double left = 0.0;
  GapCase tag = GapCase::no_gap;
};

/// gap_below: right = min, left = max; gap_above: right = max, left = min;
/// both_gaps requires a single rate. Throws HypothesisViolation("gap_condition") on no_gap.
OneSidedDerivatives one_sided_lambda_derivatives(const Eigen::VectorXd& derivative_set, GapCase gaps);

struct PerturbationReport {
  Eigen::Index k = 1;
  double lambda_k = 0.0;
  Eigen::Index multiplicity = 1;
  Eigen::VectorXd derivative_set;
  GapCase case_tag = GapCase::no_gap;
  double lambda_right = 0.0;
  double lambda_left = 0.0;
  double F_right = 0.0;
  double F_left = 0.0;
  /// q lambda_k sum(h mu~^q dv)
  double volume_term = 0.0;
  bool canonical = true;
};

/// One-sided derivatives of lambda_k and F^k along h at a normalized factor
/// (sum(mu~^q dv) = 1 to 1e-10, else HypothesisViolation("normalization")).
PerturbationReport one_sided_F_derivatives(const DiscreteConformalClass& cls, const ConformalFactor& mu_tilde,
                                           const DeformationDirection& h, Eigen::Index k,
                                           const SolverOptions& opts = {});

/// h = (w - mean_{g~}(w)) mu~^2, so that sum(h mu~^q dv) = 0.
DeformationDirection zero_mean_generator(const DiscreteConformalClass& cls, const ConformalFactor& mu_tilde,
                                         const Field& w_field);

struct FdEstimate {
  double lambda_right = 0.0, lambda_left = 0.0;
  double F_right = 0.0, F_left = 0.0;
  /// |extrapolated - next lower order| for each quantity.
  double lambda_right_err = 0.0, lambda_left_err = 0.0;
  double F_right_err = 0.0, F_left_err = 0.0;
  std::vector<double> steps;
};

/// One-sided difference quotients of lambda_k(t) (the k-th sorted eigenvalue)
/// and F^k at mu_t = mu~ (1 + t h), t = +-steps, Richardson-extrapolated.
/// Throws std::invalid_argument if some mu_t drops below the factor floor.
FdEstimate fd_oracle(const DiscreteConformalClass& cls, const ConformalFactor& mu_tilde, const DeformationDirection& h,
                     Eigen::Index k, const std::vector<double>& steps = {1e-3, 5e-4, 2.5e-4},
                     const SolverOptions& opts = {});

}  // namespace conflap
