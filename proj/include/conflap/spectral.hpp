#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "conflap/geometry.hpp"

namespace conflap {

struct SolverOptions {
  double solver_tol = 1e-9;
  double cluster_tol = 1e-7;
  Eigen::Index dense_threshold = 4000;
  int max_iterations = 500;
  bool reproducible = true;
  std::uint64_t seed = 0x5eedULL;
};

/// Maximal group of numerically equal eigenvalues, indices [first, first+size).
struct Cluster {
  Eigen::Index first = 0;
  Eigen::Index size = 0;
  double value = 0.0;
  /// Distance to the neighbouring eigenvalues; +inf if there is none below,
  /// NaN above when the cluster touches the last computed eigenvalue.
  double gap_below = 0.0;
  double gap_above = 0.0;
  /// False when the cluster ends at the last computed index and might extend.
  bool closed_above = true;

  Eigen::Index last() const { return first + size - 1; }
  bool contains(Eigen::Index i) const { return i >= first && i <= last(); }
};

struct SpectrumResult {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // dof coefficients, <v_i, v_j>_w = delta_ij
  Eigen::MatrixXd nodal;         // node values of the eigenvectors (v = mu u)
  std::vector<Cluster> clusters;
  Eigen::VectorXd residuals;     // ||A v - lambda M_w v|| / scale
  std::string method;            // "dense" or "shift_invert"
  int iterations = 0;
  std::vector<std::string> diagnostics;

  /// Cluster holding the 1-based eigenvalue index k.
  const Cluster& cluster_of(Eigen::Index k) const;
};

/// A = S + c_n Phi^T diag(dv R) Phi (dof space).
SparseMatrix assemble_operator(const DiscreteConformalClass& cls);

/// M_w = Phi^T diag(w dv) Phi (diagonal for nodal classes).
SparseMatrix weighted_mass(const DiscreteConformalClass& cls, const Field& weight);

/// First k_max eigenpairs of A v = lambda M_w v with w = mu^q.
/// Throws SolverError on non-convergence and std::invalid_argument if k_max
/// is out of range.
SpectrumResult solve_pencil(const DiscreteConformalClass& cls, const ConformalFactor& mu, Eigen::Index k_max,
                            const SolverOptions& opts = {});

/// Solves with enough eigenpairs that the cluster holding index k is closed
/// above (or reaches the end of the spectrum).
SpectrumResult solve_through_cluster(const DiscreteConformalClass& cls, const ConformalFactor& mu, Eigen::Index k,
                                     const SolverOptions& opts = {});

/// Maximal chains with |lambda_{i+1} - lambda_i| <= tol (1 + |lambda_i|).
/// `complete` says whether the eigenvalue list is the full spectrum.
std::vector<Cluster> cluster_eigenvalues(const Eigen::VectorXd& eigenvalues, double cluster_tol, bool complete);

/// Number of eigenvalues with |lambda| <= tol * ||A||_inf among the computed ones.
Eigen::Index kernel_dimension(const SpectrumResult& spectrum, double scale, double tol);

double operator_inf_norm(const SparseMatrix& A);

}  // namespace conflap
