#pragma once

#include <optional>
#include <string>

#include "conflap/spectral.hpp"

namespace conflap::detail {

struct PencilEigs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // M-orthonormal
  Eigen::VectorXd residuals;
  std::optional<double> next_value;  // lambda_{k+1} when known
  int iterations = 0;
  std::string method;
};

/// Relative residual ||A v - lambda M v|| / max(||A v||, |lambda| ||M v||, 1e-3 ||A|| ||v||).
double pencil_residual(const SparseMatrix& A, const SparseMatrix& M, const Eigen::VectorXd& v, double lambda,
                       double a_norm);

PencilEigs dense_pencil_eigs(const SparseMatrix& A, const SparseMatrix& M, bool diagonal_mass, Eigen::Index k);

/// Block shift-invert Krylov iteration with full M-reorthogonalization and
/// Rayleigh-Ritz on A; `sigma` must lie below the wanted eigenvalues.
PencilEigs shift_invert_eigs(const SparseMatrix& A, const SparseMatrix& M, Eigen::Index k, double sigma,
                             const SolverOptions& opts);

}  // namespace conflap::detail
