#include "eigensolver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/CholmodSupport>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "conflap/errors.hpp"

namespace conflap::detail {

double pencil_residual(const SparseMatrix& A, const SparseMatrix& M, const Eigen::VectorXd& v, double lambda,
                       double a_norm) {
  const Eigen::VectorXd Av = A * v;
  const Eigen::VectorXd Mv = M * v;
  const double scale = std::max({Av.norm(), std::abs(lambda) * Mv.norm(), 1e-3 * a_norm * v.norm(), 1e-300});
  return (Av - lambda * Mv).norm() / scale;
}

PencilEigs dense_pencil_eigs(const SparseMatrix& A, const SparseMatrix& M, bool diagonal_mass, Eigen::Index k) {
  const Eigen::Index n = A.rows();
  PencilEigs out;
  out.method = "dense";
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  if (diagonal_mass) {
    const Eigen::VectorXd d = Eigen::VectorXd(M.diagonal()).cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd B = d.asDiagonal() * Eigen::MatrixXd(A) * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    if (es.info() != Eigen::Success) throw SolverError("dense symmetric eigensolver failed");
    values = es.eigenvalues();
    vectors = d.asDiagonal() * es.eigenvectors();
  } else {
    const Eigen::MatrixXd Ad(A), Md(M);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Ad, Md);
    if (es.info() != Eigen::Success) throw SolverError("dense generalized eigensolver failed");
    values = es.eigenvalues();
    vectors = es.eigenvectors();
  }
  out.values = values.head(k);
  out.vectors = vectors.leftCols(k);
  if (k < n) out.next_value = values[k];
  return out;
}

namespace {

Eigen::MatrixXd m_orthonormalize(const SparseMatrix& M, const Eigen::MatrixXd& V, Eigen::MatrixXd W) {
  for (int pass = 0; pass < 2 && V.cols() > 0; ++pass) W -= V * (V.transpose() * (M * W));
  Eigen::MatrixXd out(W.rows(), W.cols());
  Eigen::Index kept = 0;
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    Eigen::VectorXd w = W.col(j);
    const double n0 = std::sqrt(w.dot(M * w));
    for (int pass = 0; pass < 2; ++pass) {
      if (V.cols() > 0) w -= V * (V.transpose() * (M * w));
      for (Eigen::Index i = 0; i < kept; ++i) w -= out.col(i).dot(M * w) * out.col(i);
    }
    const double nrm = std::sqrt(w.dot(M * w));
    if (nrm > 1e-10 * n0 && nrm > 0.0) out.col(kept++) = w / nrm;
  }
  return out.leftCols(kept);
}

}  // namespace

PencilEigs shift_invert_eigs(const SparseMatrix& A, const SparseMatrix& M, Eigen::Index k, double sigma,
                             const SolverOptions& opts) {
  const Eigen::Index n = A.rows();
  const double a_norm = operator_inf_norm(A);
  // Supernodal Cholesky; A - s M is positive definite exactly when s < lambda_1,
  // so a successful factorization doubles as a test that the shift is safe.
  Eigen::CholmodSupernodalLLT<SparseMatrix> chol;
  chol.cholmod().print = 0;
  chol.analyzePattern(A + M);
  auto try_shift = [&](double s) {
    chol.factorize(A - s * M);
    return chol.info() == Eigen::Success;
  };
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  const bool use_ldlt = !try_shift(sigma);
  if (use_ldlt) {
    ldlt.compute(A - sigma * M);
    if (ldlt.info() != Eigen::Success) throw SolverError("shift-invert factorization failed");
  }
  auto apply_inverse = [&](const Eigen::MatrixXd& B) -> Eigen::MatrixXd {
    return use_ldlt ? Eigen::MatrixXd(ldlt.solve(B)) : Eigen::MatrixXd(chol.solve(B));
  };

  const Eigen::Index block = std::min<Eigen::Index>(n, std::max<Eigen::Index>(k + 2, 4));
  const Eigen::Index max_basis = std::min<Eigen::Index>(n, std::max<Eigen::Index>(3 * (k + block), 120));

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::MatrixXd start(n, block);
  for (Eigen::Index j = 0; j < block; ++j)
    for (Eigen::Index i = 0; i < n; ++i) start(i, j) = uni(rng);
  Eigen::MatrixXd V = m_orthonormalize(M, Eigen::MatrixXd(n, 0), start);

  PencilEigs out;
  out.method = "shift_invert";
  double worst = 0.0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Eigen::MatrixXd AV = A * V;
    Eigen::MatrixXd H = V.transpose() * AV;
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const Eigen::Index keep = std::min<Eigen::Index>(V.cols(), k + block);
    const Eigen::MatrixXd X = V * es.eigenvectors().leftCols(keep);
    const Eigen::VectorXd theta = es.eigenvalues().head(keep);

    bool converged = V.cols() > k || V.cols() == n;
    worst = 0.0;
    Eigen::VectorXd res(std::min(k, keep));
    for (Eigen::Index i = 0; i < res.size(); ++i) {
      res[i] = pencil_residual(A, M, X.col(i), theta[i], a_norm);
      worst = std::max(worst, res[i]);
      if (res[i] > opts.solver_tol) converged = false;
    }
    if (converged && keep >= k) {
      out.values = theta.head(k);
      out.vectors = X.leftCols(k);
      out.residuals = res;
      out.iterations = it;
      if (keep > k) out.next_value = theta[k];
      return out;
    }

    // A loose lower bound leaves the shift far below the spectrum and the
    // transformed eigenvalues crowded; move it up under the Ritz values.
    if (!use_ldlt && it % 2 == 0 && keep > k) {
      // Some eigenvalue lies within eta of theta_0 (M^{-1}-norm residual bound).
      const Eigen::VectorXd r = A * X.col(0) - theta[0] * (M * X.col(0));
      const double eta = std::sqrt(r.cwiseAbs2().cwiseQuotient(M.diagonal()).sum());
      const double margin = std::max(2.0 * eta, 1e-4 * (std::abs(theta[0]) + theta[k] - theta[0]));
      double proposal = theta[0] - margin;
      if (proposal > sigma && theta[0] - proposal < 0.25 * (theta[0] - sigma)) {
        bool moved = false;
        for (int tries = 0; tries < 4 && !moved; ++tries, proposal = 0.5 * (proposal + sigma)) moved = try_shift(proposal);
        if (moved) {
          sigma = proposal;
        } else if (!try_shift(sigma)) {
          throw SolverError("shift-invert refactorization failed");
        }
      }
    }

    const Eigen::Index grow = std::min(block, X.cols());
    Eigen::MatrixXd E = apply_inverse(M * X.leftCols(grow));
    if (V.cols() + grow > max_basis) V = X;
    E = m_orthonormalize(M, V, E);
    if (E.cols() == 0) {
      Eigen::MatrixXd fresh(n, grow);
      for (Eigen::Index j = 0; j < grow; ++j)
        for (Eigen::Index i = 0; i < n; ++i) fresh(i, j) = uni(rng);
      E = m_orthonormalize(M, V, fresh);
      if (E.cols() == 0) break;
    }
    Eigen::MatrixXd grown(n, V.cols() + E.cols());
    grown << V, E;
    V = std::move(grown);
  }
  std::ostringstream os;
  os << "shift-invert eigensolver did not converge in " << opts.max_iterations
     << " iterations (k = " << k << ", sigma = " << sigma << ", worst relative residual = " << worst
     << ", tolerance = " << opts.solver_tol << ")";
  throw SolverError(os.str());
}

}  // namespace conflap::detail
