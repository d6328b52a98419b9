#include "conflap/spectral.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "conflap/errors.hpp"
#include "eigensolver.hpp"

namespace conflap {

double operator_inf_norm(const SparseMatrix& A) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(A.rows());
  for (int c = 0; c < A.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(A, c); it; ++it) row[it.row()] += std::abs(it.value());
  return row.size() ? row.maxCoeff() : 0.0;
}

namespace {

SparseMatrix galerkin_mass(const Eigen::MatrixXd& Phi, const Field& density) {
  const Eigen::MatrixXd dense = Phi.transpose() * density.asDiagonal() * Phi;
  SparseMatrix out = (0.5 * (dense + dense.transpose())).sparseView();
  out.makeCompressed();
  return out;
}

SparseMatrix diagonal(const Field& d) {
  SparseMatrix out(d.size(), d.size());
  out.reserve(Eigen::VectorXi::Constant(d.size(), 1));
  for (Eigen::Index i = 0; i < d.size(); ++i) out.insert(i, i) = d[i];
  out.makeCompressed();
  return out;
}

}  // namespace

SparseMatrix assemble_operator(const DiscreteConformalClass& cls) {
  const Field potential = cls.c_n() * cls.curvature().cwiseProduct(cls.dv());
  if (cls.lumped()) return cls.stiffness() + diagonal(potential);
  return cls.stiffness() + galerkin_mass(*cls.basis(), potential);
}

SparseMatrix weighted_mass(const DiscreteConformalClass& cls, const Field& weight) {
  const Field density = weight.cwiseProduct(cls.dv());
  if (cls.lumped()) return diagonal(density);
  return galerkin_mass(*cls.basis(), density);
}

std::vector<Cluster> cluster_eigenvalues(const Eigen::VectorXd& ev, double cluster_tol, bool complete) {
  std::vector<Cluster> out;
  const Eigen::Index n = ev.size();
  Eigen::Index i = 0;
  while (i < n) {
    Cluster c;
    c.first = i;
    Eigen::Index j = i;
    while (j + 1 < n && std::abs(ev[j + 1] - ev[j]) <= cluster_tol * (1.0 + std::abs(ev[j]))) ++j;
    c.size = j - i + 1;
    c.value = ev.segment(i, c.size).mean();
    c.gap_below = i == 0 ? std::numeric_limits<double>::infinity() : ev[i] - ev[i - 1];
    if (j + 1 < n) {
      c.gap_above = ev[j + 1] - ev[j];
    } else {
      c.closed_above = complete;
      c.gap_above = complete ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(c);
    i = j + 1;
  }
  return out;
}

const Cluster& SpectrumResult::cluster_of(Eigen::Index k) const {
  for (const auto& c : clusters)
    if (c.contains(k - 1)) return c;
  throw std::out_of_range("eigenvalue index " + std::to_string(k) + " was not computed");
}

SpectrumResult solve_pencil(const DiscreteConformalClass& cls, const ConformalFactor& mu, Eigen::Index k_max,
                            const SolverOptions& opts) {
  const Eigen::Index n = cls.num_dofs();
  if (k_max < 1 || k_max > n) {
    std::ostringstream os;
    os << "requested " << k_max << " eigenpairs from a pencil of size " << n;
    throw std::invalid_argument(os.str());
  }
  const ConformalData cd = conformal_data(cls, mu);
  const SparseMatrix A = assemble_operator(cls);
  const SparseMatrix M = weighted_mass(cls, cd.weight);
  const double a_norm = operator_inf_norm(A);

  detail::PencilEigs eigs;
  if (n <= opts.dense_threshold) {
    eigs = detail::dense_pencil_eigs(A, M, cls.lumped(), k_max);
  } else {
    // lambda_1 lies in [lower, upper]: v^T A v >= min(c_n R / w) v^T M_w v
    // since S is PSD, and the constant function gives a Rayleigh quotient.
    const double lower = (cls.c_n() * cls.curvature().array() / cd.weight.array()).minCoeff();
    const Eigen::VectorXd one = cls.constant_dofs();
    const double upper = one.dot(A * one) / one.dot(M * one);
    const double typical = (Eigen::VectorXd(A.diagonal()).array() / Eigen::VectorXd(M.diagonal()).array()).mean();
    const double sigma =
        lower - 0.1 * (upper - lower) - 0.01 * std::abs(upper) - 1e-6 * std::abs(typical) - 1e-300;
    eigs = detail::shift_invert_eigs(A, M, k_max, sigma, opts);
  }

  SpectrumResult out;
  out.method = eigs.method;
  out.iterations = eigs.iterations;
  out.eigenvalues = eigs.values;
  out.eigenvectors = eigs.vectors;
  out.nodal = cls.to_nodes(out.eigenvectors);
  // Deterministic sign: positive dv-weighted mean, else positive largest entry.
  for (Eigen::Index j = 0; j < k_max; ++j) {
    const double mean = out.nodal.col(j).dot(cls.dv());
    Eigen::Index arg = 0;
    out.nodal.col(j).cwiseAbs().maxCoeff(&arg);
    const double scale = out.nodal.col(j).cwiseAbs().dot(cls.dv());
    const bool flip = std::abs(mean) > 1e-8 * scale ? mean < 0 : out.nodal(arg, j) < 0;
    if (flip) {
      out.nodal.col(j) *= -1.0;
      out.eigenvectors.col(j) *= -1.0;
    }
  }
  out.residuals.resize(k_max);
  for (Eigen::Index j = 0; j < k_max; ++j)
    out.residuals[j] = detail::pencil_residual(A, M, out.eigenvectors.col(j), out.eigenvalues[j], a_norm);

  Eigen::VectorXd values = out.eigenvalues;
  if (eigs.next_value) {
    values.conservativeResize(k_max + 1);
    values[k_max] = *eigs.next_value;
  }
  out.clusters = cluster_eigenvalues(values, opts.cluster_tol, values.size() == n);
  if (eigs.next_value) {
    // Drop the look-ahead value; the cluster it closes is known to be closed.
    auto& last = out.clusters.back();
    if (last.first == k_max) {
      out.clusters.pop_back();
    } else {
      // The look-ahead joined the last cluster: it may extend further.
      last.size -= 1;
      last.closed_above = false;
      last.gap_above = std::numeric_limits<double>::quiet_NaN();
    }
  }
  if (!out.clusters.empty() && out.clusters.front().size > 1) {
    std::ostringstream os;
    os << "lowest eigenvalue cluster has size " << out.clusters.front().size
       << "; the first eigenvalue is expected to be simple";
    out.diagnostics.push_back(os.str());
  }
  return out;
}

SpectrumResult solve_through_cluster(const DiscreteConformalClass& cls, const ConformalFactor& mu, Eigen::Index k,
                                     const SolverOptions& opts) {
  const Eigen::Index n = cls.num_dofs();
  if (k < 1 || k > n) throw std::invalid_argument("eigenvalue index out of range");
  Eigen::Index k_max = std::min(n, k + 2);
  for (;;) {
    SpectrumResult s = solve_pencil(cls, mu, k_max, opts);
    const Cluster& c = s.cluster_of(k);
    if (c.closed_above || k_max == n) return s;
    k_max = std::min(n, 2 * k_max);
  }
}

Eigen::Index kernel_dimension(const SpectrumResult& spectrum, double scale, double tol) {
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < spectrum.eigenvalues.size(); ++i)
    if (std::abs(spectrum.eigenvalues[i]) <= tol * scale) ++count;
  return count;
}

}  // namespace conflap
