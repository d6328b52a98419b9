#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "conflap/geometry.hpp"

namespace conflap {

namespace {

// Gauss-Legendre rule on [0, 1] by Golub-Welsch.
void gauss_legendre_unit(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes = (es.eigenvalues().array() + 1.0) / 2.0;
  weights = es.eigenvectors().row(0).transpose().array().square();  // 2 v0^2 / 2
}

}  // namespace

DiscreteConformalClass build_sphere3_class(int L) {
  if (L < 2) throw std::invalid_argument("sphere3 degree cutoff must be >= 2");

  // Hopf coordinates x = (sqrt(1-s) e^{i phi1}, sqrt(s) e^{i phi2}); dv = ds dphi1 dphi2 / 2.
  const int ns = (L + 2) / 2;  // 2 ns - 1 >= L
  const int nphi = 2 * L + 1;  // trapezoid exact for trigonometric degree 2L
  Eigen::VectorXd s, ws;
  gauss_legendre_unit(ns, s, ws);
  const Eigen::Index n = static_cast<Eigen::Index>(ns) * nphi * nphi;
  const double dphi = 2.0 * std::numbers::pi / nphi;

  DiscreteConformalClass::Parts p;
  p.dim = 3;
  p.backend = Backend::sphere3_spectral;
  p.dv.resize(n);
  p.coords.resize(n, 4);
  p.analytic_volume = 2.0 * std::numbers::pi * std::numbers::pi;
  Eigen::Index row = 0;
  for (int i = 0; i < ns; ++i)
    for (int a = 0; a < nphi; ++a)
      for (int b = 0; b < nphi; ++b, ++row) {
        const double c = std::sqrt(1.0 - s[i]), r = std::sqrt(s[i]);
        p.coords(row, 0) = c * std::cos(a * dphi);
        p.coords(row, 1) = c * std::sin(a * dphi);
        p.coords(row, 2) = r * std::cos(b * dphi);
        p.coords(row, 3) = r * std::sin(b * dphi);
        p.dv[row] = 0.5 * ws[i] * dphi * dphi;
      }

  // Orthonormalize monomials degree by degree; the vectors accepted at degree l
  // span the complement of P_{l-1} in P_l, i.e. the degree-l harmonics.
  std::vector<Eigen::VectorXd> basis;
  std::vector<int> degree;
  auto inner = [&](const Eigen::VectorXd& f, const Eigen::VectorXd& g) { return f.cwiseProduct(g).dot(p.dv); };
  for (int l = 0; l <= L; ++l) {
    int accepted = 0;
    for (int e0 = l; e0 >= 0; --e0)
      for (int e1 = l - e0; e1 >= 0; --e1)
        for (int e2 = l - e0 - e1; e2 >= 0; --e2) {
          const int e3 = l - e0 - e1 - e2;
          Eigen::VectorXd f(n);
          for (Eigen::Index k = 0; k < n; ++k)
            f[k] = std::pow(p.coords(k, 0), e0) * std::pow(p.coords(k, 1), e1) * std::pow(p.coords(k, 2), e2) *
                   std::pow(p.coords(k, 3), e3);
          const double norm0 = std::sqrt(inner(f, f));
          for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) f -= inner(q, f) * q;
          const double norm = std::sqrt(inner(f, f));
          if (norm > 1e-8 * norm0) {
            basis.push_back(f / norm);
            degree.push_back(l);
            ++accepted;
          }
        }
    if (accepted != (l + 1) * (l + 1))
      throw std::logic_error("sphere3 harmonic basis: degree " + std::to_string(l) + " has " +
                             std::to_string(accepted) + " functions");
  }

  const Eigen::Index nb = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd Phi(n, nb);
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index j = 0; j < nb; ++j) {
    Phi.col(j) = basis[static_cast<std::size_t>(j)];
    const int l = degree[static_cast<std::size_t>(j)];
    if (l > 0) trip.emplace_back(j, j, l * (l + 2.0));
  }
  // Fix the sign of the constant mode.
  if (Phi.col(0).sum() < 0) Phi.col(0) *= -1.0;
  p.stiffness.resize(nb, nb);
  p.stiffness.setFromTriplets(trip.begin(), trip.end());
  p.basis = std::move(Phi);
  p.basis_degree = std::move(degree);
  p.curvature = Field::Constant(n, 6.0);
  return DiscreteConformalClass(std::move(p));
}

}  // namespace conflap
