#include "conflap/extremal.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "conflap/errors.hpp"

namespace conflap {

namespace {

// Symmetric m x m matrices as vectors in R^{m(m+1)/2}; off-diagonal entries
// carry a sqrt(2) so the Euclidean norm is the Frobenius norm.
struct SymPacking {
  Eigen::Index m;
  Eigen::Index dim() const { return m * (m + 1) / 2; }

  Eigen::VectorXd pack(const Eigen::MatrixXd& P) const {
    Eigen::VectorXd y(dim());
    Eigen::Index t = 0;
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = a; b < m; ++b) y[t++] = a == b ? P(a, a) : std::sqrt(2.0) * P(a, b);
    return y;
  }
  Eigen::MatrixXd unpack(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd P(m, m);
    Eigen::Index t = 0;
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = a; b < m; ++b) {
        const double v = a == b ? y[t] : y[t] / std::sqrt(2.0);
        P(a, b) = P(b, a) = v;
        ++t;
      }
    return P;
  }
  // Row x of the map P -> V(x)^T P V(x).
  Eigen::MatrixXd rows(const Eigen::MatrixXd& V) const {
    Eigen::MatrixXd B(V.rows(), dim());
    Eigen::Index t = 0;
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = a; b < m; ++b) {
        B.col(t++) = a == b ? V.col(a).cwiseAbs2() : (std::sqrt(2.0) * V.col(a).cwiseProduct(V.col(b))).eval();
      }
    return B;
  }
};

// Euclidean projection onto {x >= 0, sum x = 1}.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& x) {
  std::vector<double> s(x.data(), x.data() + x.size());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cum += s[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (s[i] - t > 0.0) theta = t;
  }
  return (x.array() - theta).max(0.0).matrix();
}

// Frobenius projection onto {P psd, tr P = 1}.
Eigen::MatrixXd project_spectraplex(const Eigen::MatrixXd& P) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (P + P.transpose()));
  const Eigen::VectorXd s = project_simplex(es.eigenvalues());
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

double sup_violation(const Eigen::MatrixXd& B, const Eigen::VectorXd& y) {
  return ((B * y).array() - 1.0).abs().maxCoeff();
}

// Minimizes sum rho (1 - V^T P V)^2 over the spectraplex (accelerated projected gradient).
Eigen::MatrixXd closest_hull_point(const Eigen::MatrixXd& V, const Field& rho, int max_iter) {
  const Eigen::Index m = V.cols();
  if (m == 1) return Eigen::MatrixXd::Ones(1, 1);
  double L = 0.0;
  for (Eigen::Index x = 0; x < V.rows(); ++x) L += rho[x] * std::pow(V.row(x).squaredNorm(), 2);
  L *= 2.0;
  auto objective = [&](const Eigen::MatrixXd& P) {
    const Field c = (V * P).cwiseProduct(V).rowwise().sum();
    return (1.0 - c.array()).square().matrix().dot(rho);
  };
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(m, m) / static_cast<double>(m);
  Eigen::MatrixXd Y = P;
  double t = 1.0, prev = objective(P);
  for (int it = 0; it < max_iter; ++it) {
    const Field c = (V * Y).cwiseProduct(V).rowwise().sum();
    const Field r = rho.cwiseProduct((1.0 - c.array()).matrix());
    const Eigen::MatrixXd grad = -2.0 * V.transpose() * r.asDiagonal() * V;
    const Eigen::MatrixXd Pn = project_spectraplex(Y - grad / L);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Y = Pn + ((t - 1.0) / tn) * (Pn - P);
    P = Pn;
    t = tn;
    const double obj = objective(P);
    if (std::abs(prev - obj) <= 1e-15 * std::max(obj, 1e-300) && it > 10) break;
    prev = obj;
  }
  return P;
}

}  // namespace

ExtremalityCertificate certify_extremal(const DiscreteConformalClass& cls, const ConformalFactor& mu_e, Eigen::Index k,
                                        const CertificateOptions& copts, const SolverOptions& opts) {
  const double mass = conformal_mass(cls, mu_e);
  if (std::abs(mass - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "factor is not normalized (sum mu^q dv = " << mass << "); apply normalize_factor first";
    throw HypothesisViolation(tags::normalization, os.str());
  }
  const SpectrumResult s = solve_through_cluster(cls, mu_e, k, opts);
  const GapCase gaps = classify_gap(s, k);
  if (gaps == GapCase::no_gap)
    throw HypothesisViolation(tags::gap_condition,
                              "lambda_k has no gap below or above; the certificate theorem assumes "
                              "lambda_k > lambda_{k-1} or lambda_k < lambda_{k+1}");
  const Field w = conformal_data(cls, mu_e).weight;
  const Field rho = w.cwiseProduct(cls.dv());
  const double lambda = s.eigenvalues[k - 1];
  const double scale = operator_inf_norm(assemble_operator(cls)) / rho.minCoeff();
  if (std::abs(lambda) <= copts.sign_tol * scale)
    throw HypothesisViolation(tags::nonzero_eigenvalue, "lambda_k vanishes; the certificate theorem assumes lambda_k != 0");

  const Cluster& c = s.cluster_of(k);
  ExtremalityCertificate cert;
  cert.k = k;
  cert.lambda_k = lambda;
  cert.gaps = gaps;
  cert.cert_tol = copts.cert_tol;
  cert.basis = s.nodal.middleCols(c.first, c.size);
  const Eigen::MatrixXd& V = cert.basis;
  const SymPacking pk{V.cols()};
  const Eigen::MatrixXd B = pk.rows(V);

  // Affine part: least-squares solution set of B y = 1, rows weighted by rho.
  const Field sr = rho.cwiseSqrt();
  const Eigen::MatrixXd Bw = sr.asDiagonal() * B;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Bw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > 1e-12 * sv[0]) ++rank;
  const Eigen::MatrixXd Vr = svd.matrixV().leftCols(rank);
  const Eigen::VectorXd y_ls =
      Vr * (sv.head(rank).cwiseInverse().asDiagonal() * (svd.matrixU().leftCols(rank).transpose() * sr));
  auto proj_affine = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return y_ls + y - Vr * (Vr.transpose() * y); };
  auto proj_cone = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return pk.pack(project_spectraplex(pk.unpack(y))); };

  // Dykstra alternation; the iterate after the cone step is always admissible.
  Eigen::VectorXd x = proj_cone(y_ls), p = Eigen::VectorXd::Zero(x.size()), q = p;
  double best = sup_violation(B, x);
  Eigen::VectorXd best_x = x;
  int since_improvement = 0;
  int it = 0;
  for (; it < copts.max_alternations && best > 0.01 * copts.cert_tol; ++it) {
    const Eigen::VectorXd a = proj_affine(x + p);
    p = x + p - a;
    const Eigen::VectorXd b = proj_cone(a + q);
    q = a + q - b;
    const double step = (b - x).norm();
    x = b;
    const double r = sup_violation(B, x);
    if (r < best * (1.0 - 1e-6)) {
      since_improvement = 0;
    } else if (++since_improvement > 200) {
      break;
    }
    if (r < best) {
      best = r;
      best_x = x;
    }
    if (step <= 1e-16) break;
  }
  cert.iterations = it;
  cert.P = pk.unpack(best_x);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cert.P);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = es.eigenvalues().size() - 1; j >= 0; --j)
    if (es.eigenvalues()[j] >= copts.family_floor) keep.push_back(j);
  cert.family.resize(V.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    cert.family.col(static_cast<Eigen::Index>(j)) =
        std::sqrt(es.eigenvalues()[keep[j]]) * (V * es.eigenvectors().col(keep[j]));
  cert.sup_residual = (cert.family.rowwise().squaredNorm().array() - 1.0).abs().maxCoeff();
  cert.feasible = cert.sup_residual <= copts.cert_tol;
  if (cert.feasible) return cert;

  // Separating direction: with c* the rho-closest point of Conv(K) to 1,
  // h = 1 - c* has <h, c>_rho <= -|1 - c*|^2 on Conv(K) and <h, 1>_rho = 0.
  const Eigen::MatrixXd Pstar = closest_hull_point(V, rho, 20000);
  const Field cstar = (V * Pstar).cwiseProduct(V).rowwise().sum();
  Field h = (1.0 - cstar.array()).matrix();
  h.array() -= h.dot(rho) / rho.sum();
  const double hs = h.cwiseAbs().maxCoeff();
  if (hs > 0.0) h /= hs;
  const DeformationDirection dir{h};
  const ProjectedPerturbation pp = projected_perturbation_matrix(cls, mu_e, V, lambda, dir);
  const OneSidedDerivatives d = one_sided_lambda_derivatives(pp.derivative_set, gaps);
  const double volume = cls.q() * lambda * h.dot(rho);
  cert.witness = dir;
  cert.witness_F_right = volume + d.right;
  cert.witness_F_left = volume + d.left;
  return cert;
}

namespace {

SparseMatrix node_stiffness(const DiscreteConformalClass& cls) {
  if (cls.lumped()) return cls.stiffness();
  return cls.node_stiffness_dense().sparseView(1.0, 0.0);
}

}  // namespace

NodeResidual for_eigen_residual(const DiscreteConformalClass& cls, const ConformalFactor& mu_e,
                                const ExtremalityCertificate& cert) {
  if (!cert.feasible) throw std::invalid_argument("for_eigen_residual needs a feasible certificate");
  const SparseMatrix S = node_stiffness(cls);
  const Field& dv = cls.dv();
  const Eigen::ArrayXd mu = mu_e.values().array();
  const double p = cls.q() + 1.0;
  const Eigen::ArrayXd mu_mp = mu.pow(-p);
  const Eigen::ArrayXd Smu = (S * mu.matrix()).array();

  // Laplacian of g_e from the conformal covariance of the lumped operator.
  auto lap_ge = [&](const Eigen::ArrayXd& f) -> Eigen::ArrayXd {
    const Eigen::ArrayXd Smf = (S * (mu * f).matrix()).array();
    return mu_mp * (-Smf + f * Smu) / dv.array();
  };
  // |grad_ge u|^2 localized by stiffness rows; the mu_j weight makes the
  // discrete product rule Lap(u^2) = 2 u Lap u + 2|grad u|^2 exact.
  auto grad2_ge = [&](const Eigen::ArrayXd& u) -> Eigen::ArrayXd {
    Eigen::ArrayXd e = Eigen::ArrayXd::Zero(u.size());
    for (Eigen::Index col = 0; col < S.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(S, col); it; ++it) {
        const Eigen::Index i = it.row(), j = it.col();
        if (i == j) continue;
        e[i] += -it.value() * mu[j] * (u[i] - u[j]) * (u[i] - u[j]);
      }
    return mu_mp * e / (2.0 * dv.array());
  };

  const Eigen::ArrayXd mu2 = mu.square();
  Eigen::ArrayXd gradient = Eigen::ArrayXd::Zero(mu.size());
  for (Eigen::Index j = 0; j < cert.family.cols(); ++j) gradient += grad2_ge(cert.family.col(j).array() / mu);
  const Eigen::ArrayXd curvature = mu_mp * (Smu / dv.array() + cls.c_n() * cls.curvature().array() * mu);
  const Eigen::ArrayXd rhs = -0.5 * mu2 * lap_ge(mu2.inverse()) + mu2 * gradient + curvature;

  NodeResidual r;
  r.residual = (cert.lambda_k - rhs).matrix();
  r.sup = r.residual.cwiseAbs().maxCoeff();
  const Field vol = conformal_data(cls, mu_e).weight.cwiseProduct(dv);
  r.l2 = std::sqrt(r.residual.cwiseAbs2().dot(vol));
  return r;
}

HarmonicMapCheck harmonic_map_residual(const DiscreteConformalClass& cls, const ConformalFactor& mu_e,
                                       const ExtremalityCertificate& cert) {
  if (!cert.feasible) throw std::invalid_argument("harmonic_map_residual needs a feasible certificate");
  const Field& mu = mu_e.values();
  if (mu.maxCoeff() - mu.minCoeff() > 1e-12 * mu.maxCoeff())
    throw HypothesisViolation(tags::constant_factor,
                              "the harmonic map equation applies when the extremal factor is constant");
  const Field w = conformal_data(cls, mu_e).weight;
  // Constant mu: R_ge = R / w, so rho = lambda w - c_n R is lambda_k - c_n R_ge in g scale.
  const Field rho = cert.lambda_k * w - cls.c_n() * cls.curvature();
  const Field rdv = rho.cwiseProduct(cls.dv());

  HarmonicMapCheck out;
  out.lambda_k = cert.lambda_k;
  for (Eigen::Index j = 0; j < cert.family.cols(); ++j) {
    const Field v = cert.family.col(j);
    Eigen::VectorXd r;
    if (cls.lumped()) {
      r = cls.stiffness() * v - rdv.cwiseProduct(v);
    } else {
      const Eigen::MatrixXd& Phi = *cls.basis();
      const Eigen::VectorXd coeff = Phi.transpose() * cls.dv().cwiseProduct(v);
      r = cls.stiffness() * coeff - Phi.transpose() * rdv.cwiseProduct(v);
    }
    out.residual = std::max(out.residual, r.norm());
  }
  out.curvature_bound = cls.c_n() * cls.curvature().cwiseQuotient(w).maxCoeff();
  out.bound_holds = out.lambda_k >= out.curvature_bound - 1e-9;
  return out;
}

}  // namespace conflap
