#include "conflap/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace conflap {

std::string to_string(Backend b) {
  switch (b) {
    case Backend::torus_fd: return "torus_fd";
    case Backend::sphere3_spectral: return "sphere3_spectral";
    case Backend::synthetic: return "synthetic";
  }
  return "unknown";
}

namespace {

double inf_norm(const SparseMatrix& S) {
  double m = 0.0;
  Eigen::VectorXd row_abs = Eigen::VectorXd::Zero(S.rows());
  for (int c = 0; c < S.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(S, c); it; ++it) row_abs[it.row()] += std::abs(it.value());
  if (row_abs.size() > 0) m = row_abs.maxCoeff();
  return m;
}

}  // namespace

DiscreteConformalClass::DiscreteConformalClass(Parts parts) : p_(std::move(parts)) {
  if (p_.dim < 3) throw std::invalid_argument("manifold dimension must be >= 3");
  const auto n = p_.dv.size();
  if (n == 0) throw std::invalid_argument("class has no nodes");
  if (p_.curvature.size() != n) throw std::invalid_argument("curvature field size does not match node count");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(p_.dv[i] > 0.0) || !std::isfinite(p_.dv[i]))
      throw std::invalid_argument("node volumes must be positive and finite");
    if (!std::isfinite(p_.curvature[i])) throw std::invalid_argument("curvature must be finite");
  }
  if (p_.stiffness.rows() != p_.stiffness.cols()) throw std::invalid_argument("stiffness must be square");
  if (p_.basis) {
    if (p_.basis->rows() != n || p_.basis->cols() != p_.stiffness.rows())
      throw std::invalid_argument("basis must be nodes x dofs");
  } else if (p_.stiffness.rows() != n) {
    throw std::invalid_argument("nodal stiffness must be nodes x nodes");
  }
  if (p_.coords.rows() == 0) p_.coords = Eigen::MatrixXd::Zero(n, 0);
  if (p_.coords.rows() != n) throw std::invalid_argument("coordinate rows must match node count");

  p_.stiffness.makeCompressed();
  const double scale = std::max(inf_norm(p_.stiffness), 1e-300);
  const SparseMatrix asym = SparseMatrix(p_.stiffness.transpose()) - p_.stiffness;
  if (inf_norm(asym) > 1e-12 * scale) throw std::invalid_argument("stiffness is not symmetric");
  const Eigen::VectorXd annihilated = p_.stiffness * constant_dofs();
  if (annihilated.lpNorm<Eigen::Infinity>() > 1e-10 * scale)
    throw std::invalid_argument("stiffness does not annihilate constants");
  if (p_.analytic_volume) {
    const double rel = std::abs(volume() - *p_.analytic_volume) / *p_.analytic_volume;
    if (rel > 1e-12) {
      std::ostringstream os;
      os << "node volumes sum to " << volume() << ", expected " << *p_.analytic_volume;
      throw std::invalid_argument(os.str());
    }
  }
}

Field DiscreteConformalClass::to_nodes(const Eigen::VectorXd& dofs) const {
  if (p_.basis) return *p_.basis * dofs;
  return dofs;
}

Eigen::MatrixXd DiscreteConformalClass::to_nodes(const Eigen::MatrixXd& dofs) const {
  if (p_.basis) return *p_.basis * dofs;
  return dofs;
}

Eigen::VectorXd DiscreteConformalClass::constant_dofs() const {
  if (!p_.basis) return Eigen::VectorXd::Ones(p_.dv.size());
  // Orthonormal basis: coefficients are the quadrature moments.
  return p_.basis->transpose() * p_.dv;
}

Eigen::MatrixXd DiscreteConformalClass::node_stiffness_dense() const {
  if (!p_.basis) return Eigen::MatrixXd(p_.stiffness);
  const Eigen::MatrixXd DPhi = p_.dv.asDiagonal() * *p_.basis;
  return DPhi * (Eigen::MatrixXd(p_.stiffness) * DPhi.transpose());
}

Field DiscreteConformalClass::apply_node_stiffness(const Field& f) const {
  if (!p_.basis) return p_.stiffness * f;
  const Eigen::VectorXd moments = p_.basis->transpose() * p_.dv.cwiseProduct(f);
  return p_.dv.cwiseProduct(*p_.basis * (p_.stiffness * moments));
}

DiscreteConformalClass DiscreteConformalClass::with_curvature(Field curvature) const {
  Parts p = p_;
  p.curvature = std::move(curvature);
  return DiscreteConformalClass(std::move(p));
}

namespace {

Field sample_at(const Eigen::MatrixXd& coords, const Expression& e) {
  if (e.max_coordinate() > coords.cols())
    throw std::invalid_argument("expression '" + e.text() + "' uses coordinates beyond x" +
                                std::to_string(coords.cols()));
  Field f(coords.rows());
  std::vector<double> x(coords.cols());
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    for (Eigen::Index c = 0; c < coords.cols(); ++c) x[c] = coords(i, c);
    f[i] = e(x);
  }
  return f;
}

}  // namespace

Field DiscreteConformalClass::sample(const Expression& e) const { return sample_at(p_.coords, e); }

ConformalFactor::ConformalFactor(Field mu, double floor) : mu_(std::move(mu)), floor_(floor) {
  if (!(floor > 0.0)) throw std::invalid_argument("conformal factor floor must be positive");
  for (Eigen::Index i = 0; i < mu_.size(); ++i) {
    if (!std::isfinite(mu_[i]) || mu_[i] < floor_) {
      std::ostringstream os;
      os << "conformal factor entry " << i << " = " << mu_[i] << " is below the floor " << floor_;
      throw std::invalid_argument(os.str());
    }
  }
}

DiscreteConformalClass build_torus_class(std::array<int, 3> grid, std::array<double, 3> edges,
                                         const Expression& curvature, int dim) {
  for (int a = 0; a < 3; ++a) {
    if (grid[a] < 4) throw std::invalid_argument("torus grid needs at least 4 nodes per axis");
    if (!(edges[a] > 0.0)) throw std::invalid_argument("torus edge lengths must be positive");
  }
  const int nx = grid[0], ny = grid[1], nz = grid[2];
  const Eigen::Index n = static_cast<Eigen::Index>(nx) * ny * nz;
  std::array<double, 3> h{};
  for (int a = 0; a < 3; ++a) h[a] = edges[a] / grid[a];
  const double cell = h[0] * h[1] * h[2];

  DiscreteConformalClass::Parts p;
  p.dim = dim;
  p.backend = Backend::torus_fd;
  p.dv = Field::Constant(n, cell);
  p.coords.resize(n, 3);
  p.grid = {nx, ny, nz};
  p.edges = {edges[0], edges[1], edges[2]};
  p.analytic_volume = edges[0] * edges[1] * edges[2];

  auto index = [&](int i, int j, int k) {
    return static_cast<Eigen::Index>(((k + nz) % nz) * ny + (j + ny) % ny) * nx + (i + nx) % nx;
  };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 7);
  std::array<double, 3> coupling{};
  for (int a = 0; a < 3; ++a) coupling[a] = cell / (h[a] * h[a]);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const auto row = index(i, j, k);
        p.coords(row, 0) = i * h[0];
        p.coords(row, 1) = j * h[1];
        p.coords(row, 2) = k * h[2];
        const std::array<Eigen::Index, 6> nb{index(i - 1, j, k), index(i + 1, j, k), index(i, j - 1, k),
                                             index(i, j + 1, k), index(i, j, k - 1), index(i, j, k + 1)};
        double diag = 0.0;
        for (int e = 0; e < 6; ++e) {
          trip.emplace_back(row, nb[e], -coupling[e / 2]);
          diag += coupling[e / 2];
        }
        trip.emplace_back(row, row, diag);
      }
  p.stiffness.resize(n, n);
  p.stiffness.setFromTriplets(trip.begin(), trip.end());

  p.curvature = sample_at(p.coords, curvature);
  return DiscreteConformalClass(std::move(p));
}

DiscreteConformalClass build_synthetic_class(int dim, Field dv, SparseMatrix stiffness, Field curvature,
                                             Eigen::MatrixXd coords, std::optional<double> analytic_volume) {
  DiscreteConformalClass::Parts p;
  p.dim = dim;
  p.backend = Backend::synthetic;
  p.dv = std::move(dv);
  p.stiffness = std::move(stiffness);
  p.curvature = std::move(curvature);
  p.coords = std::move(coords);
  p.analytic_volume = analytic_volume;
  return DiscreteConformalClass(std::move(p));
}

DiscreteConformalClass build_ring_class(int nodes, double length, const Expression& curvature, int dim) {
  if (nodes < 4) throw std::invalid_argument("ring needs at least 4 nodes");
  if (!(length > 0.0)) throw std::invalid_argument("ring length must be positive");
  const double h = length / nodes;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::MatrixXd coords(nodes, 1);
  for (int i = 0; i < nodes; ++i) {
    const double c = 1.0 / h;  // dv / h^2 with dv = h
    trip.emplace_back(i, (i + nodes - 1) % nodes, -c);
    trip.emplace_back(i, (i + 1) % nodes, -c);
    trip.emplace_back(i, i, 2.0 * c);
    coords(i, 0) = i * h;
  }
  SparseMatrix S(nodes, nodes);
  S.setFromTriplets(trip.begin(), trip.end());
  Field R = sample_at(coords, curvature);
  return build_synthetic_class(dim, Field::Constant(nodes, h), std::move(S), std::move(R), std::move(coords), length);
}

ConformalData conformal_data(const DiscreteConformalClass& cls, const ConformalFactor& mu) {
  if (mu.size() != cls.num_nodes()) throw std::invalid_argument("conformal factor size does not match node count");
  ConformalData d;
  const Field& m = mu.values();
  d.weight = m.array().pow(cls.q()).matrix();
  d.vol_tilde = (m.array().square() * d.weight.array() * cls.dv().array()).matrix();
  return d;
}

double conformal_mass(const DiscreteConformalClass& cls, const ConformalFactor& mu) {
  return conformal_data(cls, mu).weight.dot(cls.dv());
}

ConformalFactor normalize_factor(const DiscreteConformalClass& cls, const ConformalFactor& mu) {
  const double mass = conformal_mass(cls, mu);
  const double c = std::pow(mass, -1.0 / cls.q());
  ConformalFactor out(mu.values() * c, std::min(mu.floor(), mu.values().minCoeff() * c));
  // One correction step absorbs the rounding of pow for large exponents.
  const double residual = conformal_mass(cls, out);
  return ConformalFactor(out.values() * std::pow(residual, -1.0 / cls.q()), out.floor());
}

namespace {

Eigen::MatrixXd unit_rms(Eigen::MatrixXd modes, const Field& dv) {
  const double vol = dv.sum();
  for (Eigen::Index c = 0; c < modes.cols(); ++c) {
    const double rms = std::sqrt(modes.col(c).array().square().matrix().dot(dv) / vol);
    if (rms > 0.0) modes.col(c) /= rms;
  }
  return modes;
}

}  // namespace

Eigen::MatrixXd smooth_modes(const DiscreteConformalClass& cls, int band_limit) {
  if (band_limit < 1) throw std::invalid_argument("band limit must be >= 1");
  switch (cls.backend()) {
    case Backend::torus_fd: {
      std::vector<Field> cols;
      for (int a = -band_limit; a <= band_limit; ++a)
        for (int b = -band_limit; b <= band_limit; ++b)
          for (int c = -band_limit; c <= band_limit; ++c) {
            // One representative per +-k pair.
            const int first = a != 0 ? a : (b != 0 ? b : c);
            if (first <= 0) continue;
            Field cs(cls.num_nodes()), sn(cls.num_nodes());
            for (Eigen::Index i = 0; i < cls.num_nodes(); ++i) {
              const double phase = 2.0 * std::numbers::pi *
                                   (a * cls.coords()(i, 0) / cls.edges()[0] + b * cls.coords()(i, 1) / cls.edges()[1] +
                                    c * cls.coords()(i, 2) / cls.edges()[2]);
              cs[i] = std::cos(phase);
              sn[i] = std::sin(phase);
            }
            cols.push_back(cs);
            cols.push_back(sn);
          }
      Eigen::MatrixXd m(cls.num_nodes(), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = cols[j];
      return unit_rms(std::move(m), cls.dv());
    }
    case Backend::sphere3_spectral: {
      std::vector<Eigen::Index> keep;
      for (std::size_t j = 0; j < cls.basis_degree().size(); ++j)
        if (cls.basis_degree()[j] >= 1 && cls.basis_degree()[j] <= band_limit) keep.push_back(static_cast<Eigen::Index>(j));
      Eigen::MatrixXd m(cls.num_nodes(), static_cast<Eigen::Index>(keep.size()));
      for (std::size_t j = 0; j < keep.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = cls.basis()->col(keep[j]);
      return unit_rms(std::move(m), cls.dv());
    }
    case Backend::synthetic: {
      // Lowest non-constant vibration modes of the stiffness against dv.
      const Field isq = cls.dv().cwiseSqrt().cwiseInverse();
      const Eigen::MatrixXd B = isq.asDiagonal() * cls.node_stiffness_dense() * isq.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
      const Eigen::Index count = std::min<Eigen::Index>(2 * band_limit, cls.num_nodes() - 1);
      Eigen::MatrixXd m = isq.asDiagonal() * es.eigenvectors().middleCols(1, count);
      return unit_rms(std::move(m), cls.dv());
    }
  }
  return {};
}

}  // namespace conflap
