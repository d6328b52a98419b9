#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "conflap/expression.hpp"

namespace conflap {

using Field = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Backend { torus_fd, sphere3_spectral, synthetic };

std::string to_string(Backend b);

/// A closed manifold with a fixed background metric, reduced to the data every
/// conformal-Laplacian computation needs: node volumes, a stiffness operator,
/// a scalar-curvature field and the dimension.
///
/// Two representations share this type:
///  * nodal (torus_fd, synthetic): degrees of freedom are node values, the
///    stiffness acts on node fields and all masses are diagonal;
///  * Galerkin (sphere3_spectral): degrees of freedom are coefficients in an
///    orthonormal basis whose node values are the columns of `basis()`.
///    Masses are quadratures at the nodes, M_w = Phi^T diag(w dv) Phi.
///
/// Instances are immutable after construction.
class DiscreteConformalClass {
 public:
  struct Parts {
    int dim = 3;
    Backend backend = Backend::synthetic;
    Field dv;
    SparseMatrix stiffness;
    Field curvature;
    Eigen::MatrixXd coords;                  // nodes x ambient coordinates
    std::optional<Eigen::MatrixXd> basis;    // nodes x dofs, Galerkin only
    std::vector<int> basis_degree;           // per basis column, Galerkin only
    std::vector<int> grid;                   // torus only
    std::vector<double> edges;               // torus only
    std::optional<double> analytic_volume;
  };

  /// Validates the invariants (dim >= 3, dv > 0, S symmetric, S·1 = 0, sizes).
  explicit DiscreteConformalClass(Parts parts);

  int dim() const { return p_.dim; }
  Backend backend() const { return p_.backend; }
  Eigen::Index num_nodes() const { return p_.dv.size(); }
  Eigen::Index num_dofs() const { return p_.stiffness.rows(); }
  bool lumped() const { return !p_.basis.has_value(); }

  const Field& dv() const { return p_.dv; }
  const SparseMatrix& stiffness() const { return p_.stiffness; }
  const Field& curvature() const { return p_.curvature; }
  const Eigen::MatrixXd& coords() const { return p_.coords; }
  const std::optional<Eigen::MatrixXd>& basis() const { return p_.basis; }
  const std::vector<int>& basis_degree() const { return p_.basis_degree; }
  const std::vector<int>& grid() const { return p_.grid; }
  const std::vector<double>& edges() const { return p_.edges; }
  const std::optional<double>& analytic_volume() const { return p_.analytic_volume; }

  /// (n-2) / (4(n-1))
  double c_n() const { return (p_.dim - 2.0) / (4.0 * (p_.dim - 1.0)); }
  /// 4 / (n-2): exponent turning mu into the metric weight.
  double q() const { return 4.0 / (p_.dim - 2.0); }

  double volume() const { return p_.dv.sum(); }

  /// Node values of a dof vector (identity for nodal classes).
  Field to_nodes(const Eigen::VectorXd& dofs) const;
  Eigen::MatrixXd to_nodes(const Eigen::MatrixXd& dofs) const;
  /// Dof vector of the constant function 1.
  Eigen::VectorXd constant_dofs() const;

  /// Stiffness acting on node fields, used for pointwise identities:
  /// S itself for nodal classes, D Phi Lambda Phi^T D for Galerkin ones.
  Eigen::MatrixXd node_stiffness_dense() const;
  Field apply_node_stiffness(const Field& f) const;

  /// Returns a copy with a different curvature field.
  DiscreteConformalClass with_curvature(Field curvature) const;

  Field sample(const Expression& e) const;

 private:
  Parts p_;
};

/// Strictly positive node field mu defining the metric mu^{4/(n-2)} g.
class ConformalFactor {
 public:
  static constexpr double default_floor = 1e-8;

  /// Throws std::invalid_argument if any entry is below `floor` or not finite.
  explicit ConformalFactor(Field mu, double floor = default_floor);
  static ConformalFactor constant(Eigen::Index n, double c) { return ConformalFactor(Field::Constant(n, c)); }

  const Field& values() const { return mu_; }
  Eigen::Index size() const { return mu_.size(); }
  double floor() const { return floor_; }

 private:
  Field mu_;
  double floor_;
};

// ---- construction ----------------------------------------------------------

/// Periodic flat 3-torus, second-order 7-point stiffness, uniform cells.
/// Manifold dimension `dim` (default 3) only enters c_n and q.
DiscreteConformalClass build_torus_class(std::array<int, 3> grid_per_axis, std::array<double, 3> edge_lengths,
                                         const Expression& curvature, int dim = 3);

/// Round S^3 spectral-Galerkin class with hyperspherical harmonics of degree
/// <= L; nodes are a product quadrature exact for polynomial degree 2L.
DiscreteConformalClass build_sphere3_class(int degree_cutoff);

/// Class from caller-supplied (S, dv, R, n).
DiscreteConformalClass build_synthetic_class(int dim, Field dv, SparseMatrix stiffness, Field curvature,
                                             Eigen::MatrixXd coords = {}, std::optional<double> analytic_volume = {});

/// Ring of `nodes` cells of total length `length`, lumped 1D stiffness.
DiscreteConformalClass build_ring_class(int nodes, double length, const Expression& curvature, int dim = 3);

// ---- conformal bookkeeping --------------------------------------------------

struct ConformalData {
  Field weight;     // w = mu^q
  Field vol_tilde;  // mu^{2n/(n-2)} dv
};

ConformalData conformal_data(const DiscreteConformalClass& cls, const ConformalFactor& mu);

/// sum(mu^q dv)
double conformal_mass(const DiscreteConformalClass& cls, const ConformalFactor& mu);

/// c * mu with sum((c mu)^q dv) = 1.
ConformalFactor normalize_factor(const DiscreteConformalClass& cls, const ConformalFactor& mu);

/// Node fields spanning the smooth non-constant modes up to `band_limit`:
/// torus Fourier modes with 0 < |k|_inf <= band_limit, sphere harmonics of
/// degree 1..band_limit, ring Fourier modes. Columns have unit RMS.
Eigen::MatrixXd smooth_modes(const DiscreteConformalClass& cls, int band_limit);

}  // namespace conflap
