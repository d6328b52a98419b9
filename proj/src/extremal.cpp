#include "conflap/extremal.hpp"

#include <cmath>
#include <sstream>

#include "conflap/errors.hpp"

namespace conflap {

namespace {

// +1 / -1 if every |R| >= r_floor with one sign, 0 otherwise.
int curvature_sign(const Field& R, double r_floor) {
  if ((R.array() >= r_floor).all()) return 1;
  if ((R.array() <= -r_floor).all()) return -1;
  return 0;
}

}  // namespace

NecessaryCondition necessary_condition_residual(const DiscreteConformalClass& cls, const ConformalFactor& mu_e,
                                                double lambda1) {
  NecessaryCondition out;
  const Field w = conformal_data(cls, mu_e).weight;
  out.residual = cls.c_n() * cls.curvature() - lambda1 * w;
  out.sup = out.residual.cwiseAbs().maxCoeff();
  const int sr = curvature_sign(cls.curvature(), 0.0);
  out.sign_constant = sr != 0;
  out.sign_matches = out.sign_constant && ((sr > 0) == (lambda1 > 0)) && lambda1 != 0.0;
  if (!out.sign_constant)
    out.message = "scalar curvature changes sign: no extremal metric for F^1 can exist on this background";
  else if (!out.sign_matches)
    out.message = "sign of lambda_1 differs from the sign of the scalar curvature";
  return out;
}

MaximizerResult construct_maximizer(const DiscreteConformalClass& cls, double r_floor, const SolverOptions& opts) {
  const Field& R = cls.curvature();
  const int sign = curvature_sign(R, r_floor);
  if (sign == 0) {
    std::ostringstream os;
    os << "scalar curvature must be positive everywhere or negative everywhere (|R| >= " << r_floor
       << "); range [" << R.minCoeff() << ", " << R.maxCoeff() << "]";
    throw HypothesisViolation(tags::necessary_condition_sign, os.str());
  }
  const double total = R.dot(cls.dv());
  const Field ratio = R / total;
  MaximizerResult out;
  out.mu_max = ConformalFactor(ratio.array().pow(1.0 / cls.q()).matrix());
  out.Lambda1 = cls.c_n() * total;

  const SparseMatrix A = assemble_operator(cls);
  const SparseMatrix M = weighted_mass(cls, conformal_data(cls, out.mu_max).weight);
  const Eigen::VectorXd one = cls.constant_dofs();
  const Eigen::VectorXd Mone = M * one;
  out.eigenvector_check =
      (A * one - out.Lambda1 * Mone).cwiseAbs().maxCoeff() / (std::abs(out.Lambda1) * Mone.cwiseAbs().maxCoeff());
  out.lambda1_check = solve_pencil(cls, out.mu_max, 1, opts).eigenvalues[0];
  out.yamabe_sign = yamabe_sign(cls, opts);
  return out;
}

}  // namespace conflap
