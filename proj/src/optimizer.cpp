#include "conflap/extremal.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>

#include "conflap/errors.hpp"

namespace conflap {

namespace {

struct AscentState {
  ConformalFactor mu;
  double value = 0.0;
  Field v;  // first eigenvector, node values
};

AscentState evaluate(const DiscreteConformalClass& cls, ConformalFactor mu, const SolverOptions& opts) {
  const SpectrumResult s = solve_pencil(cls, mu, 1, opts);
  const double mass = conformal_mass(cls, mu);
  return {std::move(mu), s.eigenvalues[0] * mass, s.nodal.col(0)};
}

}  // namespace

OptimizerResult optimize_F1(const DiscreteConformalClass& cls, const ConformalFactor& mu_init,
                            const OptimizerOptions& oo, const SolverOptions& opts) {
  const Field& R = cls.curvature();
  const bool positive = (R.array() >= oo.r_floor).all();
  const bool negative = (R.array() <= -oo.r_floor).all();
  if (!positive && !negative)
    throw HypothesisViolation(tags::necessary_condition_sign,
                              "scalar curvature changes sign or vanishes: F^1 has no critical metric to ascend to");
  const int ys = yamabe_sign(cls, opts);
  if (ys != (positive ? 1 : -1))
    throw HypothesisViolation(tags::necessary_condition_sign, "sign of lambda_1 is inconsistent with the curvature sign");

  const double q = cls.q();
  const Field& dv = cls.dv();
  OptimizerResult res;
  AscentState cur = evaluate(cls, normalize_factor(cls, mu_init), opts);

  // Ascent direction: zero-volume gradient of F^1 in the metric sum(h^2 mu^{q-2} dv),
  // restricted to the span of the basis for Galerkin classes.
  auto direction = [&](const AscentState& st) -> Field {
    const double lambda = st.value;  // mass is 1
    const Field g = (q * lambda * (1.0 - st.v.array().square())).matrix();
    Field h = zero_mean_generator(cls, st.mu, g).h;
    if (cls.lumped()) return h;
    const Eigen::MatrixXd& Phi = *cls.basis();
    const Field w = conformal_data(cls, st.mu).weight;
    const Field b = st.mu.values().array().pow(q - 2.0).matrix().cwiseProduct(dv);
    const Eigen::MatrixXd G = Phi.transpose() * b.asDiagonal() * Phi;
    const Eigen::LLT<Eigen::MatrixXd> llt(G);
    const Eigen::VectorXd c = Phi.transpose() * w.cwiseProduct(dv);
    Eigen::VectorXd a = llt.solve(Phi.transpose() * b.cwiseProduct(h));
    const Eigen::VectorXd Gc = llt.solve(c);
    a -= Gc * (c.dot(a) / c.dot(Gc));
    return Phi * a;
  };
  auto slope_of = [&](const AscentState& st, const Field& h) {
    const Field w = conformal_data(cls, st.mu).weight;
    return q * st.value * h.cwiseProduct(w).cwiseProduct((1.0 - st.v.array().square()).matrix()).dot(dv);
  };
  auto bnorm2 = [&](const AscentState& st, const Field& a, const Field& b) {
    return a.cwiseProduct(b).cwiseProduct(st.mu.values().array().pow(q - 2.0).matrix()).dot(dv);
  };

  Field h = direction(cur);
  double alpha = 0.0;
  Field prev_h, prev_step;
  for (int it = 0; it < oo.max_iter; ++it) {
    const double stationarity = h.cwiseAbs().maxCoeff() / (q * std::abs(cur.value));
    const double slope = slope_of(cur, h);
    if (stationarity <= oo.opt_tol || slope <= 0.0) {
      res.converged = true;
      break;
    }
    // Barzilai-Borwein length from the last accepted step, else a unit-slope guess.
    if (prev_step.size() > 0) {
      const Field y = h - prev_h;
      const double sy = bnorm2(cur, prev_step, y);
      alpha = sy < 0.0 ? bnorm2(cur, prev_step, prev_step) / -sy : 2.0 * alpha;
    } else {
      alpha = 0.1 / h.cwiseAbs().maxCoeff();
    }
    alpha = std::min(alpha, oo.max_log_step / h.cwiseAbs().maxCoeff());

    OptimizerStep rec;
    rec.iteration = it + 1;
    rec.slope = slope;
    const double alpha0 = alpha;
    bool accepted = false;
    for (int bt = 0; bt <= oo.max_backtracks; ++bt, alpha *= 0.5) {
      const Field trial = cur.mu.values().cwiseProduct((alpha * h).array().exp().matrix());
      AscentState next = evaluate(cls, normalize_factor(cls, ConformalFactor(trial, cur.mu.floor())), opts);
      if (next.value >= cur.value + oo.armijo * alpha * slope) {
        rec.backtracks = bt;
        rec.step = alpha * h.cwiseAbs().maxCoeff();
        prev_h = h;
        prev_step = alpha * h;
        cur = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // The predicted gain is below the rounding level of F: stationary to working precision.
      if (alpha0 * slope <= 1e-12 * std::abs(cur.value)) {
        res.converged = true;
        break;
      }
      std::ostringstream os;
      os << "line search failed at iteration " << it + 1 << " (F = " << cur.value << ", slope = " << slope << ")";
      res.trace.push_back(rec);
      throw SolverError(os.str());
    }
    rec.value = cur.value;
    res.trace.push_back(rec);
    res.iterations = it + 1;
    h = direction(cur);
    if (rec.step <= oo.opt_tol) {
      res.converged = true;
      break;
    }
  }
  res.mu_star = cur.mu;
  res.value = cur.value;
  return res;
}

}  // namespace conflap
