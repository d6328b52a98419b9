#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "conflap/errors.hpp"
#include "conflap/perturbation.hpp"

using namespace conflap;

namespace {

const double pi = std::numbers::pi;

DiscreteConformalClass torus(const std::string& R, int n = 8) {
  return build_torus_class({n, n, n}, {2 * pi, 2 * pi, 2 * pi}, Expression::parse(R));
}

ConformalFactor normalized_random(const DiscreteConformalClass& cls, std::uint64_t seed) {
  SamplerSpec spec;
  spec.seed = seed;
  return normalize_factor(cls, ConformalFactor(sample_log_factor(smooth_modes(cls, 2), spec, 0)));
}

Eigen::VectorXd set_of(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

}  // namespace

TEST(OneSided, CaseRules) {
  const Eigen::VectorXd set = set_of({-2, 1, 3});
  const OneSidedDerivatives i = one_sided_lambda_derivatives(set, GapCase::gap_below);
  EXPECT_EQ(i.right, -2);
  EXPECT_EQ(i.left, 3);
  const OneSidedDerivatives ii = one_sided_lambda_derivatives(set, GapCase::gap_above);
  EXPECT_EQ(ii.right, 3);
  EXPECT_EQ(ii.left, -2);
  const OneSidedDerivatives both = one_sided_lambda_derivatives(set_of({0.5}), GapCase::both_gaps);
  EXPECT_EQ(both.right, 0.5);
  EXPECT_EQ(both.left, 0.5);
  try {
    one_sided_lambda_derivatives(set, GapCase::no_gap);
    FAIL();
  } catch (const HypothesisViolation& e) {
    EXPECT_EQ(e.tag(), "gap_condition");
  }
}

TEST(GapCase, PositionInCluster) {
  const DiscreteConformalClass sph = build_sphere3_class(4);
  const SpectrumResult s = solve_through_cluster(sph, ConformalFactor::constant(sph.num_nodes(), 1.0), 5);
  EXPECT_EQ(classify_gap(s, 1), GapCase::both_gaps);
  EXPECT_EQ(classify_gap(s, 2), GapCase::gap_below);
  EXPECT_EQ(classify_gap(s, 3), GapCase::no_gap);
  EXPECT_EQ(classify_gap(s, 5), GapCase::gap_above);
}

TEST(ProjectedMatrix, ConstantAndZeroDirections) {
  const DiscreteConformalClass cls = torus("6 + sin(x2)");
  const ConformalFactor mu = normalized_random(cls, 1);
  const SpectrumResult s = solve_pencil(cls, mu, 2);
  const ProjectedPerturbation pc =
      projected_perturbation_matrix(cls, mu, s, s.clusters[0], {Field::Constant(cls.num_nodes(), 0.7)});
  ASSERT_EQ(pc.derivative_set.size(), 1);
  EXPECT_NEAR(pc.derivative_set[0], -cls.q() * s.eigenvalues[0] * 0.7, 1e-12);
  const ProjectedPerturbation pz = projected_perturbation_matrix(cls, mu, s, s.clusters[0], {Field::Zero(cls.num_nodes())});
  EXPECT_EQ(pz.derivative_set[0], 0.0);
}

TEST(ProjectedMatrix, LinearInDirection) {
  const DiscreteConformalClass sph = build_sphere3_class(4);
  const ConformalFactor mu = normalize_factor(sph, ConformalFactor::constant(sph.num_nodes(), 1.0));
  const SpectrumResult s = solve_through_cluster(sph, mu, 2);
  const Cluster& c = s.cluster_of(2);
  const Field h1 = sph.basis()->col(10), h2 = sph.basis()->col(20);
  const Eigen::MatrixXd T1 = projected_perturbation_matrix(sph, mu, s, c, {h1}).T;
  const Eigen::MatrixXd T2 = projected_perturbation_matrix(sph, mu, s, c, {h2}).T;
  const Eigen::MatrixXd T12 = projected_perturbation_matrix(sph, mu, s, c, {h1 + h2}).T;
  EXPECT_LE((T12 - T1 - T2).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((T1 - T1.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ProjectedMatrix, RejectsBasisMismatch) {
  const DiscreteConformalClass cls = torus("6");
  const ConformalFactor mu = normalize_factor(cls, ConformalFactor::constant(cls.num_nodes(), 1.0));
  const Eigen::MatrixXd not_orthonormal = Eigen::MatrixXd::Constant(cls.num_nodes(), 1, 2.0);
  EXPECT_THROW(projected_perturbation_matrix(cls, mu, not_orthonormal, 1.0, {Field::Ones(cls.num_nodes())}),
               std::invalid_argument);
  const SpectrumResult s = solve_pencil(cls, mu, 1);
  Cluster beyond = s.clusters[0];
  beyond.first = 3;
  EXPECT_THROW(projected_perturbation_matrix(cls, mu, s, beyond, {Field::Ones(cls.num_nodes())}), std::invalid_argument);
}

TEST(FDerivatives, ConstantDirectionVanishes) {
  const DiscreteConformalClass cls = torus("6 + 2*sin(x1)");
  const ConformalFactor mu = normalized_random(cls, 2);
  const PerturbationReport r = one_sided_F_derivatives(cls, mu, {Field::Constant(cls.num_nodes(), 1.0)}, 1);
  EXPECT_NEAR(r.F_right, 0.0, 1e-13 * r.lambda_k);
  EXPECT_NEAR(r.F_left, 0.0, 1e-13 * r.lambda_k);
  EXPECT_EQ(r.case_tag, GapCase::both_gaps);
}

TEST(FDerivatives, RequiresNormalization) {
  const DiscreteConformalClass cls = torus("6");
  try {
    one_sided_F_derivatives(cls, ConformalFactor::constant(cls.num_nodes(), 1.0), {Field::Ones(cls.num_nodes())}, 1);
    FAIL();
  } catch (const HypothesisViolation& e) {
    EXPECT_EQ(e.tag(), "normalization");
  }
}

TEST(FDerivatives, NoGapRefused) {
  const DiscreteConformalClass sph = build_sphere3_class(4);
  const ConformalFactor mu = normalize_factor(sph, ConformalFactor::constant(sph.num_nodes(), 1.0));
  try {
    one_sided_F_derivatives(sph, mu, {sph.basis()->col(12)}, 3);
    FAIL();
  } catch (const HypothesisViolation& e) {
    EXPECT_EQ(e.tag(), "gap_condition");
  }
}

TEST(FDerivatives, SineDirectionMatchesFiniteDifferences) {
  const DiscreteConformalClass cls = torus("6", 16);
  const ConformalFactor mu = normalize_factor(cls, ConformalFactor::constant(cls.num_nodes(), 1.0));
  const Field h = cls.sample(Expression::parse("sin(x1)")) * mu.values()[0];
  const PerturbationReport r = one_sided_F_derivatives(cls, mu, {h}, 1);
  const FdEstimate fd = fd_oracle(cls, mu, {h}, 1);
  // A zero-volume direction at a constant factor: F is stationary.
  EXPECT_EQ(r.F_right, r.F_left);
  EXPECT_NEAR(r.F_right, 0.0, 1e-12 * r.lambda_k);
  EXPECT_NEAR(fd.F_right, 0.0, 1e-6 * r.lambda_k);
  EXPECT_NEAR(fd.F_left, 0.0, 1e-6 * r.lambda_k);
  EXPECT_NEAR(r.lambda_right, fd.lambda_right, 1e-6 * r.lambda_k);
}

TEST(FDerivatives, RandomPairsMatchFiniteDifferences) {
  const DiscreteConformalClass cls = torus("6 + 2*sin(x1)");
  for (std::uint64_t s = 0; s < 3; ++s) {
    const ConformalFactor mu = normalized_random(cls, 10 + s);
    const Field h = smooth_modes(cls, 1).col(static_cast<Eigen::Index>(s)) * 0.5 + Field::Constant(cls.num_nodes(), 0.2);
    const PerturbationReport r = one_sided_F_derivatives(cls, mu, {h}, 1);
    const FdEstimate fd = fd_oracle(cls, mu, {h}, 1);
    EXPECT_NEAR(r.F_right, fd.F_right, 1e-3 * std::abs(fd.F_right) + 1e-8);
    EXPECT_NEAR(r.lambda_left, fd.lambda_left, 1e-3 * std::abs(fd.lambda_left) + 1e-8);
  }
}

TEST(ZeroMeanGenerator, Properties) {
  const DiscreteConformalClass cls = torus("6");
  const ConformalFactor mu = normalized_random(cls, 3);
  EXPECT_LE(zero_mean_generator(cls, mu, Field::Constant(cls.num_nodes(), 5.0)).h.cwiseAbs().maxCoeff(), 1e-14);
  const Field w = cls.sample(Expression::parse("sin(x1) + cos(x2)^2"));
  const DeformationDirection h = zero_mean_generator(cls, mu, w);
  EXPECT_LE(std::abs(h.h.cwiseProduct(conformal_data(cls, mu).weight).dot(cls.dv())), 1e-14);
  // Idempotent on the w level: the zero-mean part of w0 is w0 itself.
  const Field w0 = h.h.cwiseQuotient(mu.values().cwiseAbs2());
  EXPECT_LE((zero_mean_generator(cls, mu, w0).h - h.h).cwiseAbs().maxCoeff(), 1e-14);

  const ConformalFactor flat = normalize_factor(cls, ConformalFactor::constant(cls.num_nodes(), 1.0));
  const DeformationDirection hs = zero_mean_generator(cls, flat, cls.sample(Expression::parse("sin(x1)")));
  EXPECT_LE((hs.h - cls.sample(Expression::parse("sin(x1)")) * std::pow(flat.values()[0], 2)).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(FdOracle, ZeroDirectionAndPositivity) {
  const DiscreteConformalClass cls = torus("6");
  const ConformalFactor mu = normalized_random(cls, 4);
  const FdEstimate z = fd_oracle(cls, mu, {Field::Zero(cls.num_nodes())}, 1);
  EXPECT_EQ(z.F_right, 0.0);
  EXPECT_EQ(z.F_left, 0.0);
  EXPECT_THROW(fd_oracle(cls, mu, {Field::Constant(cls.num_nodes(), 2000.0)}, 1), std::invalid_argument);
  EXPECT_THROW(fd_oracle(cls, mu, {Field::Zero(cls.num_nodes())}, 1, {}), std::invalid_argument);
}
