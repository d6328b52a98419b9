#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "conflap/errors.hpp"
#include "conflap/extremal.hpp"

using namespace conflap;

namespace {

const double pi = std::numbers::pi;

DiscreteConformalClass torus(const std::string& R, int n = 8) {
  return build_torus_class({n, n, n}, {2 * pi, 2 * pi, 2 * pi}, Expression::parse(R));
}

ConformalFactor flat(const DiscreteConformalClass& cls) {
  return normalize_factor(cls, ConformalFactor::constant(cls.num_nodes(), 1.0));
}

std::string tag_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const HypothesisViolation& e) {
    return e.tag();
  }
  return "";
}

}  // namespace

TEST(Maximizer, RoundSphere) {
  const DiscreteConformalClass sph = build_sphere3_class(4);
  const MaximizerResult m = construct_maximizer(sph);
  EXPECT_NEAR(m.Lambda1, 1.5 * pi * pi, 1e-10);
  EXPECT_NEAR(m.lambda1_check, m.Lambda1, 1e-9 * m.Lambda1);
  const double expected = std::pow(2 * pi * pi, -0.25);
  EXPECT_LE((m.mu_max.values().array() - expected).abs().maxCoeff(), 1e-12);
  EXPECT_EQ(m.yamabe_sign, 1);
}

TEST(Maximizer, FlatTorusWithVaryingCurvature) {
  const DiscreteConformalClass cls = torus("6 + 2*sin(x1)*cos(x3)");
  const MaximizerResult m = construct_maximizer(cls);
  EXPECT_NEAR(m.Lambda1, 6 * std::pow(pi, 3), 1e-9);
  EXPECT_LE(m.eigenvector_check, 1e-12);
  EXPECT_NEAR(conformal_mass(cls, m.mu_max), 1.0, 1e-12);
}

TEST(Maximizer, NegativeCurvature) {
  const DiscreteConformalClass cls = torus("-6");
  const MaximizerResult m = construct_maximizer(cls);
  EXPECT_LT(m.Lambda1, 0.0);
  EXPECT_LT(m.lambda1_check, 0.0);
  EXPECT_NEAR(m.lambda1_check, m.Lambda1, 1e-9 * std::abs(m.Lambda1));
  EXPECT_EQ(m.yamabe_sign, -1);
}

TEST(Maximizer, SignChangingCurvatureRefused) {
  const DiscreteConformalClass cls = torus("sin(x1)");
  EXPECT_EQ(tag_of([&] { construct_maximizer(cls); }), tags::necessary_condition_sign);
  EXPECT_EQ(tag_of([&] { optimize_F1(cls, flat(cls)); }), tags::necessary_condition_sign);
}

TEST(NecessaryCondition, ConstantFactorConstantCurvature) {
  const DiscreteConformalClass cls = torus("6");
  const ConformalFactor mu = flat(cls);
  const double lambda1 = eval_F(cls, mu, 1).lambda_k;
  const NecessaryCondition nc = necessary_condition_residual(cls, mu, lambda1);
  EXPECT_LE(nc.sup, 1e-10);
  EXPECT_TRUE(nc.sign_constant);
  EXPECT_TRUE(nc.sign_matches);
  const NecessaryCondition bad = necessary_condition_residual(torus("sin(x1)"), mu, lambda1);
  EXPECT_FALSE(bad.sign_constant);
}

TEST(Certificate, SimpleEigenvalueAtMaximizer) {
  const DiscreteConformalClass cls = torus("6 + 2*sin(x1)");
  const MaximizerResult m = construct_maximizer(cls);
  const ExtremalityCertificate cert = certify_extremal(cls, m.mu_max, 1);
  ASSERT_TRUE(cert.feasible);
  EXPECT_EQ(cert.m(), 1);
  EXPECT_EQ(cert.p(), 1);
  EXPECT_NEAR(cert.P(0, 0), 1.0, 1e-12);
  EXPECT_LE(cert.sup_residual, 1e-10);
  EXPECT_FALSE(cert.witness.has_value());
  EXPECT_LE(for_eigen_residual(cls, m.mu_max, cert).sup, 1e-8);
}

TEST(Certificate, NonExtremalGetsWitness) {
  const DiscreteConformalClass cls = torus("6 + 2*sin(x1)");
  const ConformalFactor mu = flat(cls);
  const ExtremalityCertificate cert = certify_extremal(cls, mu, 1);
  ASSERT_FALSE(cert.feasible);
  ASSERT_TRUE(cert.witness.has_value());
  EXPECT_GT(cert.witness_F_right * cert.witness_F_left, 0.0);
  const FdEstimate fd = fd_oracle(cls, mu, *cert.witness, 1);
  EXPECT_NEAR(fd.F_right, cert.witness_F_right, 1e-3 * std::abs(cert.witness_F_right));
  EXPECT_THROW(for_eigen_residual(cls, mu, cert), std::invalid_argument);
}

TEST(Certificate, RoundSphereFirstNonzeroCluster) {
  const DiscreteConformalClass sph = build_sphere3_class(4);
  const ConformalFactor mu = flat(sph);
  const ExtremalityCertificate cert = certify_extremal(sph, mu, 2);
  ASSERT_TRUE(cert.feasible);
  EXPECT_EQ(cert.m(), 4);
  EXPECT_EQ(cert.p(), 4);
  EXPECT_EQ(cert.gaps, GapCase::gap_below);

  // P is symmetric PSD with trace one and reproduces the constant 1.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cert.P);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  EXPECT_NEAR(cert.P.trace(), 1.0, 1e-12);
  EXPECT_LE((cert.P - cert.P.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  const Field ones = (cert.basis * cert.P * cert.basis.transpose()).diagonal();
  EXPECT_LE((ones.array() - 1.0).abs().maxCoeff(), cert.cert_tol);
  const Field sum_sq = cert.family.rowwise().squaredNorm();
  EXPECT_LE((sum_sq.array() - 1.0).abs().maxCoeff(), cert.cert_tol);

  const HarmonicMapCheck hm = harmonic_map_residual(sph, mu, cert);
  EXPECT_LE(hm.residual, 1e-9);
  EXPECT_TRUE(hm.bound_holds);
  EXPECT_LE(for_eigen_residual(sph, mu, cert).sup, 1e-8);
}

TEST(Certificate, HypothesisChecks) {
  const DiscreteConformalClass sph = build_sphere3_class(4);
  EXPECT_EQ(tag_of([&] { certify_extremal(sph, flat(sph), 3); }), tags::gap_condition);
  EXPECT_EQ(tag_of([&] { certify_extremal(sph, ConformalFactor::constant(sph.num_nodes(), 1.0), 2); }),
            tags::normalization);
  const DiscreteConformalClass zero = torus("0");
  EXPECT_EQ(tag_of([&] { certify_extremal(zero, flat(zero), 1); }), tags::nonzero_eigenvalue);
}

TEST(SoundnessProbes, PerturbedFactorBreaksForEigen) {
  const DiscreteConformalClass cls = torus("6 + 2*sin(x1)");
  const MaximizerResult m = construct_maximizer(cls);
  const ExtremalityCertificate cert = certify_extremal(cls, m.mu_max, 1);
  ASSERT_TRUE(cert.feasible);
  const Field bump = 1.0 + 0.01 * cls.sample(Expression::parse("cos(x2)")).array();
  const ConformalFactor perturbed(m.mu_max.values().cwiseProduct(bump));
  EXPECT_GE(for_eigen_residual(cls, perturbed, cert).sup, 1e-3);
}

TEST(SoundnessProbes, FabricatedFamilyBreaksHarmonicMap) {
  const DiscreteConformalClass sph = build_sphere3_class(4);
  const ConformalFactor mu = flat(sph);
  ExtremalityCertificate cert = certify_extremal(sph, mu, 2);
  ASSERT_TRUE(cert.feasible);
  // Degree-2 harmonics are eigenfunctions, but of a different eigenvalue.
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(sph.basis_degree().size()); ++c) {
    if (sph.basis_degree()[c] == 2) {
      cert.family.col(0) = sph.basis()->col(c) * cert.family.col(0).norm() / sph.basis()->col(c).norm();
      break;
    }
  }
  EXPECT_GE(harmonic_map_residual(sph, mu, cert).residual, 1e-2);
}

TEST(SoundnessProbes, HarmonicMapNeedsConstantFactor) {
  const DiscreteConformalClass cls = torus("6 + 2*sin(x1)");
  const MaximizerResult m = construct_maximizer(cls);
  const ExtremalityCertificate cert = certify_extremal(cls, m.mu_max, 1);
  EXPECT_EQ(tag_of([&] { harmonic_map_residual(cls, m.mu_max, cert); }), tags::constant_factor);
}

TEST(Optimizer, StartsAtMaximizer) {
  const DiscreteConformalClass cls = torus("6 + 2*sin(x1)");
  const MaximizerResult m = construct_maximizer(cls);
  const OptimizerResult r = optimize_F1(cls, m.mu_max);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 1);
  EXPECT_NEAR(r.value, m.Lambda1, 1e-9 * m.Lambda1);
}

TEST(Optimizer, MonotoneAscent) {
  const DiscreteConformalClass cls = torus("6 + 2*sin(x1)");
  OptimizerOptions oo;
  oo.max_iter = 30;
  const OptimizerResult r = optimize_F1(cls, flat(cls), oo);
  ASSERT_GE(r.trace.size(), 2u);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i].value, r.trace[i - 1].value - 1e-12);
  EXPECT_LE(r.value, 6 * std::pow(pi, 3) + 1e-9);
}
