#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "conflap/spectral.hpp"

namespace conflap {

/// F^k(mu) = lambda_k(L_{mu^q g}) * sum(mu^q dv).
struct FunctionalValue {
  Eigen::Index k = 1;
  double lambda_k = 0.0;
  double mass = 0.0;
  double value = 0.0;
};

FunctionalValue eval_F(const DiscreteConformalClass& cls, const ConformalFactor& mu, Eigen::Index k,
                       const SolverOptions& opts = {});

/// Sign of lambda_1 at mu = 1; zero when |lambda_1| <= sign_tol ||A||_inf.
int yamabe_sign(const DiscreteConformalClass& cls, const SolverOptions& opts = {}, double sign_tol = 1e-10);
/// Same test evaluated with an arbitrary positive weight.
int lambda1_sign(const DiscreteConformalClass& cls, const ConformalFactor& mu, const SolverOptions& opts = {},
                 double sign_tol = 1e-10);

/// Log-normal factor sampler: mu = exp(G), G = amplitude * sum_j xi_j psi_j / sqrt(#modes)
/// with xi_j standard normal and psi_j the unit-RMS smooth modes up to band_limit.
struct SamplerSpec {
  int band_limit = 2;
  double amplitude = 0.3;
  std::uint64_t seed = 1;
};

/// Node field for sample `index`; the stream depends only on (seed, index).
Field sample_log_factor(const Eigen::MatrixXd& modes, const SamplerSpec& spec, std::uint64_t index);

struct SampleRecord {
  std::uint64_t index = 0;
  bool accepted = false;
  double lambda_k = 0.0;
  double mass = 0.0;
  double value = 0.0;
  std::string rejection;  // reason when !accepted
};

struct SupEstimate {
  double best_value = 0.0;
  std::optional<ConformalFactor> best_mu;
  std::vector<SampleRecord> trace;  // ordered by sample index
  /// Running maximum after each accepted sample (non-decreasing).
  std::vector<double> running_max;
  std::size_t rejected = 0;
};

/// Produces the raw factor values for a sample index; entries below the
/// factor floor cause the sample to be rejected.
using FactorSampler = std::function<Field(std::uint64_t index)>;

/// Lower bound for Lambda_k by maximizing F^k over sampled factors. Samples
/// are evaluated on `threads` workers; the trace is merged by index.
SupEstimate sup_estimate(const DiscreteConformalClass& cls, Eigen::Index k, const FactorSampler& sampler,
                         std::size_t num_samples, const SolverOptions& opts = {}, unsigned threads = 1);
SupEstimate sup_estimate(const DiscreteConformalClass& cls, Eigen::Index k, const SamplerSpec& spec,
                         std::size_t num_samples, const SolverOptions& opts = {}, unsigned threads = 1);

/// Writes `index,accepted,value,mass,lambda_k` rows.
std::string trace_csv(const SupEstimate& est);

}  // namespace conflap
