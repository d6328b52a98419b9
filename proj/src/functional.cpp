#include "conflap/functional.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "conflap/errors.hpp"

namespace conflap {

FunctionalValue eval_F(const DiscreteConformalClass& cls, const ConformalFactor& mu, Eigen::Index k,
                       const SolverOptions& opts) {
  if (k < 1) throw std::invalid_argument("eigenvalue index k must be >= 1");
  const SpectrumResult s = solve_pencil(cls, mu, k, opts);
  FunctionalValue f;
  f.k = k;
  f.lambda_k = s.eigenvalues[k - 1];
  f.mass = conformal_mass(cls, mu);
  f.value = f.lambda_k * f.mass;
  return f;
}

int lambda1_sign(const DiscreteConformalClass& cls, const ConformalFactor& mu, const SolverOptions& opts,
                 double sign_tol) {
  const double lambda1 = solve_pencil(cls, mu, 1, opts).eigenvalues[0];
  // Compare in the scale of the weighted operator so the test is independent of mu's size.
  const SparseMatrix A = assemble_operator(cls);
  const Field w = conformal_data(cls, mu).weight;
  const double scale = operator_inf_norm(A) / (w.cwiseProduct(cls.dv())).minCoeff();
  if (std::abs(lambda1) <= sign_tol * scale) return 0;
  return lambda1 > 0 ? 1 : -1;
}

int yamabe_sign(const DiscreteConformalClass& cls, const SolverOptions& opts, double sign_tol) {
  return lambda1_sign(cls, ConformalFactor::constant(cls.num_nodes(), 1.0), opts, sign_tol);
}

Field sample_log_factor(const Eigen::MatrixXd& modes, const SamplerSpec& spec, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(modes.cols());
  for (Eigen::Index j = 0; j < xi.size(); ++j) xi[j] = normal(rng);
  const double norm = modes.cols() > 0 ? std::sqrt(static_cast<double>(modes.cols())) : 1.0;
  const Field G = spec.amplitude * (modes * xi) / norm;
  return G.array().exp().matrix();
}

SupEstimate sup_estimate(const DiscreteConformalClass& cls, Eigen::Index k, const FactorSampler& sampler,
                         std::size_t num_samples, const SolverOptions& opts, unsigned threads) {
  if (num_samples < 1) throw std::invalid_argument("sup_estimate needs at least one sample");
  std::vector<SampleRecord> trace(num_samples);
  std::vector<std::optional<ConformalFactor>> factors(num_samples);

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < num_samples; i += stride) {
      SampleRecord& r = trace[i];
      r.index = i;
      try {
        ConformalFactor mu(sampler(i));
        const FunctionalValue f = eval_F(cls, mu, k, opts);
        r.accepted = true;
        r.lambda_k = f.lambda_k;
        r.mass = f.mass;
        r.value = f.value;
        factors[i] = std::move(mu);
      } catch (const std::invalid_argument& e) {
        r.accepted = false;
        r.rejection = e.what();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(num_samples)));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
    for (auto& th : pool) th.join();
  }

  SupEstimate est;
  est.best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < num_samples; ++i) {
    const SampleRecord& r = trace[i];
    if (!r.accepted) {
      ++est.rejected;
      continue;
    }
    if (r.value > est.best_value) {
      est.best_value = r.value;
      est.best_mu = factors[i];
    }
    est.running_max.push_back(est.best_value);
  }
  est.trace = std::move(trace);
  return est;
}

SupEstimate sup_estimate(const DiscreteConformalClass& cls, Eigen::Index k, const SamplerSpec& spec,
                         std::size_t num_samples, const SolverOptions& opts, unsigned threads) {
  const Eigen::MatrixXd modes = smooth_modes(cls, spec.band_limit);
  return sup_estimate(
      cls, k, [&](std::uint64_t i) { return sample_log_factor(modes, spec, i); }, num_samples, opts, threads);
}

std::string trace_csv(const SupEstimate& est) {
  std::ostringstream os;
  os.precision(17);
  os << "index,accepted,value,mass,lambda_k\n";
  for (const auto& r : est.trace) {
    os << r.index << ',' << (r.accepted ? 1 : 0) << ',';
    if (r.accepted) os << r.value << ',' << r.mass << ',' << r.lambda_k;
    else os << ",,";
    os << '\n';
  }
  return os.str();
}

}  // namespace conflap
