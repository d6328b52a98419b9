#pragma once

#include <json.hpp>

#include "conflap/extremal.hpp"
#include "conflap/functional.hpp"
#include "conflap/perturbation.hpp"
#include "conflap/spectral.hpp"

namespace conflap {

using json = nlohmann::json;

/// Vector as a JSON array; non-finite entries become null.
json to_json(const Eigen::VectorXd& v);
json to_json(const Eigen::MatrixXd& m);  // row-major nested arrays

json to_json(const Cluster& c);
json to_json(const SpectrumResult& s);
json to_json(const FunctionalValue& f);
json to_json(const PerturbationReport& r);
json to_json(const FdEstimate& e);
json to_json(const ExtremalityCertificate& c);
json to_json(const MaximizerResult& m);
json to_json(const OptimizerResult& r);
json to_json(const SupEstimate& s);

/// Grid sizes, node and dof counts, sum(dv): enough to tell two discretizations apart.
json backend_summary(const DiscreteConformalClass& cls);

}  // namespace conflap
