#pragma once

#include <stdexcept>
#include <string>

namespace conflap {

/// Raised when an input violates a mathematical hypothesis of a result the
/// toolkit implements (e.g. no spectral gap, sign-changing curvature).
/// `tag()` is a stable key reported by the CLI.
class HypothesisViolation : public std::runtime_error {
 public:
  HypothesisViolation(std::string tag, const std::string& what)
      : std::runtime_error(what), tag_(std::move(tag)) {}
  const std::string& tag() const noexcept { return tag_; }

 private:
  std::string tag_;
};

/// Eigensolver or optimizer failure; carries iteration diagnostics in what().
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stable hypothesis tags.
namespace tags {
inline constexpr const char* gap_condition = "gap_condition";
inline constexpr const char* necessary_condition_sign = "necessary_condition_sign";
inline constexpr const char* nonzero_eigenvalue = "nonzero_eigenvalue";
inline constexpr const char* normalization = "normalization";
inline constexpr const char* constant_factor = "constant_factor";
inline constexpr const char* infeasible_certificate = "infeasible_certificate";
}  // namespace tags

}  // namespace conflap
