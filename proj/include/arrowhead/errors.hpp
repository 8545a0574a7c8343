#pragma once

#include <stdexcept>
#include <string>

namespace arrowhead {

// Bad caller input: invalid parameter values, out-of-range indices, shape mismatches.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Energy requested outside the open interval where a formula is defined.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Evaluation exactly at (or within an ulp of) a pole.
struct PoleError : std::domain_error {
  using std::domain_error::domain_error;
};

// rho~ diverges logarithmically at the support edges.
struct EdgeSingularityError : std::domain_error {
  using std::domain_error::domain_error;
};

struct UnsupportedModelError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateDensityError : std::domain_error {
  using std::domain_error::domain_error;
};

// The closed-form eigenvector breaks down for eigenvalues pinned at a repeated bare energy.
struct DegenerateEigenvectorError : std::domain_error {
  using std::domain_error::domain_error;
};

struct InsufficientSpectrumError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Quadrature or iteration did not reach the requested tolerance.
struct ToleranceError : std::runtime_error {
  ToleranceError(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved " + std::to_string(achieved) + ")"),
        achieved_bound(achieved) {}
  double achieved_bound;
};

// Residue sums are unusable when two complex eigenvalues nearly coincide.
struct IllConditionedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyEnsembleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  ConfigError(const std::string& path, const std::string& msg)
      : std::invalid_argument(path + ": " + msg), path(path) {}
  std::string path;
};

}  // namespace arrowhead
