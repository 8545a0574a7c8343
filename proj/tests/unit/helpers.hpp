#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "arrowhead/disorder.hpp"
#include "arrowhead/eigensolver.hpp"

namespace testing {

inline arrowhead::BareEnergies box_sample(std::size_t n, std::uint64_t seed, double width = 1.0) {
  return arrowhead::sorted(arrowhead::sample_bare_energies(arrowhead::DisorderModel::box(width), n, seed));
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testing
