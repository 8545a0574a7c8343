#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arrowhead/disorder.hpp"
#include "arrowhead/eigensolver.hpp"

namespace arrowhead {

enum class StateClass { Dark, Polariton };

// sum_j |psi_{a,j}|^{2q} over all N+1 components. Throws for q <= 0.
double ipr(const EigenDecomposition& dec, std::size_t a, double q);

struct IprReport {
  double q = 2.0;
  std::vector<double> values;
  std::vector<double> energies;
  std::vector<StateClass> classes;  // a = 0 and a = N are the polaritons

  // a, eps, ipr, class
  std::string csv() const;
  // mean over the N-1 dark states
  double dark_mean() const;
};

IprReport ipr_report(const EigenDecomposition& dec, double q);

// [rho^2/3 + x^2] / [rho^2 + x^2] with x = rho~ - eps/(pi g^2).
double ipr_equally_spaced_analytic(const DisorderModel& model, double g, double eps);

struct FractalFit {
  double q = 0.25;
  double d = 1.0;
  StateClass cls = StateClass::Dark;
  std::vector<std::size_t> sizes;
  std::vector<double> mean_ipr;      // ensemble mean of the per-realization class mean
  std::vector<double> mean_ipr_se;
  std::vector<double> effective_dim;  // log(IPR) / ((1-q) log N), divided by d
  double b = 0.0, c = 0.0;           // effective_dim ~ b / log N + c
  double c_stderr = 0.0;
  double rms_residual = 0.0;
  double dimension() const noexcept { return c; }  // D_f / d
  std::string json() const;
  // q, N, ipr_mean, ipr_stderr, effective_dim
  std::string csv() const;
};

// Mean IPR(q) of the chosen class for each size over `seeds` realizations
// (derived from base_seed), then the b/log N + c extrapolation of the
// effective dimension. Throws for q == 1 or fewer than three sizes.
FractalFit fractal_dimension_estimate(const DisorderModel& model, double g, double q, const std::vector<std::size_t>& sizes,
                                      std::uint64_t base_seed, std::size_t seeds, StateClass cls = StateClass::Dark,
                                      double d = 1.0);

}  // namespace arrowhead
