#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arrowhead/disorder.hpp"
#include "arrowhead/eigensolver.hpp"
#include "arrowhead/localization.hpp"

namespace arrowhead {

// ---- photon Green's function D(z) ----

// 1 / (z - (g^2/N) sum_j 1/(z - w_j)), O(N) per point. Throws PoleError at a bare
// energy or where the denominator vanishes exactly.
cplx photon_greens_finiteN(const ArrowheadOperator& op, cplx z);

// sum_a PW_a / (z - eps_a).
cplx photon_greens_eigensum(const EigenDecomposition& dec, cplx z);

// Boundary side for real arguments on the support: Upper is w + i0, Lower is w - i0.
enum class Side { None, Upper, Lower };

// Pi(z) = (1/pi) int rho(w) dw / (z - w); on the real axis Pi(w +- i0) = rho~(w) -+ i rho(w).
cplx pi_bar(const DisorderModel& model, cplx z, Side side = Side::None);

// 1 / (z - pi g^2 Pi(z)). Real z inside the support requires a side.
cplx photon_greens_largeN(const DisorderModel& model, double g, cplx z, Side side = Side::None);

// d/dw D(w + i0) for w inside the support.
cplx photon_greens_largeN_deriv(const DisorderModel& model, double g, double w);

// ---- spectral function ----

// Continuum part of the mean spectral function, rho/(pi g)^2 / [rho^2 + (rho~ - w/(pi g^2))^2];
// 0 outside the open support.
double spectral_continuum(const DisorderModel& model, double g, double w);
// Its derivative, -(1/pi) Im D'(w + i0).
double spectral_continuum_deriv(const DisorderModel& model, double g, double w);

struct SpectralFunction {
  std::vector<double> grid;
  std::vector<double> values;  // continuum (large N) or Lorentzian-smoothed (finite N)
  double sigma = 0.0;
  std::vector<double> delta_positions;  // large-N polariton deltas, not in `values` unless sigma > 0
  std::vector<double> delta_weights;

  // w, A
  std::string csv() const;
  // position, weight
  std::string delta_csv() const;
};

SpectralFunction spectral_function_finiteN(const EigenDecomposition& dec, const std::vector<double>& grid, double sigma);

// sigma > 0 additionally convolves the continuum and the deltas with a Lorentzian.
SpectralFunction spectral_function_largeN(const DisorderModel& model, double g, const std::vector<double>& grid,
                                          double sigma = 0.0);

struct SumRule {
  double continuum = 0.0;
  double deltas = 0.0;
  double total = 0.0;
};

// int A dw over the whole real line by quadrature (tan map, Gauss-Legendre panels).
SumRule sum_rule_finiteN(const EigenDecomposition& dec, double sigma);
// Continuum integral over the support plus the polariton weights.
SumRule sum_rule_largeN(const DisorderModel& model, double g);

// ---- covariance of A ----

struct CovarianceKernel {
  double smooth = 0.0;        // regular part, O(1/N)
  double delta_weight = 0.0;  // coefficient of delta(w1 - w2), nonzero only on the diagonal query
};

// Large-N covariance of A(w1), A(w2) at leading order in 1/N, explicit g.
CovarianceKernel spectral_covariance_largeN(const DisorderModel& model, double g, double w1, double w2, std::size_t n);

// The same convolved with Lorentzians of half-width sigma in both arguments,
// evaluated on grid x grid. Integration is restricted to the support.
Eigen::MatrixXd smoothed_covariance_largeN(const DisorderModel& model, double g, std::size_t n,
                                           const std::vector<double>& grid, double sigma);

// cov matrix as CSV with a grid header row and column.
std::string covariance_csv(const std::vector<double>& grid, const Eigen::MatrixXd& cov);

// ---- photon weights ----

struct PhotonWeights {
  std::vector<double> weights;
  std::vector<double> energies;
  std::vector<StateClass> classes;
  double total() const;
};

PhotonWeights photon_weights(const EigenDecomposition& dec);

struct PolaritonWeights {
  double energy_lower = 0.0, energy_upper = 0.0;
  double lower = 0.0, upper = 0.0;
  bool lower_exists = true, upper_exists = true;  // weight 0 and energy at the edge otherwise
};

// 1/(1 - pi g^2 rho~'(eps_P)) at both continuum polaritons.
PolaritonWeights photon_weight_polaritons(const DisorderModel& model, double g);

// Shell-averaged dark-state weight (1/N) (1/(pi g)^2) / [rho^2 + (rho~ - eps/(pi g^2))^2].
double photon_weight_dark_analytic(const DisorderModel& model, double g, std::size_t n, double eps);

}  // namespace arrowhead
