#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arrowhead/disorder.hpp"
#include "arrowhead/eigensolver.hpp"

namespace arrowhead {

// ---- energy shifts ----

// Delta_a = N (eps_a - (w_{a-1} + w_a)/2) for the N-1 dark states, with the
// energies eps_a they belong to.
struct ShiftStatistics {
  std::vector<double> shifts;
  std::vector<double> energies;
};

ShiftStatistics energy_shifts(const EigenDecomposition& dec);

// (1/(pi rho)) arctan[(rho~ - eps/(pi g^2)) / rho], explicit g.
double mean_shift_analytic(const DisorderModel& model, double g, double eps);

// tan(pi rho mean_shift) = (rho~ - eps/(pi g^2)) / rho, the spacing-model parameter.
double spacing_alpha(const DisorderModel& model, double g, double eps);

// ---- binning ----

struct BinSpec {
  double lo = -0.5;
  double hi = 0.5;
  std::size_t bins = 40;
};

struct SpectralProfile {
  std::vector<double> edges;    // bins + 1
  std::vector<double> means;    // NaN for empty bins
  std::vector<double> stderrs;  // NaN when count < 2
  std::vector<std::size_t> counts;

  std::size_t bins() const noexcept { return counts.size(); }
  double center(std::size_t b) const { return 0.5 * (edges.at(b) + edges.at(b + 1)); }
  bool empty(std::size_t b) const { return counts.at(b) == 0; }
  std::size_t total() const noexcept;
  // bin_center, mean, stderr, count
  std::string csv() const;
};

// Values with energies outside [lo, hi) are dropped; the last bin includes hi.
SpectralProfile bin_statistic(std::span<const double> values, std::span<const double> energies, BinSpec spec);

// Shell average (1/(N rho(eps) d_eps)) sum_{eps_a in shell} v_a at each bin center.
// `n_sites` is N of a single realization and `realizations` the number of
// pooled realizations. Bins where rho vanishes are NaN.
std::vector<double> shell_average(const SpectralProfile& profile, const DisorderModel& model, std::size_t n_sites,
                                  std::size_t realizations = 1);

// ---- polaritons in the continuum limit ----

struct PolaritonEnergies {
  double lower = 0.0, upper = 0.0;
  // A density that vanishes at an edge keeps rho~ finite there, so below a
  // threshold coupling that side has no root; the energy is then the edge.
  bool lower_exists = true, upper_exists = true;
};

// Roots of eps = pi g^2 rho~(eps) below and above the support.
PolaritonEnergies polariton_energies_largeN(const DisorderModel& model, double g);

// Upper box polariton solved for log(eps - W/2), so that exponentially small
// distances to the band edge (g << W) stay representable, together with its
// continuum photon weight 1/(1 - pi g^2 rho~'(eps)).
struct BoxPolariton {
  double energy = 0.0;
  double edge_distance = 0.0;  // eps - W/2
  double photon_weight = 0.0;
};
BoxPolariton box_upper_polariton(double width, double g);

// ---- spacing model ----

struct SpacingModel {
  double alpha = 0.0;
  std::size_t n = 0;
  std::size_t realizations = 0;
  double bin_width = 0.05;
  double s_max = 5.0;
  std::vector<std::uint64_t> counts;  // histogram on [0, s_max)
  std::uint64_t overflow = 0;         // s >= s_max
  std::uint64_t samples = 0;
  double sum_s = 0.0, sum_s2 = 0.0;

  double mean() const noexcept { return sum_s / static_cast<double>(samples); }
  // standard error of the sample mean, treating spacings as independent
  double mean_stderr() const noexcept;
  double density(std::size_t b) const { return static_cast<double>(counts.at(b)) / (static_cast<double>(samples) * bin_width); }
  void merge(const SpacingModel& other);
  // bin_center, density, count
  std::string csv() const;
};

// All N roots of alpha + (1/N) sum_j cot(pi (X - u_j)) = 0 for sorted u in
// [0, 1), one per gap of the periodic pole set, ascending in [u_0, u_0 + 1).
std::vector<double> spacing_roots(double alpha, std::span<const double> u_sorted);

SpacingModel spacing_distribution(double alpha, std::size_t n, std::size_t realizations, std::uint64_t seed,
                                  double bin_width = 0.05, double s_max = 5.0);

// Reference laws.
double poisson_cdf(double s);
double semi_poisson_cdf(double s);
double semi_poisson_pdf(double s);

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 0.0;
};

// Pearson chi-square of the histogram (plus the overflow cell) against a
// reference CDF; adjacent cells are pooled until each expects >= 5 counts.
ChiSquareResult chi_square_test(const SpacingModel& m, double (*cdf)(double));

// Integral |p_hat - p| ds over [0, s_max) plus the overflow mass difference,
// with the reference averaged over each bin.
double l1_distance(const SpacingModel& m, double (*cdf)(double));

}  // namespace arrowhead
