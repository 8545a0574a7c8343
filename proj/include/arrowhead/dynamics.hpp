#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "arrowhead/disorder.hpp"
#include "arrowhead/eigensolver.hpp"

namespace arrowhead {

// ---- propagators G(t) = exp(-i H t) ----

// <i| exp(-i H t) |j> by the eigen-sum; i, j in 0..N with N the cavity.
cplx propagator_finiteN(const EigenDecomposition& dec, std::size_t i, std::size_t j, double t);
// Same element over a time grid, sharing the amplitude products.
std::vector<cplx> propagator_finiteN(const EigenDecomposition& dec, std::size_t i, std::size_t j,
                                     const std::vector<double>& times);

enum class Element {
  Photon,      // D(t) = G_{c,c}
  SiteCavity,  // G_{j,c}, uses wj
  SiteSite,    // G_{i,j} with i != j, uses wi and wj
  Diagonal,    // G_{j,j}, uses wj
};

struct LargeNElement {
  Element kind = Element::Photon;
  double wi = 0.0;
  double wj = 0.0;
};

// Leading large-N propagator for a cavity of N sites. Site energies must be
// strictly inside the support; t >= 0. p.v. and finite-part integrals use
// two-term singularity subtraction; throws ToleranceError above 1e-8.
cplx propagator_largeN(const DisorderModel& model, double g, std::size_t n, const LargeNElement& el, double t);

// ---- escape probability ----

struct FitWindow {
  double gt_min = 5.0;
  double gt_max = 50.0;
  double p_max = 0.2;
};

struct EscapeCurve {
  std::size_t site = 0;  // site index, or N for a large-N curve
  double energy = 0.0;
  std::vector<double> times;
  std::vector<double> p;
  std::vector<cplx> gjj;
  double rate = 0.0;       // fitted slope of P(t)
  double intercept = 0.0;
  double rate_stderr = 0.0;
  double t1 = 0.0, t2 = 0.0;
  std::size_t fit_points = 0;
  bool warning = false;    // window too short or truncated by p_max
  std::string warning_text;

  // t, P, abs_Gjj, phase
  std::string csv() const;
};

// Geometric grid from t_min to t_max inclusive.
std::vector<double> geometric_times(double t_min, double t_max, std::size_t count);

// Least-squares slope of P on the window g t in [gt_min, gt_max] with P <= p_max.
void fit_escape_rate(EscapeCurve& curve, double g, const FitWindow& window = {});

EscapeCurve escape_probability(const EigenDecomposition& dec, std::size_t site, const std::vector<double>& times,
                               const FitWindow& window = {});
EscapeCurve escape_probability_largeN(const DisorderModel& model, double g, std::size_t n, double wj,
                                      const std::vector<double>& times, const FitWindow& window = {});

// ---- rates ----

struct EscapeRate {
  double rate = 0.0;
  bool edge = false;  // energy on or outside the support edge; rate is the limit value 0
};

// 2 pi (g^2/N) A(w) with A the continuum spectral density.
EscapeRate escape_rate_analytic(const DisorderModel& model, double g, std::size_t n, double w);

// Site-averaged rate int rho(w) Gamma(w) dw; closed form through the polariton weights for Box.
double mean_escape_rate(const DisorderModel& model, double g, std::size_t n);

// One-realization version of the Box closed form using the exact exterior
// photon weights, (2 pi g^2 / (N W)) (1 - PW_lower - PW_upper).
double mean_escape_rate_finiteN(const ArrowheadOperator& op, double width);

// ---- perturbative cross-check ----

struct FgrResult {
  std::vector<double> times;
  std::vector<double> p;
  bool warning = false;
  std::string warning_text;
};

// 4 sum_{i != j} |V_ij|^2 sin^2((w_i - w_j) t / 2) / (w_i - w_j)^2 with
// V_ij = (g^2 / (2N)) (1/w_i + 1/w_j). Flags w_j == 0 or g > 0.3 |w_j| sqrt(N).
FgrResult fgr_escape_probability(const BareEnergies& bare, double g, std::size_t site, const std::vector<double>& times);

}  // namespace arrowhead
