#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arrowhead/disorder.hpp"

namespace arrowhead {

using cplx = std::complex<double>;

// Index conventions used throughout the library (0-based):
//   sites j = 0 .. N-1, cavity component = N, eigenstates a = 0 .. N
//   (a = 0 and a = N are the polaritons of a real solve).

// (N+1)x(N+1) arrowhead matrix: diagonal (w_1..w_N, 0), last row/column g/sqrt(N).
class ArrowheadOperator {
 public:
  ArrowheadOperator(BareEnergies bare, double g, std::map<std::size_t, cplx> diag_shift = {});

  const BareEnergies& bare() const noexcept { return bare_; }
  double g() const noexcept { return g_; }
  const std::map<std::size_t, cplx>& diag_shift() const noexcept { return shift_; }

  std::size_t n_sites() const noexcept { return bare_.values.size(); }
  double coupling() const noexcept;  // g / sqrt(N)
  double scale() const noexcept;     // max(|w_min|, |w_max|, g)
  bool hermitian() const noexcept { return shift_.empty(); }

  // w_j + shift_j for every site.
  std::vector<cplx> shifted_diagonal() const;

  Eigen::MatrixXd dense_real() const;
  Eigen::MatrixXcd dense() const;

 private:
  BareEnergies bare_;
  double g_;
  std::map<std::size_t, cplx> shift_;
};

// eps - (g^2/N) sum_j 1/(eps - w_j) with compensated summation.
// Throws PoleError when eps is within an ulp of a bare energy.
double secular_residual(const ArrowheadOperator& op, double eps);

// Sorted eigenvalues and lazily built eigenvectors of a real arrowhead matrix.
//
// Each secular root is stored as (anchor pole, offset tau) so that the
// differences eps_a - w_j entering the eigenvector amplitudes keep full relative accuracy even
// when eps_a sits extremely close to a bare energy.
class EigenDecomposition {
 public:
  enum class StateKind { Secular, Pinned, Unit };

  std::size_t size() const noexcept { return energies_.size(); }
  std::size_t n_sites() const noexcept { return bare_->values.size(); }
  double g() const noexcept { return g_; }
  const BareEnergies& bare() const noexcept { return *bare_; }
  const std::vector<double>& energies() const noexcept { return energies_; }
  // Cavity amplitude N_a; zero for pinned states (no cavity amplitude).
  const std::vector<double>& norms() const noexcept { return norms_; }

  StateKind kind(std::size_t a) const { return states_.at(a).kind; }
  bool pinned(std::size_t a) const { return kind(a) == StateKind::Pinned; }
  std::size_t pinned_count() const noexcept { return pinned_count_; }
  bool interlacing_certified() const noexcept { return certified_; }

  // eps_a - w_j, accurate to relative precision for secular roots.
  double diff(std::size_t a, std::size_t j) const;
  // Secular residual of root a evaluated through the anchored representation.
  double root_residual(std::size_t a) const;
  // Offset of root a from its anchor bare energy (anchor given as a site index).
  std::size_t anchor_site(std::size_t a) const;
  double offset(std::size_t a) const;

  // psi_j = N_a (g/sqrt(N)) / (eps_a - w_j), cavity component N_a. Throws DegenerateEigenvectorError for pinned states.
  std::vector<double> eigenvector(std::size_t a) const;
  // Null-space vector supported on a degenerate cluster (pinned states only).
  std::vector<double> null_space_vector(std::size_t a) const;
  // Whichever of the two applies.
  std::vector<double> state(std::size_t a) const;
  // |psi_{a,j}|^2 for j = 0..N (cavity last) without building the vector twice.
  double amplitude(std::size_t a, std::size_t j) const;
  // Signed psi_{a,j} (cavity at j = N).
  double component(std::size_t a, std::size_t j) const;
  double photon_weight(std::size_t a) const;

 private:
  friend EigenDecomposition solve_spectrum(const ArrowheadOperator& op);

  struct State {
    StateKind kind = StateKind::Secular;
    std::size_t anchor = 0;  // pole index (Secular), cluster pole (Pinned), site or N (Unit)
    double tau = 0.0;
    std::size_t helmert = 0;  // 1-based position inside the cluster (Pinned)
  };

  std::shared_ptr<const BareEnergies> bare_;
  double g_ = 0.0;
  std::vector<double> energies_;
  std::vector<double> norms_;
  std::vector<State> states_;
  std::vector<double> poles_;                // deduplicated bare energies
  std::vector<std::size_t> pole_first_site_;  // first site of each pole
  std::vector<std::size_t> pole_mult_;
  std::vector<std::size_t> site_pole_;        // pole index of each site
  std::size_t pinned_count_ = 0;
  bool certified_ = false;
};

// Requires sorted bare energies and no diagonal shift.
EigenDecomposition solve_spectrum(const ArrowheadOperator& op);

// Only the two exterior (polariton) roots and their photon weights; O(N) per
// iteration instead of O(N^2) for the full spectrum.
struct ExteriorRoots {
  double lower = 0.0, upper = 0.0;
  double pw_lower = 0.0, pw_upper = 0.0;
};
ExteriorRoots solve_exterior(const ArrowheadOperator& op);

// CSV columns: a, eps, norm, residual.
std::string spectrum_csv(const EigenDecomposition& dec);

// ---- complex (non-Hermitian) spectrum ----

class ComplexSpectrum {
 public:
  std::vector<cplx> eigenvalues;
  std::vector<double> residual_norms;  // Newton correction size at exit
  bool used_dense_fallback = false;
  bool near_degenerate = false;        // two eigenvalues closer than 1e-12 * scale

  // eps_a - w~_j with full relative accuracy.
  cplx diff(std::size_t a, std::size_t j) const;
  // eps_a - eps_b.
  cplx diff_eig(std::size_t a, std::size_t b) const;
  const std::vector<cplx>& shifted_diagonal() const noexcept { return diag_; }

 private:
  friend ComplexSpectrum solve_complex_spectrum(const ArrowheadOperator& op);
  std::vector<cplx> diag_;
  std::vector<std::size_t> anchor_;  // site index, or npos for a free root
  std::vector<cplx> tau_;
};

// Roots of z prod_j (z - w~_j) - (g^2/N) sum_j prod_{i!=j} (z - w~_i) by
// Newton continuation from the unshifted spectrum (8 geometric ramp steps).
// Falls back to a dense eigensolver when continuation fails.
ComplexSpectrum solve_complex_spectrum(const ArrowheadOperator& op);

// CSV columns: a, re, im, residual.
std::string complex_spectrum_csv(const ComplexSpectrum& cs);

}  // namespace arrowhead
