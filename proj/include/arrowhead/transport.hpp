#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "arrowhead/disorder.hpp"
#include "arrowhead/eigensolver.hpp"
#include "arrowhead/localization.hpp"

namespace arrowhead {

struct TransportConfig {
  BareEnergies bare;
  double g = 1.0;
  double gamma_in = 0.0;
  double gamma_out = 1.0;
  std::size_t in_site = 0;
  std::size_t out_site = static_cast<std::size_t>(-1);  // resolved to N-1 by validate()

  // gamma_in = gamma_in_tilde / N^2.
  static TransportConfig rescaled(BareEnergies bare, double g, double gamma_in_tilde, double gamma_out);

  std::size_t n_sites() const noexcept { return bare.size(); }
  // Throws ParameterError on negative rates, bad indices or in == out.
  void validate();
  // Operator with w~_in = w_in - i gamma_in/2 and w~_out = w_out - i gamma_out/2.
  ArrowheadOperator op() const;
};

struct TransportSolution {
  std::vector<cplx> eigenvalues;
  std::vector<double> lifetimes;  // -1 / (2 Im eps_a)
  std::vector<cplx> phi;
  std::vector<double> populations;  // n_j, j = 0..N-1
  double n_cavity = 0.0;
  double j_in = 0.0;
  double j_out = 0.0;
  std::vector<double> shares;  // per-eigenstate contributions to J_out
  std::vector<StateClass> classes;
  double dark_current = 0.0;
  double polariton_current = 0.0;
  bool used_quadrature = false;  // residues skipped because of near-degenerate eigenvalues
  bool used_dense_fallback = false;

  double total_population() const;
  double dark_share() const { return j_out != 0.0 ? dark_current / j_out : 0.0; }
  std::string json(const TransportConfig& cfg) const;
};

ComplexSpectrum transport_spectrum(const TransportConfig& cfg);

enum class DegenerateHandling { Quadrature, Throw };

// Closed-form residue sums for populations and currents.
TransportSolution solve_transport(const TransportConfig& cfg,
                                  DegenerateHandling on_degenerate = DegenerateHandling::Quadrature);

// G^R_{i,j}(w) for real w; indices 0..N with N the cavity.
cplx retarded_greens_transport(const TransportConfig& cfg, double w, std::size_t i, std::size_t j);

struct QuadraturePopulations {
  std::vector<double> populations;
  double n_cavity = 0.0;
  double max_error = 0.0;  // largest quadrature error estimate
};

// n_j = (gamma_in / 2 pi) int |G^R_{j,in}(w)|^2 dw by adaptive quadrature,
// split at every resonance and tan-mapped so Lorentzian peaks become flat.
QuadraturePopulations populations_quadrature(const TransportConfig& cfg, double rel_tol = 1e-10);

}  // namespace arrowhead
