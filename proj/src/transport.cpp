#include "arrowhead/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "arrowhead/errors.hpp"
#include "arrowhead/numerics.hpp"

namespace arrowhead {

using std::numbers::pi;

// ---- config ----

TransportConfig TransportConfig::rescaled(BareEnergies bare, double g, double gamma_in_tilde, double gamma_out) {
  TransportConfig c;
  const double n = static_cast<double>(bare.size());
  c.bare = std::move(bare);
  c.g = g;
  c.gamma_in = gamma_in_tilde / (n * n);
  c.gamma_out = gamma_out;
  c.validate();
  return c;
}

void TransportConfig::validate() {
  const std::size_t n = bare.size();
  if (n < 2) throw ParameterError("TransportConfig: need at least two sites");
  if (!(g >= 0.0) || !std::isfinite(g)) throw ParameterError("TransportConfig: g must be finite and >= 0");
  if (!(gamma_in >= 0.0) || !std::isfinite(gamma_in)) throw ParameterError("TransportConfig: gamma_in must be >= 0");
  if (!(gamma_out >= 0.0) || !std::isfinite(gamma_out)) throw ParameterError("TransportConfig: gamma_out must be >= 0");
  if (out_site == static_cast<std::size_t>(-1)) out_site = n - 1;
  if (in_site >= n || out_site >= n) throw ParameterError("TransportConfig: site index out of range");
  if (in_site == out_site) throw ParameterError("TransportConfig: in_site and out_site must differ");
}

ArrowheadOperator TransportConfig::op() const {
  std::map<std::size_t, cplx> shift;
  shift[in_site] = cplx(0.0, -0.5 * gamma_in);
  shift[out_site] = cplx(0.0, -0.5 * gamma_out);
  return ArrowheadOperator(bare, g, shift);
}

// ---- solution ----

double TransportSolution::total_population() const {
  num::Compensated<double> s;
  for (double v : populations) s.add(v);
  s.add(n_cavity);
  return s.value();
}

std::string TransportSolution::json(const TransportConfig& cfg) const {
  nlohmann::json j;
  j["config"] = {{"N", cfg.n_sites()},         {"g", cfg.g},
                 {"gamma_in", cfg.gamma_in},   {"gamma_out", cfg.gamma_out},
                 {"in_site", cfg.in_site},     {"out_site", cfg.out_site}};
  auto ev = nlohmann::json::array();
  for (std::size_t a = 0; a < eigenvalues.size(); ++a)
    ev.push_back({{"re", eigenvalues[a].real()},
                  {"im", eigenvalues[a].imag()},
                  {"lifetime", lifetimes[a]},
                  {"share", shares.empty() ? 0.0 : shares[a]},
                  {"class", classes[a] == StateClass::Dark ? "dark" : "polariton"}});
  j["eigenstates"] = ev;
  j["populations"] = populations;
  j["n_cavity"] = n_cavity;
  j["total_population"] = total_population();
  j["J_in"] = j_in;
  j["J_out"] = j_out;
  j["dark_share"] = dark_share();
  j["used_quadrature"] = used_quadrature;
  j["used_dense_fallback"] = used_dense_fallback;
  return j.dump(2);
}

ComplexSpectrum transport_spectrum(const TransportConfig& cfg) {
  TransportConfig c = cfg;
  c.validate();
  return solve_complex_spectrum(c.op());
}

// ---- retarded Green's function ----

namespace {

cplx photon_propagator(const std::vector<cplx>& diag, double g2n, double w) {
  num::Compensated<cplx> s;
  for (const cplx& d : diag) {
    const cplx x = w - d;
    if (x == cplx{}) throw PoleError("retarded_greens_transport: w sits on an undamped bare energy");
    s.add(g2n / x);
  }
  const cplx den = w - s.value();
  if (den == cplx{}) throw PoleError("retarded_greens_transport: w is a real eigenvalue");
  return 1.0 / den;
}

cplx element(const std::vector<cplx>& diag, double g, double w, cplx D, std::size_t i, std::size_t j) {
  const std::size_t n = diag.size();
  const double g2n = g * g / static_cast<double>(n);
  const double gn = g / std::sqrt(static_cast<double>(n));
  if (i == n && j == n) return D;
  if (i == n || j == n) return gn * D / (w - diag[i == n ? j : i]);
  if (i != j) return g2n * D / ((w - diag[i]) * (w - diag[j]));
  const cplx x = w - diag[i];
  return 1.0 / x + g2n * D / (x * x);
}

}  // namespace

cplx retarded_greens_transport(const TransportConfig& cfg, double w, std::size_t i, std::size_t j) {
  TransportConfig c = cfg;
  c.validate();
  const std::size_t n = c.n_sites();
  if (i > n || j > n) throw ParameterError("retarded_greens_transport: index out of range");
  const auto diag = c.op().shifted_diagonal();
  const cplx D = photon_propagator(diag, c.g * c.g / static_cast<double>(n), w);
  return element(diag, c.g, w, D, i, j);
}

// ---- quadrature oracle ----

QuadraturePopulations populations_quadrature(const TransportConfig& cfg, double rel_tol) {
  TransportConfig c = cfg;
  c.validate();
  const std::size_t n = c.n_sites();
  QuadraturePopulations out;
  out.populations.assign(n, 0.0);
  if (c.gamma_in == 0.0) return out;
  const auto diag = c.op().shifted_diagonal();
  const double g2n = c.g * c.g / static_cast<double>(n);

  // resonances: eigenvalues and damped bare energies, as (center, half-width)
  std::vector<std::pair<double, double>> peaks;
  if (c.g > 0.0) {
    const auto cs = solve_complex_spectrum(c.op());
    for (const cplx& e : cs.eigenvalues)
      if (e.imag() < 0.0) peaks.emplace_back(e.real(), -e.imag());
  }
  for (const cplx& d : diag)
    if (d.imag() < 0.0) peaks.emplace_back(d.real(), -d.imag());
  std::sort(peaks.begin(), peaks.end());
  const double scale = std::max({1.0, std::abs(peaks.front().first), std::abs(peaks.back().first)});

  const auto integrate_all = [&](auto&& f) {
    // f(w) >= 0. Around each resonance: x = c + gamma tan(theta) out to K
    // half-widths, then x = c + e^s out to the midpoint (or infinity).
    double total = 0.0;
    const auto run = [&](auto&& h, double a, double b) {
      if (!(b > a)) return;
      const auto r = num::integrate(h, a, b, rel_tol, 8);
      total += r.value;
      out.max_error = std::max(out.max_error, r.error);
    };
    const auto side = [&](double c0, double gam, double reach, double dir) {
      const double k = std::min(reach / gam, 50.0);
      run([&](double th) {
            const double t = std::tan(th);
            return f(c0 + dir * gam * t) * gam * (1.0 + t * t);
          },
          0.0, std::atan(k));
      const double s0 = std::log(k * gam);
      // the slowest tail, |G_in,in|^2 ~ 1/w^2, leaves 1e-12 beyond the cutoff
      const double s1 = std::log(std::isinf(reach) ? 1e12 * scale : reach);
      run([&](double sv) {
            const double e = std::exp(sv);
            return f(c0 + dir * e) * e;
          },
          s0, s1);
    };
    const double inf = std::numeric_limits<double>::infinity();
    side(peaks.front().first, peaks.front().second, inf, -1.0);
    for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
      const auto [c0, g0] = peaks[k];
      const auto [c1, g1] = peaks[k + 1];
      const double half = 0.5 * (c1 - c0);
      if (half == 0.0) continue;
      side(c0, g0, half, 1.0);
      side(c1, g1, half, -1.0);
    }
    side(peaks.back().first, peaks.back().second, inf, 1.0);
    return total;
  };

  const std::size_t in = c.in_site;
  const double pref = c.gamma_in / (2.0 * pi);
  for (std::size_t j = 0; j <= n; ++j) {
    const double v = pref * integrate_all([&](double w) {
      if (j == in) {
        // Dyson form 1 / (w - w~_in - (g^2/N) D_without_in): no cancellation next to w~_in
        num::Compensated<cplx> sk;
        for (std::size_t k = 0; k < n; ++k)
          if (k != in) sk.add(g2n / (w - diag[k]));
        const cplx d_rest = 1.0 / (w - sk.value());
        return std::norm(1.0 / (w - diag[in] - g2n * d_rest));
      }
      const cplx D = c.g > 0.0 ? photon_propagator(diag, g2n, w) : cplx{};
      return std::norm(element(diag, c.g, w, D, j, in));
    });
    if (j == n)
      out.n_cavity = v;
    else
      out.populations[j] = v;
  }
  return out;
}

// ---- residue sums ----

TransportSolution solve_transport(const TransportConfig& cfg, DegenerateHandling on_degenerate) {
  TransportConfig c = cfg;
  c.validate();
  const std::size_t n = c.n_sites();
  const std::size_t in = c.in_site, outs = c.out_site;
  const auto cs = solve_complex_spectrum(c.op());
  const std::size_t m = cs.eigenvalues.size();
  const auto& diag = cs.shifted_diagonal();

  TransportSolution s;
  s.eigenvalues = cs.eigenvalues;
  s.used_dense_fallback = cs.used_dense_fallback;
  s.lifetimes.resize(m);
  s.phi.assign(m, cplx{});
  s.shares.assign(m, 0.0);
  s.classes.resize(m);
  const auto [wmin, wmax] = std::minmax_element(c.bare.values.begin(), c.bare.values.end());
  for (std::size_t a = 0; a < m; ++a) {
    const cplx e = cs.eigenvalues[a];
    s.lifetimes[a] = e.imag() < 0.0 ? -0.5 / e.imag() : std::numeric_limits<double>::infinity();
    s.classes[a] = (e.real() >= *wmin && e.real() <= *wmax) ? StateClass::Dark : StateClass::Polariton;
  }
  s.populations.assign(n, 0.0);

  const auto finish = [&] {
    s.j_out = c.gamma_out * s.populations[outs];
    s.j_in = -c.gamma_in * (1.0 - s.populations[in]);
    if (c.gamma_in == 0.0) s.j_in = 0.0;
    s.dark_current = s.polariton_current = 0.0;
    for (std::size_t a = 0; a < m; ++a) (s.classes[a] == StateClass::Dark ? s.dark_current : s.polariton_current) += s.shares[a];
  };

  if (c.gamma_in == 0.0) {
    finish();
    return s;
  }
  if (c.g == 0.0) {
    // decoupled: the injection site fills completely, nothing propagates
    s.populations[in] = 1.0;
    finish();
    s.j_in = 0.0;
    return s;
  }
  if (cs.near_degenerate) {
    if (on_degenerate == DegenerateHandling::Throw)
      throw IllConditionedError("solve_transport: near-degenerate complex eigenvalues make the residues ill-conditioned");
    const auto q = populations_quadrature(c);
    s.populations = q.populations;
    s.n_cavity = q.n_cavity;
    s.used_quadrature = true;
    // shares need the residues; attribute the current to the nearest-resonance class is not defined, keep them zero
    s.j_out = c.gamma_out * s.populations[outs];
    s.j_in = -c.gamma_in * (1.0 - s.populations[in]);
    return s;
  }

  const double g2n = c.g * c.g / static_cast<double>(n);
  const double g4n2 = g2n * g2n;
  const cplx I{0.0, 1.0};

  // phi_a = prod_{k != in} (eps_a - w~_k)(eps_a - w~_k^*) / prod_{a' != a} (eps_a - eps_a')(eps_a - eps_a'^*)
  for (std::size_t a = 0; a < m; ++a) {
    if (!(cs.eigenvalues[a].imag() < 0.0)) continue;  // undamped state: no overlap with the leads
    num::ScaledProduct p;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == in) continue;
      const cplx d = cs.diff(a, k);
      p.mul(d);
      p.mul(d + 2.0 * I * diag[k].imag());
    }
    for (std::size_t b = 0; b < m; ++b) {
      if (b == a) continue;
      const cplx d = cs.diff_eig(a, b);
      p.div(d);
      p.div(d + 2.0 * I * cs.eigenvalues[b].imag());
    }
    s.phi[a] = p.value();
  }

  std::vector<num::Compensated<cplx>> pop(n);
  num::Compensated<cplx> nc;
  for (std::size_t a = 0; a < m; ++a) {
    if (s.phi[a] == cplx{}) continue;
    const cplx tp = s.lifetimes[a] * s.phi[a];
    nc.add(c.gamma_in * g2n * tp);
    for (std::size_t j = 0; j < n; ++j) {
      const cplx d = cs.diff(a, j);
      const cplx term = c.gamma_in * g4n2 * tp / (d * (d + 2.0 * I * diag[j].imag()));
      pop[j].add(term);
      if (j == outs) s.shares[a] = c.gamma_out * term.real();
    }
  }
  for (std::size_t j = 0; j < n; ++j) s.populations[j] = pop[j].value().real();
  s.n_cavity = nc.value().real();

  // extra terms of the injection-site population
  {
    const cplx win = diag[in];
    num::ScaledProduct t1, t2;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == in) continue;
      t1.mul(win - diag[k]);
      t1.mul(win - std::conj(diag[k]));
      t2.mul(win - std::conj(diag[k]));
    }
    for (std::size_t a = 0; a < m; ++a) {
      const cplx d = cs.diff(a, in);                       // eps_a - w~_in
      const cplx dc = std::conj(d) - 2.0 * I * win.imag();  // eps_a^* - w~_in
      t1.div(d);
      t1.div(dc);
      t2.div(-dc);
    }
    s.populations[in] += 1.0 + g4n2 * t1.value().real() + 2.0 * g2n * t2.value().real();
  }
  finish();
  return s;
}

}  // namespace arrowhead
