#include "arrowhead/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/sinc.hpp>

#include "arrowhead/errors.hpp"
#include "arrowhead/numerics.hpp"
#include "arrowhead/photon.hpp"

namespace arrowhead {

using std::numbers::pi;

namespace {

const cplx I{0.0, 1.0};

inline cplx phase(double x) { return {std::cos(x), -std::sin(x)}; }  // exp(-i x)

}  // namespace

// ---- finite N ----

std::vector<cplx> propagator_finiteN(const EigenDecomposition& dec, std::size_t i, std::size_t j,
                                     const std::vector<double>& times) {
  const std::size_t m = dec.size();
  if (i >= m || j >= m) throw ParameterError("propagator_finiteN: index out of range");
  std::vector<double> c(m);
  for (std::size_t a = 0; a < m; ++a) c[a] = dec.component(a, i) * dec.component(a, j);
  std::vector<cplx> out;
  out.reserve(times.size());
  for (double t : times) {
    if (!std::isfinite(t)) throw ParameterError("propagator_finiteN: time must be finite");
    num::Compensated<cplx> s;
    for (std::size_t a = 0; a < m; ++a)
      if (c[a] != 0.0) s.add(c[a] * phase(dec.energies()[a] * t));
    out.push_back(s.value());
  }
  return out;
}

cplx propagator_finiteN(const EigenDecomposition& dec, std::size_t i, std::size_t j, double t) {
  return propagator_finiteN(dec, i, j, std::vector<double>{t}).front();
}

// ---- large N ----

namespace {

// Accumulates quadrature error estimates for one propagator evaluation.
// Ends flagged as support edges are mapped by u = edge -+ h e^{-s}: the
// continuum vanishes there like 1/log^2, which defeats plain Gauss-Kronrod.
struct ErrorBudget {
  double total = 0.0;
  double edge_floor = 1e-12;  // smallest distance to an edge, relative to the interval

  template <class F>
  double plain(F&& f, double a, double b) {
    if (a == b) return 0.0;
    const auto r = num::integrate(f, a, b, 1e-11, 20);
    total += r.error;
    return r.value;
  }
  template <class F>
  double run(F&& f, double a, double b, bool edge_a = false, bool edge_b = false) {
    if (a == b) return 0.0;
    const double h = 0.125 * (b - a);
    const double smax = std::log(0.125 / edge_floor);
    double v = 0.0;
    double lo = a, hi = b;
    if (edge_a) {
      v += plain([&](double s) { const double e = h * std::exp(-s); return f(a + e) * e; }, 0.0, smax);
      lo = a + h;
    }
    if (edge_b) {
      v += plain([&](double s) { const double e = h * std::exp(-s); return f(b - e) * e; }, 0.0, smax);
      hi = b - h;
    }
    return v + plain(f, lo, hi);
  }
  // Fixed 20-point Gauss-Legendre; used next to a subtracted singularity where
  // cancellation noise would drive adaptive refinement forever.
  template <class F>
  double fixed(F&& f, double a, double b) {
    std::vector<double> x, w;
    num::gauss_legendre_panels(a, b, 1, 20, x, w);
    double v = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) v += w[k] * f(x[k]);
    return v;
  }
  // int_a^b h(u) exp(-i u t) du
  template <class H>
  cplx oscillatory(H&& h, double a, double b, double t, bool edge_a = false, bool edge_b = false) {
    const double re = run([&](double u) { return h(u) * std::cos(u * t); }, a, b, edge_a, edge_b);
    const double im = run([&](double u) { return -h(u) * std::sin(u * t); }, a, b, edge_a, edge_b);
    return {re, im};
  }
};

// pv int_a^b exp(-i u t) / u du for a < 0 < b.
cplx pv_kernel(double a, double b, double t, ErrorBudget& eb) {
  if (t == 0.0) return std::log(b / -a);
  const double c = std::min(-a, b);
  // odd part over [-c, c] is -2i Si(c t)
  const double ct = c * std::abs(t);
  double si = 0.0;
  const double half = 0.5 * std::max(ct, 1e-300);
  si = eb.plain([](double v) { return boost::math::sinc_pi(v); }, 0.0, half) +
       eb.plain([](double v) { return boost::math::sinc_pi(v); }, half, ct);
  cplx out = -2.0 * I * std::copysign(si, t);
  const auto inv = [](double u) { return 1.0 / u; };
  if (b > c) out += eb.oscillatory(inv, c, b, t);
  if (-a > c) out += eb.oscillatory(inv, a, -c, t);
  return out;
}

// int_a^b exp(-i u t) du.
cplx exp_integral(double a, double b, double t) {
  if (t == 0.0) return b - a;
  return (phase(b * t) - phase(a * t)) / (-I * t);
}

struct LargeNContext {
  const DisorderModel& model;
  double g;
  PolaritonWeights pol;
  ErrorBudget eb;

  double A(double w) const {
    // the continuum is below 1e-3 of its scale this close to an edge; skip the log singularity
    const double guard = 1e-12 * model.width();
    if (w - model.lo() < guard || model.hi() - w < guard) return 0.0;
    return spectral_continuum(model, g, w);
  }

  // int A(w) exp(-i w t) dw over the support
  cplx fourier(double t) {
    const double mid = 0.5 * (model.lo() + model.hi());
    const auto f = [&](double w) { return A(w); };
    return eb.oscillatory(f, model.lo(), mid, t, true, false) + eb.oscillatory(f, mid, model.hi(), t, false, true);
  }

  cplx poles(double t, double x, int power) const {
    cplx s{};
    const double e[2] = {pol.energy_lower, pol.energy_upper};
    const double w[2] = {pol.lower, pol.upper};
    for (int k = 0; k < 2; ++k) s += w[k] * phase(e[k] * t) / std::pow(e[k] - x, power);
    return s;
  }

  // pv int A(w) e^{-iwt} / (w - x) dw and f.p. int A(w) e^{-iwt} / (w - x)^2 dw
  std::pair<cplx, cplx> singular(double x, double t, bool need_fp) {
    const double a = model.lo() - x, b = model.hi() - x;
    const double a0 = A(x), a1 = spectral_continuum_deriv(model, g, x);
    const auto rem = [&](double u) { return A(x + u) - a0 - a1 * u; };
    const double d = std::min({0.01 * model.width(), -0.5 * a, 0.5 * b});
    // regular remainder: adaptive away from u = 0, fixed rule on [-d, d]
    const auto regular = [&](auto&& h) {
      const auto re = [&](double u) { return h(u) * std::cos(u * t); };
      const auto im = [&](double u) { return -h(u) * std::sin(u * t); };
      return eb.oscillatory(h, a, -d, t, true, false) + eb.oscillatory(h, d, b, t, false, true) +
             cplx(eb.fixed(re, -d, 0.0) + eb.fixed(re, 0.0, d), eb.fixed(im, -d, 0.0) + eb.fixed(im, 0.0, d));
    };
    const auto h1 = [&](double u) { return rem(u) / u; };
    const cplx reg1 = regular(h1);
    const cplx P = pv_kernel(a, b, t, eb);
    const cplx E = exp_integral(a, b, t);
    const cplx ph = phase(x * t);
    const cplx pv = ph * (reg1 + a0 * P + a1 * E);
    if (!need_fp) return {pv, {}};
    const auto h2 = [&](double u) { return rem(u) / (u * u); };
    const cplx reg2 = regular(h2);
    const cplx F = -phase(b * t) / b + phase(a * t) / a - I * t * P;
    const cplx fp = ph * (reg2 + a0 * F + a1 * P);
    return {pv, fp};
  }

  // bracket of G_{j,c} without the g/sqrt(N) prefactor
  cplx site_cavity(double x, double t) {
    const double R = photon_greens_largeN(model, g, x, Side::Upper).real();
    return poles(t, x, 1) + singular(x, t, false).first + R * phase(x * t);
  }
};

}  // namespace

cplx propagator_largeN(const DisorderModel& model, double g, std::size_t n, const LargeNElement& el, double t) {
  if (!(g > 0.0)) throw ParameterError("propagator_largeN: g must be positive");
  if (n == 0) throw ParameterError("propagator_largeN: N must be >= 1");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ParameterError("propagator_largeN: t must be finite and >= 0");
  const auto check = [&](double w) {
    if (!model.inside(w)) throw DomainError("propagator_largeN: site energy must be strictly inside the support");
  };
  LargeNContext ctx{model, g, photon_weight_polaritons(model, g), {}};
  const double gn = g / std::sqrt(static_cast<double>(n));
  cplx out;
  switch (el.kind) {
    case Element::Photon: out = ctx.poles(t, 0.0, 0) + ctx.fourier(t); break;
    case Element::SiteCavity:
      check(el.wj);
      out = gn * ctx.site_cavity(el.wj, t);
      break;
    case Element::SiteSite:
      check(el.wi);
      check(el.wj);
      if (el.wi == el.wj) throw ParameterError("propagator_largeN: off-diagonal element needs distinct energies");
      out = gn * gn * (ctx.site_cavity(el.wi, t) - ctx.site_cavity(el.wj, t)) / (el.wi - el.wj);
      break;
    case Element::Diagonal: {
      check(el.wj);
      const double x = el.wj;
      const cplx D = photon_greens_largeN(model, g, x, Side::Upper);
      const double R = D.real();
      const double Rd = photon_greens_largeN_deriv(model, g, x).real();
      const auto [pv, fp] = ctx.singular(x, t, true);
      (void)pv;
      const cplx ph = phase(x * t);
      out = ph + gn * gn * (ctx.poles(t, x, 2) + fp + ph * (Rd - I * t * R));
      break;
    }
  }
  if (ctx.eb.total > 1e-8) throw ToleranceError("propagator_largeN: quadrature error above 1e-8", ctx.eb.total);
  return out;
}

// ---- escape ----

std::string EscapeCurve::csv() const {
  std::ostringstream os;
  os << "t,P,abs_Gjj,phase\n";
  for (std::size_t k = 0; k < times.size(); ++k)
    os << num::fmt17(times[k]) << ',' << num::fmt17(p[k]) << ',' << num::fmt17(std::abs(gjj[k])) << ','
       << num::fmt17(std::arg(gjj[k])) << '\n';
  return os.str();
}

std::vector<double> geometric_times(double t_min, double t_max, std::size_t count) {
  if (!(t_min > 0.0) || !(t_max > t_min) || count < 2)
    throw ParameterError("geometric_times: need 0 < t_min < t_max and count >= 2");
  std::vector<double> t(count);
  const double r = std::log(t_max / t_min) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) t[k] = t_min * std::exp(r * static_cast<double>(k));
  t.back() = t_max;
  return t;
}

void fit_escape_rate(EscapeCurve& c, double g, const FitWindow& w) {
  std::vector<double> x, y;
  bool truncated = false;
  for (std::size_t k = 0; k < c.times.size(); ++k) {
    const double gt = g * c.times[k];
    if (gt < w.gt_min || gt > w.gt_max) continue;
    if (c.p[k] > w.p_max) {
      truncated = true;
      continue;
    }
    x.push_back(c.times[k]);
    y.push_back(c.p[k]);
  }
  c.fit_points = x.size();
  c.warning = false;
  c.warning_text.clear();
  if (x.size() < 3) {
    c.warning = true;
    c.warning_text = "fewer than three points in the fit window";
    c.rate = c.intercept = c.rate_stderr = 0.0;
    return;
  }
  if (truncated) {
    c.warning = true;
    c.warning_text = "fit window truncated by the P <= p_max cap";
  }
  const auto f = num::fit_linear(x, y);
  c.rate = f.slope;
  c.intercept = f.intercept;
  c.rate_stderr = f.slope_stderr;
  c.t1 = x.front();
  c.t2 = x.back();
}

EscapeCurve escape_probability(const EigenDecomposition& dec, std::size_t site, const std::vector<double>& times,
                               const FitWindow& window) {
  if (site >= dec.n_sites()) throw ParameterError("escape_probability: site index out of range");
  EscapeCurve c;
  c.site = site;
  c.energy = dec.bare().values[site];
  c.times = times;
  c.gjj = propagator_finiteN(dec, site, site, times);
  c.p.resize(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) c.p[k] = std::clamp(1.0 - std::norm(c.gjj[k]), 0.0, 1.0);
  if (dec.g() > 0.0) fit_escape_rate(c, dec.g(), window);
  return c;
}

EscapeCurve escape_probability_largeN(const DisorderModel& model, double g, std::size_t n, double wj,
                                      const std::vector<double>& times, const FitWindow& window) {
  EscapeCurve c;
  c.site = n;
  c.energy = wj;
  c.times = times;
  for (double t : times) {
    const cplx v = propagator_largeN(model, g, n, {Element::Diagonal, 0.0, wj}, t);
    c.gjj.push_back(v);
    c.p.push_back(std::clamp(1.0 - std::norm(v), 0.0, 1.0));
  }
  fit_escape_rate(c, g, window);
  return c;
}

// ---- rates ----

EscapeRate escape_rate_analytic(const DisorderModel& model, double g, std::size_t n, double w) {
  if (n == 0) throw ParameterError("escape_rate_analytic: N must be >= 1");
  if (!(g >= 0.0)) throw ParameterError("escape_rate_analytic: g must be >= 0");
  if (!model.inside(w)) return {0.0, true};
  if (g == 0.0) return {0.0, false};
  return {2.0 * pi * g * g / static_cast<double>(n) * spectral_continuum(model, g, w), false};
}

double mean_escape_rate(const DisorderModel& model, double g, std::size_t n) {
  if (n == 0) throw ParameterError("mean_escape_rate: N must be >= 1");
  if (g == 0.0) return 0.0;
  if (model.kind() == DisorderKind::Box) {
    const auto pw = photon_weight_polaritons(model, g);
    return 2.0 * pi * g * g / (static_cast<double>(n) * model.width()) * (1.0 - pw.lower - pw.upper);
  }
  const auto f = [&](double w) { return model.density(w) * escape_rate_analytic(model, g, n, w).rate; };
  const double mid = 0.5 * (model.lo() + model.hi());
  return num::integrate(f, model.lo(), mid, 1e-11).value + num::integrate(f, mid, model.hi(), 1e-11).value;
}

double mean_escape_rate_finiteN(const ArrowheadOperator& op, double width) {
  if (!(width > 0.0)) throw ParameterError("mean_escape_rate_finiteN: width must be positive");
  const double g = op.g();
  if (g == 0.0) return 0.0;
  const auto ex = solve_exterior(op);
  return 2.0 * pi * g * g / (static_cast<double>(op.n_sites()) * width) * (1.0 - ex.pw_lower - ex.pw_upper);
}

// ---- perturbative ----

FgrResult fgr_escape_probability(const BareEnergies& bare, double g, std::size_t site, const std::vector<double>& times) {
  const std::size_t n = bare.size();
  if (site >= n) throw ParameterError("fgr_escape_probability: site index out of range");
  FgrResult r;
  r.times = times;
  const double wj = bare.values[site];
  if (wj == 0.0) {
    r.warning = true;
    r.warning_text = "site energy is zero; the matrix element diverges";
    r.p.assign(times.size(), std::nan(""));
    return r;
  }
  if (g > 0.3 * std::abs(wj) * std::sqrt(static_cast<double>(n))) {
    r.warning = true;
    r.warning_text = "coupling not small against |w_j| sqrt(N)";
  }
  const double pref = g * g / (2.0 * static_cast<double>(n));
  std::vector<double> v2, d;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == site) continue;
    const double wi = bare.values[i];
    if (wi == 0.0 || wi == wj) {
      r.warning = true;
      r.warning_text = "degenerate or zero bare energy in the sum";
      continue;
    }
    const double v = pref * (1.0 / wi + 1.0 / wj);
    v2.push_back(v * v);
    d.push_back(wi - wj);
  }
  for (double t : times) {
    num::Compensated<double> s;
    for (std::size_t k = 0; k < d.size(); ++k) {
      const double sn = std::sin(0.5 * d[k] * t);
      s.add(4.0 * v2[k] * sn * sn / (d[k] * d[k]));
    }
    r.p.push_back(s.value());
  }
  return r;
}

}  // namespace arrowhead
