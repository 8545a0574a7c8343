#include "arrowhead/localization.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "arrowhead/errors.hpp"
#include "arrowhead/numerics.hpp"
#include "arrowhead/rng.hpp"

namespace arrowhead {

using std::numbers::pi;

namespace {

// x^q with exact shortcuts for the exponents used most.
inline double power(double x, double q) {
  if (q == 2.0) return x * x;
  if (q == 0.5) return std::sqrt(x);
  if (q == 0.25) return std::sqrt(std::sqrt(x));
  if (q == 1.0) return x;
  return std::pow(x, q);
}

}  // namespace

double ipr(const EigenDecomposition& dec, std::size_t a, double q) {
  if (!(q > 0.0)) throw ParameterError("ipr: q must be positive");
  const std::size_t n = dec.n_sites();
  double s = 0.0;
  if (dec.kind(a) == EigenDecomposition::StateKind::Secular) {
    // |psi_j|^2 = (g^2/N) N_a^2 / diff^2
    const double pref = dec.g() * dec.g() / static_cast<double>(n) * dec.norms()[a] * dec.norms()[a];
    for (std::size_t j = 0; j < n; ++j) {
      const double d = dec.diff(a, j);
      s += power(pref / (d * d), q);
    }
    s += power(dec.photon_weight(a), q);
    return s;
  }
  const auto v = dec.state(a);
  for (double x : v)
    if (x != 0.0) s += power(x * x, q);
  return s;
}

std::string IprReport::csv() const {
  std::ostringstream os;
  os << "a,eps,ipr,class\n";
  for (std::size_t a = 0; a < values.size(); ++a)
    os << a << ',' << num::fmt17(energies[a]) << ',' << num::fmt17(values[a]) << ','
       << (classes[a] == StateClass::Dark ? "dark" : "polariton") << '\n';
  return os.str();
}

double IprReport::dark_mean() const {
  std::vector<double> dark;
  for (std::size_t a = 0; a < values.size(); ++a)
    if (classes[a] == StateClass::Dark) dark.push_back(values[a]);
  return num::mean_stderr(dark).mean;
}

IprReport ipr_report(const EigenDecomposition& dec, double q) {
  IprReport r;
  r.q = q;
  const std::size_t m = dec.size();
  r.values.resize(m);
  r.energies = dec.energies();
  r.classes.resize(m, StateClass::Dark);
  r.classes.front() = StateClass::Polariton;
  r.classes.back() = StateClass::Polariton;
  for (std::size_t a = 0; a < m; ++a) r.values[a] = ipr(dec, a, q);
  return r;
}

double ipr_equally_spaced_analytic(const DisorderModel& model, double g, double eps) {
  if (!(g > 0.0)) throw ParameterError("ipr_equally_spaced_analytic: g must be positive");
  if (!model.inside(eps)) throw DomainError("ipr_equally_spaced_analytic: energy outside the open support");
  const double rho = model.density(eps);
  const double x = model.hilbert(eps) - eps / (pi * g * g);
  return (rho * rho / 3.0 + x * x) / (rho * rho + x * x);
}

std::string FractalFit::json() const {
  std::ostringstream os;
  os << "{\"q\":" << num::fmt17(q) << ",\"d\":" << num::fmt17(d) << ",\"class\":\""
     << (cls == StateClass::Dark ? "dark" : "polariton") << "\",\"sizes\":[";
  for (std::size_t i = 0; i < sizes.size(); ++i) os << (i ? "," : "") << sizes[i];
  os << "],\"means\":[";
  for (std::size_t i = 0; i < mean_ipr.size(); ++i) os << (i ? "," : "") << num::fmt17(mean_ipr[i]);
  os << "],\"b\":" << num::fmt17(b) << ",\"c\":" << num::fmt17(c) << ",\"c_stderr\":" << num::fmt17(c_stderr)
     << ",\"rms_residual\":" << num::fmt17(rms_residual) << ",\"D_f\":" << num::fmt17(c * d) << "}";
  return os.str();
}

std::string FractalFit::csv() const {
  std::ostringstream os;
  os << "q,N,ipr_mean,ipr_stderr,effective_dim\n";
  for (std::size_t i = 0; i < sizes.size(); ++i)
    os << num::fmt17(q) << ',' << sizes[i] << ',' << num::fmt17(mean_ipr[i]) << ',' << num::fmt17(mean_ipr_se[i])
       << ',' << num::fmt17(effective_dim[i]) << '\n';
  return os.str();
}

FractalFit fractal_dimension_estimate(const DisorderModel& model, double g, double q, const std::vector<std::size_t>& sizes,
                                      std::uint64_t base_seed, std::size_t seeds, StateClass cls, double d) {
  if (q == 1.0) throw ParameterError("fractal_dimension_estimate: exponent undefined at q = 1");
  if (!(q > 0.0)) throw ParameterError("fractal_dimension_estimate: q must be positive");
  if (sizes.size() < 3) throw ParameterError("fractal_dimension_estimate: need at least three sizes");
  if (seeds < 1) throw EmptyEnsembleError("fractal_dimension_estimate: no seeds");
  FractalFit f;
  f.q = q;
  f.d = d;
  f.cls = cls;
  f.sizes = sizes;
  std::vector<double> x, y;
  for (std::size_t n : sizes) {
    if (n < 3) throw ParameterError("fractal_dimension_estimate: sizes must be >= 3");
    std::vector<double> per_seed;
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto bare = sorted(sample_bare_energies(model, n, derive_seed(base_seed, s)));
      const auto dec = solve_spectrum(ArrowheadOperator(bare, g));
      double acc = 0.0;
      std::size_t cnt = 0;
      for (std::size_t a = 0; a < dec.size(); ++a) {
        const bool pol = a == 0 || a + 1 == dec.size();
        if (pol != (cls == StateClass::Polariton)) continue;
        acc += ipr(dec, a, q);
        ++cnt;
      }
      per_seed.push_back(acc / static_cast<double>(cnt));
    }
    const auto ms = num::mean_stderr(per_seed);
    f.mean_ipr.push_back(ms.mean);
    f.mean_ipr_se.push_back(seeds > 1 ? ms.stderr_ : 0.0);
    const double logn = std::log(static_cast<double>(n));
    const double eff = std::log(ms.mean) / ((1.0 - q) * logn) / d;
    f.effective_dim.push_back(eff);
    x.push_back(1.0 / logn);
    y.push_back(eff);
  }
  const auto fit = num::fit_linear(x, y);
  f.b = fit.slope;
  f.c = fit.intercept;
  f.rms_residual = fit.rms_residual;
  // intercept standard error from the residual variance
  double mx = 0.0, sxx = 0.0;
  for (double v : x) mx += v;
  mx /= static_cast<double>(x.size());
  for (double v : x) sxx += (v - mx) * (v - mx);
  const double n = static_cast<double>(x.size());
  const double s2 = n > 2 ? fit.rms_residual * fit.rms_residual * n / (n - 2.0) : 0.0;
  f.c_stderr = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  return f;
}

}  // namespace arrowhead
