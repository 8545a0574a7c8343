#include "arrowhead/spectral_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "arrowhead/errors.hpp"
#include "arrowhead/numerics.hpp"
#include "arrowhead/rng.hpp"

namespace arrowhead {

using std::numbers::pi;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_inside(const DisorderModel& model, double eps, const char* who) {
  if (!model.inside(eps)) throw DomainError(std::string(who) + ": energy outside the open support");
}

}  // namespace

ShiftStatistics energy_shifts(const EigenDecomposition& dec) {
  const std::size_t n = dec.n_sites();
  if (n < 2) throw InsufficientSpectrumError("energy_shifts: need N >= 2");
  const auto& w = dec.bare().values;
  const double nd = static_cast<double>(n);
  ShiftStatistics s;
  s.shifts.reserve(n - 1);
  s.energies.reserve(n - 1);
  // dark state a (0-based 1..N-1) lies in [w_{a-1}, w_a]
  for (std::size_t a = 1; a < n; ++a) {
    const double half_gap = 0.5 * (w[a] - w[a - 1]);
    // eps_a - midpoint, measured from the closer bare energy for accuracy
    const double from_left = dec.kind(a) == EigenDecomposition::StateKind::Secular ? dec.diff(a, a - 1)
                                                                                   : dec.energies()[a] - w[a - 1];
    s.shifts.push_back(nd * (from_left - half_gap));
    s.energies.push_back(dec.energies()[a]);
  }
  return s;
}

double spacing_alpha(const DisorderModel& model, double g, double eps) {
  if (!(g > 0.0)) throw ParameterError("spacing_alpha: g must be positive");
  require_inside(model, eps, "spacing_alpha");
  const double rho = model.density(eps);
  if (!(rho > 0.0)) throw DegenerateDensityError("spacing_alpha: rho vanishes");
  return (model.hilbert(eps) - eps / (pi * g * g)) / rho;
}

double mean_shift_analytic(const DisorderModel& model, double g, double eps) {
  if (!(g > 0.0)) throw ParameterError("mean_shift_analytic: g must be positive");
  require_inside(model, eps, "mean_shift_analytic");
  const double rho = model.density(eps);
  return std::atan(spacing_alpha(model, g, eps)) / (pi * rho);
}

// ---- binning ----

std::size_t SpectralProfile::total() const noexcept {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::string SpectralProfile::csv() const {
  std::ostringstream os;
  os << "bin_center,mean,stderr,count\n";
  for (std::size_t b = 0; b < bins(); ++b)
    os << num::fmt17(center(b)) << ',' << num::fmt17(means[b]) << ',' << num::fmt17(stderrs[b]) << ','
       << counts[b] << '\n';
  return os.str();
}

SpectralProfile bin_statistic(std::span<const double> values, std::span<const double> energies, BinSpec spec) {
  if (values.size() != energies.size()) throw ParameterError("bin_statistic: values and energies differ in length");
  if (spec.bins == 0 || !(spec.hi > spec.lo)) throw ParameterError("bin_statistic: bad bin specification");
  SpectralProfile p;
  p.edges.resize(spec.bins + 1);
  const double h = (spec.hi - spec.lo) / static_cast<double>(spec.bins);
  for (std::size_t b = 0; b <= spec.bins; ++b) p.edges[b] = spec.lo + h * static_cast<double>(b);
  p.edges.back() = spec.hi;
  std::vector<std::vector<double>> members(spec.bins);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double e = energies[i];
    if (!(e >= spec.lo && e <= spec.hi)) continue;
    auto b = static_cast<std::size_t>((e - spec.lo) / h);
    b = std::min(b, spec.bins - 1);
    // guard against rounding at the edges
    while (b > 0 && e < p.edges[b]) --b;
    while (b + 1 < spec.bins && e >= p.edges[b + 1]) ++b;
    members[b].push_back(values[i]);
  }
  p.means.assign(spec.bins, kNaN);
  p.stderrs.assign(spec.bins, kNaN);
  p.counts.assign(spec.bins, 0);
  for (std::size_t b = 0; b < spec.bins; ++b) {
    p.counts[b] = members[b].size();
    if (members[b].empty()) continue;
    const auto ms = num::mean_stderr(members[b]);
    p.means[b] = ms.mean;
    p.stderrs[b] = ms.stderr_;
  }
  return p;
}

std::vector<double> shell_average(const SpectralProfile& profile, const DisorderModel& model, std::size_t n_sites,
                                  std::size_t realizations) {
  if (n_sites == 0 || realizations == 0) throw ParameterError("shell_average: empty ensemble");
  std::vector<double> out(profile.bins(), kNaN);
  for (std::size_t b = 0; b < profile.bins(); ++b) {
    const double rho = model.density(profile.center(b));
    if (!(rho > 0.0)) continue;
    const double width = profile.edges[b + 1] - profile.edges[b];
    const double sum = profile.counts[b] == 0 ? 0.0 : profile.means[b] * static_cast<double>(profile.counts[b]);
    out[b] = sum / (static_cast<double>(n_sites) * static_cast<double>(realizations) * rho * width);
  }
  return out;
}

// ---- polaritons ----

BoxPolariton box_upper_polariton(double width, double g) {
  if (!(width > 0.0)) throw ParameterError("box_upper_polariton: width must be positive");
  if (!(g > 0.0)) throw ParameterError("box_upper_polariton: g must be positive");
  const double W = width;
  const double c = g * g / W;
  // h(u) = W/2 + e^u - (g^2/W)(log(W + e^u) - u), increasing in u = log(eps - W/2)
  const auto h = [&](double u) { return 0.5 * W + std::exp(u) - c * (std::log(W + std::exp(u)) - u); };
  double lo = std::log(W) - W * W / (g * g) - 10.0;
  double hi = std::log(g + W);
  while (h(lo) > 0.0) lo -= 10.0;
  while (h(hi) < 0.0) hi += 1.0;
  boost::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(h, lo, hi, boost::math::tools::eps_tolerance<double>(53), iters);
  const double u = 0.5 * (a + b);
  const double delta = std::exp(u);
  BoxPolariton p;
  p.edge_distance = delta;
  p.energy = 0.5 * W + delta;
  // 1/(1 + g^2/(delta (W + delta))), evaluated in log space
  const double logx = 2.0 * std::log(g) - u - std::log(W + delta);
  p.photon_weight = logx > 0.0 ? std::exp(-logx) / (1.0 + std::exp(-logx)) : 1.0 / (1.0 + std::exp(logx));
  return p;
}

PolaritonEnergies polariton_energies_largeN(const DisorderModel& model, double g) {
  if (!(g > 0.0)) throw ParameterError("polariton_energies_largeN: g must be positive");
  PolaritonEnergies r;
  if (model.kind() == DisorderKind::Box) {
    const auto p = box_upper_polariton(model.width(), g);
    r.upper = p.energy;
    r.lower = -p.energy;
    return r;
  }
  const double scale = std::max(model.width(), g);
  const double tol_abs = 1e-12 * scale;
  const auto phi = [&](double e) { return e - pi * g * g * model.hilbert(e); };
  // above: phi increases from -inf (or a finite value) at hi to +inf
  const auto solve_side = [&](double edge, double dir, bool& exists) {
    exists = true;
    try {
      if (dir * phi(edge) >= 0.0) {
        exists = false;
        return edge;
      }
    } catch (const EdgeSingularityError&) {
      // divergent rho~ at the edge: a root always exists
    }
    double near = 1e-12 * model.width();
    while (dir * phi(edge + dir * near) > 0.0) {
      near *= 0.5;
      if (near < 1e-300) throw DomainError("polariton_energies_largeN: no root outside the support");
    }
    double far = g + model.width();
    while (dir * phi(edge + dir * far) < 0.0) far *= 2.0;
    double a = near, b = far;
    while (b - a > tol_abs && b - a > 4 * std::numeric_limits<double>::epsilon() * (std::abs(edge) + b)) {
      const double m = 0.5 * (a + b);
      (dir * phi(edge + dir * m) < 0.0 ? a : b) = m;
    }
    return edge + dir * 0.5 * (a + b);
  };
  r.upper = solve_side(model.hi(), 1.0, r.upper_exists);
  if (model.symmetric() && std::abs(model.lo() + model.hi()) == 0.0) {
    r.lower = -r.upper;
    r.lower_exists = r.upper_exists;
  } else {
    r.lower = solve_side(model.lo(), -1.0, r.lower_exists);
  }
  return r;
}

// ---- spacing model ----

double SpacingModel::mean_stderr() const noexcept {
  const double n = static_cast<double>(samples);
  const double m = sum_s / n;
  return std::sqrt(std::max(0.0, sum_s2 / n - m * m) / (n - 1.0));
}

void SpacingModel::merge(const SpacingModel& o) {
  if (counts.size() != o.counts.size()) throw ParameterError("SpacingModel::merge: incompatible histograms");
  for (std::size_t b = 0; b < counts.size(); ++b) counts[b] += o.counts[b];
  overflow += o.overflow;
  samples += o.samples;
  realizations += o.realizations;
  sum_s += o.sum_s;
  sum_s2 += o.sum_s2;
}

std::string SpacingModel::csv() const {
  std::ostringstream os;
  os << "bin_center,density,count\n";
  for (std::size_t b = 0; b < counts.size(); ++b)
    os << num::fmt17((static_cast<double>(b) + 0.5) * bin_width) << ',' << num::fmt17(density(b)) << ','
       << counts[b] << '\n';
  return os.str();
}

namespace {

// Secular function of the spacing model about anchor pole value `ua` (index
// `ka` excluded from the cot-addition sum), in the regularized form
// G(tau) = tau * h(tau), with h decreasing between poles.
struct SpacingEval {
  double h, G, dG;
};

SpacingEval spacing_eval(double alpha, std::span<const double> cu, double ua, std::size_t ka, double tau) {
  const double n = static_cast<double>(cu.size());
  const double cx = 1.0 / std::tan(pi * (ua + tau));
  double s = 0.0, ds = 0.0;
  for (std::size_t j = 0; j < cu.size(); ++j) {
    if (j == ka) continue;
    const double c = (cx * cu[j] + 1.0) / (cu[j] - cx);
    s += c;
    ds += 1.0 + c * c;
  }
  const double ct = 1.0 / std::tan(pi * tau);
  SpacingEval e;
  e.h = alpha + (ct + s) / n;
  // tau cot(pi tau) and its derivative are smooth at tau = 0
  const double tct = tau * ct;
  const double dtct = ct - pi * tau * (1.0 + ct * ct);
  e.G = tau * alpha + (tct + tau * s) / n;
  e.dG = alpha + (dtct + s - pi * tau * ds) / n;
  return e;
}

double spacing_bracket(double alpha, std::span<const double> cu, double ua, std::size_t ka, double lo, double hi) {
  const double w0 = hi - lo;
  // h > 0 on the left of the root
  while (hi - lo > 1e-3 * w0) {
    const double m = 0.5 * (lo + hi);
    (spacing_eval(alpha, cu, ua, ka, m).h > 0.0 ? lo : hi) = m;
  }
  double tau = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const auto e = spacing_eval(alpha, cu, ua, ka, tau);
    if (e.h == 0.0) return tau;
    (e.h > 0.0 ? lo : hi) = tau;
    double next = tau - e.G / e.dG;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - tau);
    tau = next;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(tau)) break;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))) break;
  }
  return tau;
}

}  // namespace

std::vector<double> spacing_roots(double alpha, std::span<const double> u) {
  if (!std::isfinite(alpha)) throw ParameterError("spacing_roots: alpha must be finite");
  const std::size_t n = u.size();
  if (n < 2) throw ParameterError("spacing_roots: need at least two poles");
  std::vector<double> cu(n);
  for (std::size_t j = 0; j < n; ++j) cu[j] = 1.0 / std::tan(pi * u[j]);
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k1 = (k + 1) % n;
    const double right = k + 1 < n ? u[k1] : u[0] + 1.0;
    const double gap = right - u[k];
    const double half = 0.5 * gap;
    if (spacing_eval(alpha, cu, u[k], k, half).h <= 0.0) {
      x[k] = u[k] + spacing_bracket(alpha, cu, u[k], k, 0.0, half);
    } else {
      x[k] = right + spacing_bracket(alpha, cu, right, k1, -(gap - half), 0.0);
    }
  }
  return x;
}

SpacingModel spacing_distribution(double alpha, std::size_t n, std::size_t realizations, std::uint64_t seed,
                                  double bin_width, double s_max) {
  if (!std::isfinite(alpha)) throw ParameterError("spacing_distribution: alpha must be finite");
  if (n < 10) throw ParameterError("spacing_distribution: N must be >= 10");
  if (realizations < 1) throw ParameterError("spacing_distribution: need at least one realization");
  if (!(bin_width > 0.0) || !(s_max > bin_width)) throw ParameterError("spacing_distribution: bad histogram");
  SpacingModel m;
  m.alpha = alpha;
  m.n = n;
  m.bin_width = bin_width;
  m.s_max = s_max;
  m.counts.assign(static_cast<std::size_t>(std::ceil(s_max / bin_width - 1e-9)), 0);
  std::vector<double> u(n);
  const double nd = static_cast<double>(n);
  for (std::size_t r = 0; r < realizations; ++r) {
    CounterRng rng(derive_seed(seed, r));
    for (auto& v : u) v = rng.uniform();
    std::sort(u.begin(), u.end());
    const auto x = spacing_roots(alpha, u);
    for (std::size_t k = 0; k < n; ++k) {
      const double s = k + 1 < n ? nd * (x[k + 1] - x[k]) : nd * (x[0] + 1.0 - x[k]);
      ++m.samples;
      m.sum_s += s;
      m.sum_s2 += s * s;
      const auto b = static_cast<std::size_t>(s / bin_width);
      if (s >= s_max || b >= m.counts.size())
        ++m.overflow;
      else
        ++m.counts[b];
    }
    ++m.realizations;
  }
  return m;
}

double poisson_cdf(double s) { return s <= 0.0 ? 0.0 : -std::expm1(-s); }

double semi_poisson_cdf(double s) { return s <= 0.0 ? 0.0 : 1.0 - std::exp(-2.0 * s) * (1.0 + 2.0 * s); }

double semi_poisson_pdf(double s) { return s < 0.0 ? 0.0 : 4.0 * s * std::exp(-2.0 * s); }

ChiSquareResult chi_square_test(const SpacingModel& m, double (*cdf)(double)) {
  if (m.samples == 0) throw EmptyEnsembleError("chi_square_test: empty histogram");
  const double n = static_cast<double>(m.samples);
  std::vector<double> obs, expct;
  double o = 0.0, e = 0.0;
  for (std::size_t b = 0; b < m.counts.size(); ++b) {
    const double a = static_cast<double>(b) * m.bin_width;
    const double c = std::min(m.s_max, a + m.bin_width);
    o += static_cast<double>(m.counts[b]);
    e += n * (cdf(c) - cdf(a));
    if (e >= 5.0) {
      obs.push_back(o);
      expct.push_back(e);
      o = e = 0.0;
    }
  }
  o += static_cast<double>(m.overflow);
  e += n * (1.0 - cdf(m.s_max));
  if (e >= 5.0 || obs.empty()) {
    obs.push_back(o);
    expct.push_back(e);
  } else {
    obs.back() += o;
    expct.back() += e;
  }
  ChiSquareResult r;
  for (std::size_t i = 0; i < obs.size(); ++i) r.statistic += (obs[i] - expct[i]) * (obs[i] - expct[i]) / expct[i];
  r.dof = static_cast<double>(obs.size()) - 1.0;
  r.p_value = r.dof > 0 ? num::chi_square_survival(r.dof, r.statistic) : 1.0;
  return r;
}

double l1_distance(const SpacingModel& m, double (*cdf)(double)) {
  if (m.samples == 0) throw EmptyEnsembleError("l1_distance: empty histogram");
  const double n = static_cast<double>(m.samples);
  double d = 0.0;
  for (std::size_t b = 0; b < m.counts.size(); ++b) {
    const double a = static_cast<double>(b) * m.bin_width;
    const double c = std::min(m.s_max, a + m.bin_width);
    d += std::abs(static_cast<double>(m.counts[b]) / n - (cdf(c) - cdf(a)));
  }
  d += std::abs(static_cast<double>(m.overflow) / n - (1.0 - cdf(m.s_max)));
  return d;
}

}  // namespace arrowhead
