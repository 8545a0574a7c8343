#include "arrowhead/disorder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "arrowhead/errors.hpp"
#include "arrowhead/numerics.hpp"
#include "arrowhead/rng.hpp"

namespace arrowhead {

using std::numbers::pi;

struct DisorderModel::Custom {
  CustomSpec spec;
};

DisorderModel DisorderModel::box(double width) {
  if (!(width > 0.0) || !std::isfinite(width)) throw ParameterError("box: width must be positive");
  DisorderModel m;
  m.kind_ = DisorderKind::Box;
  m.lo_ = -0.5 * width;
  m.hi_ = 0.5 * width;
  m.symmetric_ = true;
  return m;
}

DisorderModel DisorderModel::custom(CustomSpec spec) {
  if (!spec.density) throw ParameterError("custom: density is required");
  if (!(spec.hi > spec.lo)) throw ParameterError("custom: empty support");
  DisorderModel m;
  m.kind_ = DisorderKind::Custom;
  m.lo_ = spec.lo;
  m.hi_ = spec.hi;
  m.symmetric_ = spec.symmetric;
  // rho~ stays finite at an edge where the density vanishes
  const double w = spec.hi - spec.lo;
  double peak = 0.0;
  for (int i = 1; i < 16; ++i) peak = std::max(peak, spec.density(spec.lo + w * i / 16.0));
  const double edge = std::max(spec.density(spec.lo + 1e-9 * w), spec.density(spec.hi - 1e-9 * w));
  m.edge_jump_ = edge > 1e-3 * peak;
  m.custom_ = std::make_shared<const Custom>(Custom{std::move(spec)});
  return m;
}

double DisorderModel::scale() const noexcept { return std::max(std::abs(lo_), std::abs(hi_)); }

bool DisorderModel::has_sampler() const noexcept {
  return kind_ == DisorderKind::Box || static_cast<bool>(custom_->spec.inverse_cdf);
}

const std::string& DisorderModel::label() const noexcept {
  static const std::string box_label = "box";
  return kind_ == DisorderKind::Box ? box_label : custom_->spec.label;
}

void DisorderModel::check_edge(double w) const {
  if (!edge_jump_) return;
  const double tol = 1e-13 * width();
  if (std::abs(w - lo_) < tol || std::abs(w - hi_) < tol)
    throw EdgeSingularityError("rho~ diverges at the support edge (w = " + num::fmt17(w) + ")");
}

double DisorderModel::density(double w) const {
  if (w < lo_ || w > hi_) return 0.0;
  if (kind_ == DisorderKind::Box) return 1.0 / width();
  return custom_->spec.density(w);
}

double DisorderModel::density_deriv(double w) const {
  if (w < lo_ || w > hi_) return 0.0;
  if (kind_ == DisorderKind::Box) return 0.0;
  const auto& s = custom_->spec;
  if (s.density_deriv) return s.density_deriv(w);
  const double h = 1e-6 * width();
  const double a = std::max(lo_, w - h), b = std::min(hi_, w + h);
  return (s.density(b) - s.density(a)) / (b - a);
}

double DisorderModel::box_hilbert_above(double delta) const {
  if (kind_ != DisorderKind::Box) throw UnsupportedModelError("box_hilbert_above: box only");
  if (!(delta > 0.0)) throw DomainError("box_hilbert_above: delta must be positive");
  return std::log1p(width() / delta) / (pi * width());
}

double DisorderModel::hilbert(double w) const {
  check_edge(w);
  if (kind_ == DisorderKind::Box) {
    const double W = width();
    // log|(w + W/2)/(w - W/2)| written through atanh for accuracy on both sides
    if (std::abs(w) < 0.5 * W) return 2.0 / (pi * W) * std::atanh(2.0 * w / W);
    return 2.0 / (pi * W) * std::atanh(0.5 * W / w);
  }
  const auto& s = custom_->spec;
  if (s.hilbert) return s.hilbert(w);
  const auto rho = [&](double x) { return s.density(x); };
  if (!inside(w)) {
    auto r = num::integrate([&](double x) { return rho(x) / (w - x); }, lo_, hi_, 1e-11);
    return r.value / pi;
  }
  // singularity subtraction: int (rho(x) - rho(w))/(w - x) dx + rho(w) log((w-lo)/(hi-w))
  const double rw = rho(w);
  const auto reg = [&](double x) { return x == w ? 0.0 : (rho(x) - rw) / (w - x); };
  const double left = num::integrate(reg, lo_, w, 1e-11).value;
  const double right = num::integrate(reg, w, hi_, 1e-11).value;
  return (left + right + rw * std::log((w - lo_) / (hi_ - w))) / pi;
}

double DisorderModel::hilbert_deriv(double w) const {
  check_edge(w);
  if (kind_ == DisorderKind::Box) {
    const double h = 0.5 * width();
    return 1.0 / (pi * (h - w) * (h + w));
  }
  const auto& s = custom_->spec;
  if (s.hilbert_deriv) return s.hilbert_deriv(w);
  const auto rho = [&](double x) { return s.density(x); };
  if (!inside(w)) {
    auto r = num::integrate([&](double x) { return rho(x) / ((w - x) * (w - x)); }, lo_, hi_, 1e-11);
    return -r.value / pi;
  }
  // finite part: subtract the first two Taylor terms of rho at w
  const double rw = rho(w), dw = density_deriv(w);
  const auto reg = [&](double x) {
    const double d = x - w;
    return d == 0.0 ? 0.0 : (rho(x) - rw - dw * d) / (d * d);
  };
  const double left = num::integrate(reg, lo_, w, 1e-11).value;
  const double right = num::integrate(reg, w, hi_, 1e-11).value;
  const double fp = -1.0 / (hi_ - w) - 1.0 / (w - lo_);
  const double pv = std::log((hi_ - w) / (w - lo_));
  return -(left + right + rw * fp + dw * pv) / pi;
}

DensityTriplet DisorderModel::triplet(double w) const {
  DensityTriplet t;
  t.rho = density(w);
  t.hilbert = hilbert(w);
  t.hilbert_deriv = hilbert_deriv(w);
  return t;
}

double DisorderModel::cdf(double w) const {
  if (w <= lo_) return 0.0;
  if (w >= hi_) return 1.0;
  if (kind_ == DisorderKind::Box) return (w - lo_) / width();
  const auto& s = custom_->spec;
  if (s.cdf) return s.cdf(w);
  return num::integrate([&](double x) { return s.density(x); }, lo_, w, 1e-12).value;
}

double DisorderModel::inverse_cdf(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw ParameterError("inverse_cdf: u outside [0,1]");
  if (kind_ == DisorderKind::Box) return lo_ + u * width();
  const auto& s = custom_->spec;
  if (!s.inverse_cdf) throw UnsupportedModelError("custom model '" + s.label + "' has no sampler");
  return s.inverse_cdf(u);
}

DisorderModel semicircle_model(double width) {
  if (!(width > 0.0) || !std::isfinite(width)) throw ParameterError("semicircle_model: width must be positive");
  const double r = 0.5 * width;
  const double c = 2.0 / (pi * r * r);
  DisorderModel::CustomSpec s;
  s.lo = -r;
  s.hi = r;
  s.symmetric = true;
  s.label = "semicircle";
  s.density = [=](double x) { return std::abs(x) >= r ? 0.0 : c * std::sqrt((r - x) * (r + x)); };
  s.density_deriv = [=](double x) { return std::abs(x) >= r ? 0.0 : -c * x / std::sqrt((r - x) * (r + x)); };
  // (1/pi) Re of (2/r^2)(z - sqrt(z^2 - r^2))
  s.hilbert = [=](double x) {
    if (std::abs(x) < r) return c * x;
    return c * (x - std::copysign(std::sqrt((x - r) * (x + r)), x));
  };
  s.hilbert_deriv = [=](double x) {
    if (std::abs(x) < r) return c;
    return c * (1.0 - std::abs(x) / std::sqrt((x - r) * (x + r)));
  };
  s.cdf = [=](double x) {
    if (x <= -r) return 0.0;
    if (x >= r) return 1.0;
    return 0.5 + (x * std::sqrt((r - x) * (r + x)) / (r * r) + std::asin(x / r)) / pi;
  };
  s.inverse_cdf = [=, cdf = s.cdf](double u) {
    if (u <= 0.0) return -r;
    if (u >= 1.0) return r;
    std::uintmax_t iters = 200;
    const auto f = [&](double x) { return cdf(x) - u; };
    const auto [a, b] = boost::math::tools::toms748_solve(f, -r, r, f(-r), f(r),
                                                          boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (a + b);
  };
  return DisorderModel::custom(std::move(s));
}

BareEnergies sample_bare_energies(const DisorderModel& model, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ParameterError("sample_bare_energies: N must be >= 1");
  if (!model.has_sampler()) throw UnsupportedModelError("sample_bare_energies: model has no sampler");
  CounterRng rng(seed);
  BareEnergies e;
  e.values.resize(n);
  for (auto& v : e.values) v = model.inverse_cdf(rng.uniform());
  e.sorted = false;
  e.seed = seed;
  return e;
}

BareEnergies sorted(BareEnergies e) {
  std::sort(e.values.begin(), e.values.end());
  e.sorted = true;
  return e;
}

namespace {

// Next grid point after `w`, or nullopt when the step leaves the support.
std::optional<double> grid_step(const DisorderModel& m, double w, std::size_t n) {
  const double N = static_cast<double>(n);
  const auto resid = [&](double d) { return d * N * m.density(w + 0.5 * d) - 1.0; };
  double r0 = m.density(w);
  double d = r0 > 0.0 ? std::min(1.0 / (N * r0), m.width() / N) : m.width() / N;
  double dlo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = w + 0.5 * d;
    if (mid >= m.hi()) return std::nullopt;
    if (!(m.density(mid) > 0.0))
      throw DegenerateDensityError("equally_spaced_grid: nonpositive density at " + num::fmt17(mid));
    if (resid(d) >= 0.0) break;
    dlo = d;
    d *= 2.0;
  }
  boost::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(resid, dlo, d, boost::math::tools::eps_tolerance<double>(52),
                                                  iters);
  return w + 0.5 * (a + b);
}

}  // namespace

BareEnergies equally_spaced_grid(const DisorderModel& model, std::size_t n) {
  if (n == 0) throw ParameterError("equally_spaced_grid: N must be >= 1");
  BareEnergies e;
  e.sorted = true;
  e.values.resize(n);
  if (model.kind() == DisorderKind::Box) {
    const double W = model.width();
    for (std::size_t a = 0; a < n; ++a)
      e.values[a] = model.lo() + (2.0 * static_cast<double>(a) + 1.0) * W / (2.0 * static_cast<double>(n));
    return e;
  }
  // Shooting on the first point: mass below w_1 must equal mass above w_N.
  std::vector<double> pts(n);
  const auto shoot = [&](double w1) -> double {
    pts[0] = w1;
    for (std::size_t a = 1; a < n; ++a) {
      auto nx = grid_step(model, pts[a - 1], n);
      if (!nx || *nx >= model.hi()) return 1.0;
      pts[a] = *nx;
    }
    return model.cdf(w1) - (1.0 - model.cdf(pts[n - 1]));
  };
  double lo = model.lo() + 1e-12 * model.width();
  double hi = model.lo() + model.width() / static_cast<double>(n);
  for (int it = 0; it < 200 && model.cdf(hi) < 1.0 / static_cast<double>(n); ++it)
    hi = std::min(model.hi(), hi + model.width() / static_cast<double>(n));
  if (shoot(lo) > 0.0 || shoot(hi) < 0.0)
    throw DegenerateDensityError("equally_spaced_grid: could not bracket the grid offset");
  for (int it = 0; it < 200 && hi - lo > 1e-15 * model.width(); ++it) {
    const double mid = 0.5 * (lo + hi);
    (shoot(mid) > 0.0 ? hi : lo) = mid;
  }
  shoot(lo);
  e.values = pts;
  return e;
}

std::string bare_energies_csv(const BareEnergies& e) {
  std::ostringstream os;
  for (double v : e.values) os << num::fmt17(v) << '\n';
  return os.str();
}

}  // namespace arrowhead
