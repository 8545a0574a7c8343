#include "arrowhead/photon.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "arrowhead/errors.hpp"
#include "arrowhead/numerics.hpp"
#include "arrowhead/spectral_stats.hpp"

namespace arrowhead {

using std::numbers::pi;

cplx photon_greens_finiteN(const ArrowheadOperator& op, cplx z) {
  const double w2 = op.g() * op.g() / static_cast<double>(op.n_sites());
  num::Compensated<cplx> s;
  const auto diag = op.shifted_diagonal();
  for (const cplx& w : diag) {
    const cplx d = z - w;
    if (std::abs(d) <= std::numeric_limits<double>::epsilon() * std::max(std::abs(z), std::abs(w)))
      throw PoleError("photon_greens_finiteN: z coincides with a bare energy");
    s.add(w2 / d);
  }
  const cplx den = z - s.value();
  if (den == cplx{}) throw PoleError("photon_greens_finiteN: z is an eigenvalue");
  return 1.0 / den;
}

cplx photon_greens_eigensum(const EigenDecomposition& dec, cplx z) {
  num::Compensated<cplx> s;
  for (std::size_t a = 0; a < dec.size(); ++a) {
    const double pw = dec.photon_weight(a);
    if (pw == 0.0) continue;
    const cplx d = z - dec.energies()[a];
    if (d == cplx{}) throw PoleError("photon_greens_eigensum: z is an eigenvalue");
    s.add(pw / d);
  }
  return s.value();
}

cplx pi_bar(const DisorderModel& model, cplx z, Side side) {
  const bool on_axis = z.imag() == 0.0;
  if (on_axis) {
    const double w = z.real();
    if (!model.inside(w)) return model.hilbert(w);
    if (side == Side::None) throw DomainError("pi_bar: real argument on the support needs a boundary side");
    const double rho = model.density(w);
    return {model.hilbert(w), side == Side::Upper ? -rho : rho};
  }
  if (model.kind() == DisorderKind::Box) {
    const double h = 0.5 * model.width();
    return std::log((z + h) / (z - h)) / (pi * model.width());
  }
  auto re = num::integrate([&](double x) { return (model.density(x) / (z - x)).real(); }, model.lo(), model.hi(), 1e-11);
  auto im = num::integrate([&](double x) { return (model.density(x) / (z - x)).imag(); }, model.lo(), model.hi(), 1e-11);
  return cplx(re.value, im.value) / pi;
}

cplx photon_greens_largeN(const DisorderModel& model, double g, cplx z, Side side) {
  if (!(g >= 0.0)) throw ParameterError("photon_greens_largeN: g must be >= 0");
  return 1.0 / (z - pi * g * g * pi_bar(model, z, side));
}

namespace {

// Pi(w + i0) and its derivative at an interior point.
struct Boundary {
  double rho, rho_d, hil, hil_d;
  cplx pi_plus() const { return {hil, -rho}; }
  cplx pi_plus_d() const { return {hil_d, -rho_d}; }
};

Boundary boundary(const DisorderModel& model, double w) {
  return {model.density(w), model.density_deriv(w), model.hilbert(w), model.hilbert_deriv(w)};
}

cplx d_plus(double g, double w, const Boundary& b) { return 1.0 / (w - pi * g * g * b.pi_plus()); }

cplx d_plus_deriv(double g, const Boundary& b, cplx d) { return -d * d * (1.0 - pi * g * g * b.pi_plus_d()); }

}  // namespace

cplx photon_greens_largeN_deriv(const DisorderModel& model, double g, double w) {
  if (!model.inside(w)) throw DomainError("photon_greens_largeN_deriv: energy outside the open support");
  const auto b = boundary(model, w);
  return d_plus_deriv(g, b, d_plus(g, w, b));
}

double spectral_continuum(const DisorderModel& model, double g, double w) {
  if (!model.inside(w)) return 0.0;
  if (!(g > 0.0)) throw ParameterError("spectral_continuum: g must be positive");
  const double rho = model.density(w);
  const double x = model.hilbert(w) - w / (pi * g * g);
  return rho / (pi * pi * g * g) / (rho * rho + x * x);
}

double spectral_continuum_deriv(const DisorderModel& model, double g, double w) {
  if (!model.inside(w)) return 0.0;
  return -photon_greens_largeN_deriv(model, g, w).imag() / pi;
}

// ---- spectral function ----

std::string SpectralFunction::csv() const {
  std::ostringstream os;
  os << "w,A\n";
  for (std::size_t i = 0; i < grid.size(); ++i) os << num::fmt17(grid[i]) << ',' << num::fmt17(values[i]) << '\n';
  return os.str();
}

std::string SpectralFunction::delta_csv() const {
  std::ostringstream os;
  os << "position,weight\n";
  for (std::size_t i = 0; i < delta_positions.size(); ++i)
    os << num::fmt17(delta_positions[i]) << ',' << num::fmt17(delta_weights[i]) << '\n';
  return os.str();
}

namespace {

inline double lorentzian(double x, double sigma) { return sigma / pi / (x * x + sigma * sigma); }

}  // namespace

SpectralFunction spectral_function_finiteN(const EigenDecomposition& dec, const std::vector<double>& grid, double sigma) {
  if (grid.empty()) throw ParameterError("spectral_function_finiteN: empty grid");
  if (!(sigma > 0.0)) throw ParameterError("spectral_function_finiteN: sigma must be positive");
  SpectralFunction f;
  f.grid = grid;
  f.sigma = sigma;
  f.values.assign(grid.size(), 0.0);
  for (std::size_t a = 0; a < dec.size(); ++a) {
    const double pw = dec.photon_weight(a);
    if (pw == 0.0) continue;
    for (std::size_t i = 0; i < grid.size(); ++i) f.values[i] += pw * lorentzian(grid[i] - dec.energies()[a], sigma);
  }
  return f;
}

SpectralFunction spectral_function_largeN(const DisorderModel& model, double g, const std::vector<double>& grid,
                                          double sigma) {
  if (grid.empty()) throw ParameterError("spectral_function_largeN: empty grid");
  if (!(sigma >= 0.0)) throw ParameterError("spectral_function_largeN: sigma must be >= 0");
  SpectralFunction f;
  f.grid = grid;
  f.sigma = sigma;
  const auto pw = photon_weight_polaritons(model, g);
  if (pw.lower_exists) {
    f.delta_positions.push_back(pw.energy_lower);
    f.delta_weights.push_back(pw.lower);
  }
  if (pw.upper_exists) {
    f.delta_positions.push_back(pw.energy_upper);
    f.delta_weights.push_back(pw.upper);
  }
  f.values.resize(grid.size());
  if (sigma == 0.0) {
    for (std::size_t i = 0; i < grid.size(); ++i) f.values[i] = spectral_continuum(model, g, grid[i]);
    return f;
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = grid[i];
    const auto cont = [&](double x) { return spectral_continuum(model, g, x) * lorentzian(w - x, sigma); };
    double v = 0.0;
    // split at w so the Lorentzian peak sits on a panel boundary
    if (model.inside(w)) {
      v = num::integrate(cont, model.lo(), w, 1e-10).value + num::integrate(cont, w, model.hi(), 1e-10).value;
    } else {
      v = num::integrate(cont, model.lo(), model.hi(), 1e-10).value;
    }
    for (std::size_t k = 0; k < f.delta_weights.size(); ++k) v += f.delta_weights[k] * lorentzian(w - f.delta_positions[k], sigma);
    f.values[i] = v;
  }
  return f;
}

SumRule sum_rule_finiteN(const EigenDecomposition& dec, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("sum_rule_finiteN: sigma must be positive");
  // x = c + L tan(theta): Lorentzian tails become bounded integrands
  const double lo = dec.energies().front(), hi = dec.energies().back();
  const double c = 0.5 * (lo + hi);
  const double L = std::max(0.5 * (hi - lo), sigma);
  std::vector<double> nodes, weights;
  num::gauss_legendre_panels(-0.5 * pi, 0.5 * pi, 4000, 20, nodes, weights);
  num::Compensated<double> acc;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double t = std::tan(nodes[i]);
    const double x = c + L * t;
    const double jac = L * (1.0 + t * t);
    double a = 0.0;
    for (std::size_t k = 0; k < dec.size(); ++k) {
      const double pw = dec.photon_weight(k);
      if (pw != 0.0) a += pw * lorentzian(x - dec.energies()[k], sigma);
    }
    acc.add(weights[i] * jac * a);
  }
  SumRule r;
  r.continuum = acc.value();
  r.total = r.continuum;
  return r;
}

SumRule sum_rule_largeN(const DisorderModel& model, double g) {
  const auto f = [&](double x) { return spectral_continuum(model, g, x); };
  const double mid = 0.5 * (model.lo() + model.hi());
  SumRule r;
  r.continuum = num::integrate(f, model.lo(), mid, 1e-13, 25).value + num::integrate(f, mid, model.hi(), 1e-13, 25).value;
  const auto pw = photon_weight_polaritons(model, g);
  r.deltas = pw.lower + pw.upper;
  r.total = r.continuum + r.deltas;
  return r;
}

// ---- covariance ----

namespace {

// Per-energy ingredients of the covariance kernel.
struct CovNode {
  double w;
  double rho;
  cplx pi_p, pi_pd;  // Pi(w + i0) and derivative
  cplx d, q, qd;     // D+, Q = D+^2, Q'
};

CovNode cov_node(const DisorderModel& model, double g, double w) {
  const auto b = boundary(model, w);
  CovNode n;
  n.w = w;
  n.rho = b.rho;
  n.pi_p = b.pi_plus();
  n.pi_pd = b.pi_plus_d();
  n.d = d_plus(g, w, b);
  n.q = n.d * n.d;
  n.qd = 2.0 * n.d * d_plus_deriv(g, b, n.d);
  return n;
}

double cov_smooth(double g, std::size_t n, const CovNode& a, const CovNode& b) {
  const double pref = -std::pow(g, 4) / (2.0 * static_cast<double>(n));
  if (a.w == b.w) {
    // coincidence: difference quotients become derivatives
    const cplx same = a.q * a.q * (-a.pi_pd / pi - a.pi_p * a.pi_p);
    const double dre_h = (-2.0 * cplx(0.0, 1.0) * a.rho * a.qd * std::conj(a.q)).real() + std::norm(a.q) * a.pi_pd.real();
    const double opp = -dre_h / pi - std::norm(a.q) * std::norm(a.pi_p);
    return pref * (same.real() - opp);
  }
  const double dw = a.w - b.w;
  const cplx cpp = -(a.pi_p - b.pi_p) / (pi * dw) - a.pi_p * b.pi_p;
  const cplx cpm = -(a.pi_p - std::conj(b.pi_p)) / (pi * dw) - a.pi_p * std::conj(b.pi_p);
  return pref * (a.q * b.q * cpp - a.q * std::conj(b.q) * cpm).real();
}

}  // namespace

CovarianceKernel spectral_covariance_largeN(const DisorderModel& model, double g, double w1, double w2, std::size_t n) {
  if (!model.inside(w1) || !model.inside(w2)) throw DomainError("spectral_covariance_largeN: energies must be interior");
  if (n == 0) throw ParameterError("spectral_covariance_largeN: N must be >= 1");
  if (!(g > 0.0)) throw ParameterError("spectral_covariance_largeN: g must be positive");
  const auto a = cov_node(model, g, w1);
  const auto b = w1 == w2 ? a : cov_node(model, g, w2);
  CovarianceKernel k;
  k.smooth = cov_smooth(g, n, a, b);
  if (w1 == w2) k.delta_weight = std::pow(g, 4) * a.rho * std::norm(a.q) / static_cast<double>(n);
  return k;
}

Eigen::MatrixXd smoothed_covariance_largeN(const DisorderModel& model, double g, std::size_t n,
                                           const std::vector<double>& grid, double sigma) {
  if (grid.empty()) throw ParameterError("smoothed_covariance_largeN: empty grid");
  if (!(sigma > 0.0)) throw ParameterError("smoothed_covariance_largeN: sigma must be positive");
  if (!(g > 0.0)) throw ParameterError("smoothed_covariance_largeN: g must be positive");
  // nodes clustered toward the edges: w = lo + W (1 - cos(pi u)) / 2
  std::vector<double> u, wu;
  num::gauss_legendre_panels(0.0, 1.0, 300, 10, u, wu);
  const std::size_t m = u.size();
  std::vector<CovNode> nodes;
  nodes.reserve(m);
  Eigen::VectorXd wt(static_cast<Eigen::Index>(m));
  const double W = model.width();
  for (std::size_t i = 0; i < m; ++i) {
    const double w = model.lo() + 0.5 * W * (1.0 - std::cos(pi * u[i]));
    nodes.push_back(cov_node(model, g, w));
    wt[static_cast<Eigen::Index>(i)] = wu[i] * 0.5 * W * pi * std::sin(pi * u[i]);
  }
  const auto mi = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd C(mi, mi);
  for (Eigen::Index i = 0; i < mi; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = cov_smooth(g, n, nodes[static_cast<std::size_t>(i)], nodes[static_cast<std::size_t>(j)]);
      C(i, j) = v;
      C(j, i) = v;
    }
  const auto gi = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd L(gi, mi);
  for (Eigen::Index r = 0; r < gi; ++r)
    for (Eigen::Index i = 0; i < mi; ++i)
      L(r, i) = lorentzian(grid[static_cast<std::size_t>(r)] - nodes[static_cast<std::size_t>(i)].w, sigma) * wt[i];
  Eigen::MatrixXd out = L * C * L.transpose();
  // delta part: int L(x1 - w) L(x2 - w) delta_weight(w) dw
  Eigen::VectorXd dw(mi);
  for (Eigen::Index i = 0; i < mi; ++i) {
    const auto& nd = nodes[static_cast<std::size_t>(i)];
    dw[i] = std::pow(g, 4) * nd.rho * std::norm(nd.q) / static_cast<double>(n) / wt[i];
  }
  out += L * dw.asDiagonal() * L.transpose();
  return out;
}

std::string covariance_csv(const std::vector<double>& grid, const Eigen::MatrixXd& cov) {
  std::ostringstream os;
  os << "w";
  for (double w : grid) os << ',' << num::fmt17(w);
  os << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << num::fmt17(grid[i]);
    for (std::size_t j = 0; j < grid.size(); ++j)
      os << ',' << num::fmt17(cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    os << '\n';
  }
  return os.str();
}

// ---- photon weights ----

double PhotonWeights::total() const {
  num::Compensated<double> s;
  for (double w : weights) s.add(w);
  return s.value();
}

PhotonWeights photon_weights(const EigenDecomposition& dec) {
  PhotonWeights p;
  p.energies = dec.energies();
  p.weights.resize(dec.size());
  p.classes.assign(dec.size(), StateClass::Dark);
  p.classes.front() = StateClass::Polariton;
  p.classes.back() = StateClass::Polariton;
  for (std::size_t a = 0; a < dec.size(); ++a) p.weights[a] = dec.photon_weight(a);
  return p;
}

PolaritonWeights photon_weight_polaritons(const DisorderModel& model, double g) {
  if (!(g > 0.0)) throw ParameterError("photon_weight_polaritons: g must be positive");
  PolaritonWeights r;
  if (model.kind() == DisorderKind::Box) {
    const auto p = box_upper_polariton(model.width(), g);
    r.energy_upper = p.energy;
    r.energy_lower = -p.energy;
    r.upper = r.lower = p.photon_weight;
    return r;
  }
  const auto e = polariton_energies_largeN(model, g);
  r.energy_lower = e.lower;
  r.energy_upper = e.upper;
  r.lower_exists = e.lower_exists;
  r.upper_exists = e.upper_exists;
  r.lower = e.lower_exists ? 1.0 / (1.0 - pi * g * g * model.hilbert_deriv(e.lower)) : 0.0;
  r.upper = e.upper_exists ? 1.0 / (1.0 - pi * g * g * model.hilbert_deriv(e.upper)) : 0.0;
  return r;
}

double photon_weight_dark_analytic(const DisorderModel& model, double g, std::size_t n, double eps) {
  if (!model.inside(eps)) throw DomainError("photon_weight_dark_analytic: energy outside the open support");
  if (!(g > 0.0)) throw ParameterError("photon_weight_dark_analytic: g must be positive");
  if (n == 0) throw ParameterError("photon_weight_dark_analytic: N must be >= 1");
  const double rho = model.density(eps);
  const double x = model.hilbert(eps) - eps / (pi * g * g);
  return 1.0 / static_cast<double>(n) / (pi * pi * g * g) / (rho * rho + x * x);
}

}  // namespace arrowhead
