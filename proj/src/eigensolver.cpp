#include "arrowhead/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "arrowhead/errors.hpp"
#include "arrowhead/numerics.hpp"

namespace arrowhead {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
// Bare energies closer than this (relative to the operator scale) are one pole.
constexpr double kPinThreshold = 1e-13;

}  // namespace

ArrowheadOperator::ArrowheadOperator(BareEnergies bare, double g, std::map<std::size_t, cplx> diag_shift)
    : bare_(std::move(bare)), g_(g), shift_(std::move(diag_shift)) {
  if (bare_.values.empty()) throw ParameterError("ArrowheadOperator: need at least one bare energy");
  if (!(g_ >= 0.0) || !std::isfinite(g_)) throw ParameterError("ArrowheadOperator: g must be finite and >= 0");
  for (double w : bare_.values)
    if (!std::isfinite(w)) throw ParameterError("ArrowheadOperator: non-finite bare energy");
  for (const auto& [site, s] : shift_) {
    if (site >= bare_.values.size()) throw ParameterError("ArrowheadOperator: shift on nonexistent site");
    if (s.imag() > 0.0) throw ParameterError("ArrowheadOperator: shifts must have Im <= 0 (decay only)");
  }
  // drop exact-zero shifts so that hermitian() reflects the matrix
  std::erase_if(shift_, [](const auto& kv) { return kv.second == cplx{}; });
}

double ArrowheadOperator::coupling() const noexcept {
  return g_ / std::sqrt(static_cast<double>(bare_.values.size()));
}

double ArrowheadOperator::scale() const noexcept {
  double s = g_;
  for (double w : bare_.values) s = std::max(s, std::abs(w));
  return s > 0.0 ? s : 1.0;
}

std::vector<cplx> ArrowheadOperator::shifted_diagonal() const {
  std::vector<cplx> d(bare_.values.begin(), bare_.values.end());
  for (const auto& [site, s] : shift_) d[site] += s;
  return d;
}

Eigen::MatrixXd ArrowheadOperator::dense_real() const {
  if (!hermitian()) throw ParameterError("dense_real: operator has complex shifts");
  const auto n = static_cast<Eigen::Index>(n_sites());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n + 1, n + 1);
  const double c = coupling();
  for (Eigen::Index j = 0; j < n; ++j) {
    h(j, j) = bare_.values[static_cast<std::size_t>(j)];
    h(j, n) = c;
    h(n, j) = c;
  }
  return h;
}

Eigen::MatrixXcd ArrowheadOperator::dense() const {
  const auto n = static_cast<Eigen::Index>(n_sites());
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n + 1, n + 1);
  const double c = coupling();
  const auto d = shifted_diagonal();
  for (Eigen::Index j = 0; j < n; ++j) {
    h(j, j) = d[static_cast<std::size_t>(j)];
    h(j, n) = c;
    h(n, j) = c;
  }
  return h;
}

double secular_residual(const ArrowheadOperator& op, double eps) {
  const double w2 = op.g() * op.g() / static_cast<double>(op.n_sites());
  num::Compensated<double> s;
  for (double w : op.bare().values) {
    const double d = eps - w;
    if (d == 0.0 || std::abs(d) <= kEps * std::max(std::abs(eps), std::abs(w)))
      throw PoleError("secular_residual: energy coincides with bare energy " + num::fmt17(w));
    s.add(w2 / d);
  }
  return eps - s.value();
}

namespace {

struct Poles {
  std::vector<double> p;     // pole positions
  std::vector<double> w;     // weights m_k g^2 / N
  std::vector<std::size_t> first, mult;
  std::vector<std::size_t> site_pole;
};

Poles build_poles(const std::vector<double>& om, double g, double thr) {
  Poles P;
  const double w1 = g * g / static_cast<double>(om.size());
  P.site_pole.resize(om.size());
  std::size_t j = 0;
  while (j < om.size()) {
    std::size_t k = j + 1;
    while (k < om.size() && om[k] - om[j] <= thr) ++k;
    P.site_pole.resize(om.size());
    for (std::size_t i = j; i < k; ++i) P.site_pole[i] = P.p.size();
    P.p.push_back(om[j]);
    P.first.push_back(j);
    P.mult.push_back(k - j);
    P.w.push_back(w1 * static_cast<double>(k - j));
    j = k;
  }
  return P;
}

struct Eval {
  double f, F, dF;
};

// Secular function about anchor pole k at offset tau:
//   f(tau) = p_k + tau - w_k/tau - sum_{j!=k} w_j/(p_k - p_j + tau)
// and its regularized form F = tau f, which is smooth near the anchor.
Eval evaluate(const Poles& P, std::size_t k, double tau) {
  num::Compensated<double> s1;
  double s2 = 0.0;
  const double pk = P.p[k];
  const std::size_t m = P.p.size();
  for (std::size_t j = 0; j < m; ++j) {
    if (j == k) continue;
    const double d = (pk - P.p[j]) + tau;
    const double t = P.w[j] / d;
    s1.add(t);
    s2 += t / d;
  }
  const double S1 = s1.value();
  Eval e;
  e.F = tau * (pk + tau) - P.w[k] - tau * S1;
  e.dF = pk + 2.0 * tau - S1 + tau * s2;
  e.f = tau != 0.0 ? (pk + tau) - P.w[k] / tau - S1 : (P.w[k] > 0 ? -tau : 0.0);
  return e;
}

double sign_f(const Poles& P, std::size_t k, double tau) { return evaluate(P, k, tau).f; }

// Root of f in the tau-bracket (lo, hi) about anchor k, with f(lo) < 0 < f(hi).
double solve_bracket(const Poles& P, std::size_t k, double lo, double hi) {
  const double width0 = hi - lo;
  while (hi - lo > 1e-3 * width0) {
    const double mid = 0.5 * (lo + hi);
    (sign_f(P, k, mid) < 0.0 ? lo : hi) = mid;
  }
  double tau = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const Eval e = evaluate(P, k, tau);
    if (e.F == 0.0) return tau;
    (e.f < 0.0 ? lo : hi) = tau;
    double next = tau - e.F / e.dF;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - tau);
    tau = next;
    if (step <= 4.0 * kEps * std::abs(tau) || step <= std::numeric_limits<double>::min()) break;
    if (hi - lo <= 4.0 * kEps * std::max(std::abs(lo), std::abs(hi))) break;
  }
  return tau;
}

struct AnchoredRoot {
  std::size_t k;
  double tau;
};

AnchoredRoot interior_root(const Poles& P, std::size_t k) {
  const double gap = P.p[k + 1] - P.p[k];
  const double half = 0.5 * gap;
  if (sign_f(P, k, half) >= 0.0) return {k, solve_bracket(P, k, 0.0, half)};
  return {k + 1, solve_bracket(P, k + 1, -(gap - half), 0.0)};
}

AnchoredRoot upper_root(const Poles& P, double g) {
  const std::size_t k = P.p.size() - 1;
  const double pk = P.p[k];
  double span = 0.5 * pk + std::sqrt(0.25 * pk * pk + g * g) - pk;
  span = std::max(span * (1.0 + 1e-12), std::numeric_limits<double>::min());
  for (int it = 0; it < 2000 && sign_f(P, k, span) <= 0.0; ++it) span *= 2.0;
  return {k, solve_bracket(P, k, 0.0, span)};
}

AnchoredRoot lower_root(const Poles& P, double g) {
  const double p0 = P.p[0];
  double span = p0 - (0.5 * p0 - std::sqrt(0.25 * p0 * p0 + g * g));
  span = std::max(span * (1.0 + 1e-12), std::numeric_limits<double>::min());
  for (int it = 0; it < 2000 && sign_f(P, 0, -span) >= 0.0; ++it) span *= 2.0;
  return {0, solve_bracket(P, 0, -span, 0.0)};
}

// 1/N_a^2 - 1 = sum_j w_j/(eps - p_j)^2, written to avoid overflow near the anchor.
double norm_of(const Poles& P, std::size_t k, double tau) {
  double rest = 0.0;
  for (std::size_t j = 0; j < P.p.size(); ++j) {
    if (j == k) continue;
    const double d = (P.p[k] - P.p[j]) + tau;
    rest += P.w[j] / (d * d);
  }
  return std::abs(tau) / std::sqrt(tau * tau * (1.0 + rest) + P.w[k]);
}

}  // namespace

EigenDecomposition solve_spectrum(const ArrowheadOperator& op) {
  if (!op.hermitian()) throw ParameterError("solve_spectrum: operator has complex shifts");
  const auto& om = op.bare().values;
  if (!op.bare().sorted || !std::is_sorted(om.begin(), om.end()))
    throw ParameterError("solve_spectrum: bare energies must be sorted");
  const std::size_t n = om.size();
  const double g = op.g();
  const double scale = op.scale();

  EigenDecomposition dec;
  dec.bare_ = std::make_shared<const BareEnergies>(op.bare());
  dec.g_ = g;
  dec.energies_.reserve(n + 1);
  dec.norms_.reserve(n + 1);
  dec.states_.reserve(n + 1);

  if (g == 0.0) {
    // decoupled: bare energies plus the cavity at 0
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j) all.emplace_back(om[j], j);
    all.emplace_back(0.0, n);
    std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.first < b.first; });
    for (auto& [e, idx] : all) {
      dec.energies_.push_back(e);
      dec.norms_.push_back(idx == n ? 1.0 : 0.0);
      EigenDecomposition::State s;
      s.kind = EigenDecomposition::StateKind::Unit;
      s.anchor = idx;
      dec.states_.push_back(s);
    }
    dec.poles_ = om;
    dec.site_pole_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      dec.site_pole_[j] = j;
      dec.pole_first_site_.push_back(j);
      dec.pole_mult_.push_back(1);
    }
    dec.certified_ = true;
    return dec;
  }

  const Poles P = build_poles(om, g, kPinThreshold * scale);
  const std::size_t M = P.p.size();
  dec.poles_ = P.p;
  dec.pole_first_site_ = P.first;
  dec.pole_mult_ = P.mult;
  dec.site_pole_ = P.site_pole;

  const auto push_root = [&](AnchoredRoot r) {
    EigenDecomposition::State s;
    s.kind = EigenDecomposition::StateKind::Secular;
    s.anchor = r.k;
    s.tau = r.tau;
    dec.energies_.push_back(P.p[r.k] + r.tau);
    dec.norms_.push_back(norm_of(P, r.k, r.tau));
    dec.states_.push_back(s);
  };

  push_root(lower_root(P, g));
  for (std::size_t k = 0; k < M; ++k) {
    for (std::size_t h = 1; h < P.mult[k]; ++h) {
      EigenDecomposition::State s;
      s.kind = EigenDecomposition::StateKind::Pinned;
      s.anchor = k;
      s.helmert = h;
      dec.energies_.push_back(P.p[k]);
      dec.norms_.push_back(0.0);
      dec.states_.push_back(s);
      ++dec.pinned_count_;
    }
    push_root(k + 1 < M ? interior_root(P, k) : upper_root(P, g));
  }

  // Interlacing certificate: non-strict in floating point, strict in
  // the anchored representation (each root lies on the correct side of its pole).
  bool ok = dec.energies_.size() == n + 1;
  const double slack = dec.pinned_count_ > 0 ? kPinThreshold * scale : 0.0;
  for (std::size_t a = 0; ok && a < n; ++a)
    ok = dec.energies_[a] <= om[a] + slack && om[a] <= dec.energies_[a + 1] + slack;
  for (std::size_t a = 0; ok && a + 1 < dec.energies_.size(); ++a)
    ok = dec.energies_[a] <= dec.energies_[a + 1];
  std::size_t gap = 0;
  for (std::size_t a = 0; ok && a < dec.states_.size(); ++a) {
    const auto& s = dec.states_[a];
    if (s.kind != EigenDecomposition::StateKind::Secular) continue;
    // the gap-th secular root lies between pole gap-1 and pole gap
    if (gap == 0)
      ok = s.anchor == 0 && s.tau < 0.0;
    else if (gap == M)
      ok = s.anchor == M - 1 && s.tau > 0.0;
    else
      ok = (s.anchor == gap - 1 && s.tau > 0.0) || (s.anchor == gap && s.tau < 0.0);
    ++gap;
  }
  if (!ok) throw std::runtime_error("solve_spectrum: interlacing certificate failed");
  dec.certified_ = true;
  return dec;
}

ExteriorRoots solve_exterior(const ArrowheadOperator& op) {
  if (!op.hermitian()) throw ParameterError("solve_exterior: operator has complex shifts");
  std::vector<double> om = op.bare().values;
  if (!op.bare().sorted) std::sort(om.begin(), om.end());
  ExteriorRoots r;
  if (op.g() == 0.0) {
    r.lower = std::min(0.0, om.front());
    r.upper = std::max(0.0, om.back());
    r.pw_lower = om.front() > 0.0 ? 1.0 : 0.0;
    r.pw_upper = om.back() < 0.0 ? 1.0 : 0.0;
    return r;
  }
  const Poles P = build_poles(om, op.g(), kPinThreshold * op.scale());
  const auto lo = lower_root(P, op.g());
  const auto hi = upper_root(P, op.g());
  r.lower = P.p[lo.k] + lo.tau;
  r.upper = P.p[hi.k] + hi.tau;
  const double nl = norm_of(P, lo.k, lo.tau), nh = norm_of(P, hi.k, hi.tau);
  r.pw_lower = nl * nl;
  r.pw_upper = nh * nh;
  return r;
}

double EigenDecomposition::diff(std::size_t a, std::size_t j) const {
  const State& s = states_.at(a);
  if (j >= n_sites()) throw ParameterError("diff: site index out of range");
  if (s.kind == StateKind::Secular) return (poles_[s.anchor] - poles_[site_pole_[j]]) + s.tau;
  return energies_[a] - bare_->values[j];
}

double EigenDecomposition::root_residual(std::size_t a) const {
  const State& s = states_.at(a);
  if (s.kind != StateKind::Secular) return 0.0;
  const double w1 = g_ * g_ / static_cast<double>(n_sites());
  num::Compensated<double> sum;
  for (std::size_t k = 0; k < poles_.size(); ++k) {
    const double d = (poles_[s.anchor] - poles_[k]) + s.tau;
    sum.add(w1 * static_cast<double>(pole_mult_[k]) / d);
  }
  return energies_[a] - sum.value();
}

std::size_t EigenDecomposition::anchor_site(std::size_t a) const {
  const State& s = states_.at(a);
  if (s.kind == StateKind::Unit) return s.anchor;
  return pole_first_site_[s.anchor];
}

double EigenDecomposition::offset(std::size_t a) const {
  const State& s = states_.at(a);
  return s.kind == StateKind::Secular ? s.tau : 0.0;
}

std::vector<double> EigenDecomposition::eigenvector(std::size_t a) const {
  const State& s = states_.at(a);
  const std::size_t n = n_sites();
  std::vector<double> v(n + 1, 0.0);
  switch (s.kind) {
    case StateKind::Pinned:
      throw DegenerateEigenvectorError(
          "eigenvector: state is pinned at a repeated bare energy; use null_space_vector");
    case StateKind::Unit:
      v[s.anchor] = 1.0;
      return v;
    case StateKind::Secular: break;
  }
  const double c = g_ / std::sqrt(static_cast<double>(n));
  const double nrm = norms_[a];
  for (std::size_t j = 0; j < n; ++j) v[j] = c * nrm / diff(a, j);
  v[n] = nrm;
  return v;
}

std::vector<double> EigenDecomposition::null_space_vector(std::size_t a) const {
  const State& s = states_.at(a);
  if (s.kind != StateKind::Pinned) throw ParameterError("null_space_vector: state is not pinned");
  std::vector<double> v(n_sites() + 1, 0.0);
  const std::size_t first = pole_first_site_[s.anchor];
  const double h = static_cast<double>(s.helmert);
  const double c = 1.0 / std::sqrt(h * (h + 1.0));
  for (std::size_t i = 0; i < s.helmert; ++i) v[first + i] = c;
  v[first + s.helmert] = -h * c;
  return v;
}

std::vector<double> EigenDecomposition::state(std::size_t a) const {
  return pinned(a) ? null_space_vector(a) : eigenvector(a);
}

double EigenDecomposition::amplitude(std::size_t a, std::size_t j) const {
  const State& s = states_.at(a);
  const std::size_t n = n_sites();
  if (j > n) throw ParameterError("amplitude: component index out of range");
  if (s.kind == StateKind::Secular) {
    if (j == n) return norms_[a] * norms_[a];
    const double x = norms_[a] / diff(a, j);
    return g_ * g_ / static_cast<double>(n) * x * x;
  }
  const auto v = state(a);
  return v[j] * v[j];
}

double EigenDecomposition::component(std::size_t a, std::size_t j) const {
  const State& s = states_.at(a);
  const std::size_t n = n_sites();
  if (j > n) throw ParameterError("component: index out of range");
  switch (s.kind) {
    case StateKind::Secular:
      if (j == n) return norms_[a];
      return g_ / std::sqrt(static_cast<double>(n)) * norms_[a] / diff(a, j);
    case StateKind::Unit: return j == s.anchor ? 1.0 : 0.0;
    case StateKind::Pinned: {
      const std::size_t first = pole_first_site_[s.anchor];
      if (j < first || j > first + s.helmert) return 0.0;
      const double h = static_cast<double>(s.helmert);
      const double c = 1.0 / std::sqrt(h * (h + 1.0));
      return j == first + s.helmert ? -h * c : c;
    }
  }
  return 0.0;
}

double EigenDecomposition::photon_weight(std::size_t a) const { return norms_.at(a) * norms_.at(a); }

std::string spectrum_csv(const EigenDecomposition& dec) {
  std::ostringstream os;
  os << "a,eps,norm,residual\n";
  for (std::size_t a = 0; a < dec.size(); ++a)
    os << a << ',' << num::fmt17(dec.energies()[a]) << ',' << num::fmt17(dec.norms()[a]) << ','
       << num::fmt17(dec.root_residual(a)) << '\n';
  return os.str();
}

}  // namespace arrowhead
