#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "arrowhead/eigensolver.hpp"
#include "arrowhead/errors.hpp"
#include "arrowhead/numerics.hpp"

namespace arrowhead {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kPinThreshold = 1e-13;
constexpr std::size_t kNpos = static_cast<std::size_t>(-1);

// w / d without the overflow guards of std::complex division (d is never tiny
// relative to the operator scale here, except at an exact pole).
inline cplx inv(cplx d) {
  const double n = std::norm(d);
  return {d.real() / n, -d.imag() / n};
}

struct Reduced {
  std::vector<cplx> base;    // unshifted pole positions (sorted real bare energies)
  std::vector<cplx> shift;   // shift of each pole
  std::vector<double> w;     // m_k g^2 / N
  std::vector<std::size_t> first, mult;  // sorted-site ranges
};

struct Root {
  std::size_t k;
  cplx tau;
};

struct NewtonResult {
  Root root;
  double correction;
  bool ok;
};

// Newton on F(tau) = tau * f(q_k + tau) with re-anchoring to the nearest pole.
NewtonResult newton(const std::vector<cplx>& q, const std::vector<double>& w, Root r, double scale,
                    int max_iter = 60) {
  const std::size_t m = q.size();
  double prev = std::numeric_limits<double>::infinity();
  double last = prev;
  for (int it = 0; it < max_iter; ++it) {
    cplx s1{}, s2{};
    std::size_t jmin = kNpos;
    double dmin = std::norm(r.tau);
    for (std::size_t j = 0; j < m; ++j) {
      if (j == r.k) continue;
      const cplx d = (q[r.k] - q[j]) + r.tau;
      const double nd = std::norm(d);
      if (nd < dmin) {
        dmin = nd;
        jmin = j;
      }
      const cplx id = inv(d);
      const cplx t = w[j] * id;
      s1 += t;
      s2 += t * id;
    }
    if (jmin != kNpos) {
      r.tau = (q[r.k] - q[jmin]) + r.tau;
      r.k = jmin;
      continue;
    }
    const cplx F = r.tau * (q[r.k] + r.tau) - w[r.k] - r.tau * s1;
    const cplx dF = q[r.k] + 2.0 * r.tau - s1 + r.tau * s2;
    const cplx step = F / dF;
    if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) return {r, last, false};
    r.tau -= step;
    last = std::abs(step);
    if (last <= 4.0 * kEps * std::abs(r.tau)) return {r, last, true};
    if (it > 3 && last >= prev && last <= 1e-12 * scale) return {r, last, true};
    prev = last;
  }
  return {r, last, last <= 1e-10 * scale};
}

// Any two roots closer than tol? Roots are compared after sorting by real part.
bool has_collision(const std::vector<cplx>& z, double tol) {
  std::vector<std::size_t> idx(z.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return z[a].real() < z[b].real(); });
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t l = i + 1; l < idx.size() && z[idx[l]].real() - z[idx[i]].real() <= tol; ++l)
      if (std::abs(z[idx[l]] - z[idx[i]]) <= tol) return true;
  return false;
}

std::vector<cplx> positions(const std::vector<cplx>& q, const std::vector<Root>& roots) {
  std::vector<cplx> z(roots.size());
  for (std::size_t a = 0; a < roots.size(); ++a) z[a] = q[roots[a].k] + roots[a].tau;
  return z;
}

// Continuation from the real roots; returns false on non-convergence or collision.
bool continuation(const Reduced& R, std::vector<Root>& roots, std::vector<double>& corr, int steps,
                  double scale) {
  std::vector<cplx> q(R.base.size());
  for (int s = 1; s <= steps; ++s) {
    const double lambda = std::exp2(static_cast<double>(s - steps) * 8.0 / steps);
    for (std::size_t k = 0; k < q.size(); ++k) q[k] = R.base[k] + lambda * R.shift[k];
    for (std::size_t a = 0; a < roots.size(); ++a) {
      const auto res = newton(q, R.w, roots[a], scale);
      if (!res.ok) return false;
      roots[a] = res.root;
      corr[a] = res.correction;
    }
    if (has_collision(positions(q, roots), 1e-11 * scale)) return false;
  }
  return true;
}

// Simultaneous Aberth-Ehrlich iteration on z prod(z - q_k) f(z).
bool aberth(const std::vector<cplx>& q, const std::vector<double>& w, std::vector<cplx>& z, double scale) {
  const std::size_t n = z.size();
  for (std::size_t a = 0; a < n; ++a)
    z[a] += 1e-7 * scale * std::polar(1.0, 2.399963 * static_cast<double>(a));
  for (int it = 0; it < 500; ++it) {
    double worst = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      cplx s{}, ds{1.0, 0.0}, logd{};
      for (std::size_t k = 0; k < q.size(); ++k) {
        const cplx id = inv(z[a] - q[k]);
        s += w[k] * id;
        ds += w[k] * id * id;
        logd += id;
      }
      const cplx f = z[a] - s;
      const cplx r = 1.0 / (ds / f + logd);
      cplx rep{};
      for (std::size_t b = 0; b < n; ++b)
        if (b != a) rep += inv(z[a] - z[b]);
      const cplx upd = r / (1.0 - r * rep);
      if (!std::isfinite(upd.real()) || !std::isfinite(upd.imag())) return false;
      z[a] -= upd;
      worst = std::max(worst, std::abs(upd) / std::max(std::abs(z[a]), 1e-300 + kEps * scale));
    }
    if (worst <= 8.0 * kEps) return true;
  }
  return false;
}

std::size_t nearest_pole(const std::vector<cplx>& q, cplx z) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < q.size(); ++k)
    if (std::norm(z - q[k]) < std::norm(z - q[best])) best = k;
  return best;
}

}  // namespace

cplx ComplexSpectrum::diff(std::size_t a, std::size_t j) const {
  if (a >= eigenvalues.size() || j >= diag_.size()) throw ParameterError("ComplexSpectrum::diff: index out of range");
  if (anchor_[a] == kNpos) return eigenvalues[a] - diag_[j];
  return (diag_[anchor_[a]] - diag_[j]) + tau_[a];
}

cplx ComplexSpectrum::diff_eig(std::size_t a, std::size_t b) const {
  if (a >= eigenvalues.size() || b >= eigenvalues.size())
    throw ParameterError("ComplexSpectrum::diff_eig: index out of range");
  if (anchor_[a] == kNpos || anchor_[b] == kNpos) return eigenvalues[a] - eigenvalues[b];
  return (diag_[anchor_[a]] - diag_[anchor_[b]]) + (tau_[a] - tau_[b]);
}

ComplexSpectrum solve_complex_spectrum(const ArrowheadOperator& op) {
  const auto& om = op.bare().values;
  const std::size_t n = om.size();
  const double g = op.g();
  const double scale = op.scale();

  ComplexSpectrum cs;
  cs.diag_ = op.shifted_diagonal();

  // work in sorted order; perm[r] is the original index of the r-th smallest
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](auto a, auto b) { return om[a] < om[b]; });

  const auto finish = [&]() {
    cs.residual_norms.resize(cs.eigenvalues.size(), 0.0);
    cs.near_degenerate = has_collision(cs.eigenvalues, 1e-12 * scale);
    return cs;
  };

  if (g == 0.0) {
    for (std::size_t r = 0; r < n; ++r) {
      cs.eigenvalues.push_back(cs.diag_[perm[r]]);
      cs.anchor_.push_back(perm[r]);
      cs.tau_.push_back(0.0);
    }
    cs.eigenvalues.push_back(0.0);
    cs.anchor_.push_back(kNpos);
    cs.tau_.push_back(0.0);
    return finish();
  }

  BareEnergies sb;
  sb.values.resize(n);
  for (std::size_t r = 0; r < n; ++r) sb.values[r] = om[perm[r]];
  sb.sorted = true;
  const EigenDecomposition dec = solve_spectrum(ArrowheadOperator(sb, g));

  // reduced pole set, clustered exactly like the real solver
  Reduced R;
  std::vector<std::size_t> site_pole(n);
  const double thr = kPinThreshold * scale;
  bool shifted_cluster = false;
  for (std::size_t j = 0; j < n;) {
    std::size_t k = j + 1;
    while (k < n && sb.values[k] - sb.values[j] <= thr) ++k;
    cplx sh{};
    for (std::size_t i = j; i < k; ++i) {
      site_pole[i] = R.base.size();
      if (auto it = op.diag_shift().find(perm[i]); it != op.diag_shift().end()) {
        if (k - j > 1) shifted_cluster = true;
        sh = it->second;
      }
    }
    R.base.push_back(sb.values[j]);
    R.shift.push_back(sh);
    R.first.push_back(j);
    R.mult.push_back(k - j);
    R.w.push_back(g * g / static_cast<double>(n) * static_cast<double>(k - j));
    j = k;
  }

  std::vector<Root> roots;
  std::vector<std::size_t> pinned_site;  // sorted-site anchors of pinned roots
  for (std::size_t a = 0; a < dec.size(); ++a) {
    if (dec.pinned(a))
      pinned_site.push_back(dec.anchor_site(a));
    else
      roots.push_back({site_pole[dec.anchor_site(a)], cplx(dec.offset(a), 0.0)});
  }

  std::vector<cplx> q(R.base.size());
  for (std::size_t k = 0; k < q.size(); ++k) q[k] = R.base[k] + R.shift[k];
  std::vector<double> corr(roots.size(), 0.0);

  bool ok = !shifted_cluster;
  if (ok && !op.hermitian()) {
    auto trial = roots;
    ok = continuation(R, trial, corr, 8, scale);
    if (!ok) {
      trial = roots;
      ok = continuation(R, trial, corr, 32, scale);
    }
    if (!ok) {
      // deflated simultaneous iteration from wherever the ramp got to
      auto z = positions(q, trial);
      ok = aberth(q, R.w, z, scale);
      for (std::size_t a = 0; ok && a < z.size(); ++a) {
        const std::size_t k = nearest_pole(q, z[a]);
        const auto res = newton(q, R.w, {k, z[a] - q[k]}, scale);
        ok = res.ok;
        trial[a] = res.root;
        corr[a] = res.correction;
      }
      ok = ok && !has_collision(positions(q, trial), 1e-11 * scale);
    }
    roots = trial;
  }

  if (!ok) {
    cs.used_dense_fallback = true;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(op.dense(), false);
    if (es.info() != Eigen::Success) throw std::runtime_error("solve_complex_spectrum: dense fallback failed");
    std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(ev.begin(), ev.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
    for (cplx z : ev) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < n; ++j)
        if (std::norm(z - cs.diag_[j]) < std::norm(z - cs.diag_[best])) best = j;
      cs.eigenvalues.push_back(z);
      cs.anchor_.push_back(best);
      cs.tau_.push_back(z - cs.diag_[best]);
      cs.residual_norms.push_back(0.0);
    }
    return finish();
  }

  // assemble: secular roots in continuation order, pinned roots at their poles
  std::size_t ri = 0, pi = 0;
  for (std::size_t a = 0; a < dec.size(); ++a) {
    if (dec.pinned(a)) {
      const std::size_t site = perm[pinned_site[pi++]];
      cs.eigenvalues.push_back(cs.diag_[site]);
      cs.anchor_.push_back(site);
      cs.tau_.push_back(0.0);
      cs.residual_norms.push_back(0.0);
    } else {
      const Root& r = roots[ri];
      const std::size_t site = perm[R.first[r.k]];
      cs.eigenvalues.push_back(q[r.k] + r.tau);
      cs.anchor_.push_back(site);
      // q[k] equals the shifted diagonal of the anchor site up to clustering
      cs.tau_.push_back((q[r.k] - cs.diag_[site]) + r.tau);
      cs.residual_norms.push_back(corr[ri]);
      ++ri;
    }
  }
  return finish();
}

std::string complex_spectrum_csv(const ComplexSpectrum& cs) {
  std::ostringstream os;
  os << "a,re,im,residual\n";
  for (std::size_t a = 0; a < cs.eigenvalues.size(); ++a)
    os << a << ',' << num::fmt17(cs.eigenvalues[a].real()) << ',' << num::fmt17(cs.eigenvalues[a].imag()) << ','
       << num::fmt17(cs.residual_norms[a]) << '\n';
  return os.str();
}

}  // namespace arrowhead
