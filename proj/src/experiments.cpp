#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <type_traits>

#include <Eigen/Eigenvalues>

#include "arrowhead/dynamics.hpp"
#include "arrowhead/ensemble.hpp"
#include "arrowhead/errors.hpp"
#include "arrowhead/localization.hpp"
#include "arrowhead/photon.hpp"
#include "arrowhead/rng.hpp"
#include "arrowhead/spectral_stats.hpp"
#include "arrowhead/transport.hpp"

namespace arrowhead {

namespace {

using nlohmann::json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---- small helpers ----

std::string tag(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

template <class T>
void put(std::ostringstream& os, const T& v) {
  if constexpr (std::is_floating_point_v<T>)
    os << num::fmt17(v);
  else
    os << v;
}

struct Csv {
  std::ostringstream os;
  explicit Csv(const std::string& header) { os << header << '\n'; }
  template <class First, class... Rest>
  void row(const First& first, const Rest&... rest) {
    put(os, first);
    ((os << ',', put(os, rest)), ...);
    os << '\n';
  }
  std::string str() const { return os.str(); }
};

struct Combo {
  std::size_t n;
  double g;
  double w;
};

std::vector<Combo> combos(const ExperimentConfig& c) {
  std::vector<Combo> out;
  for (auto n : c.sizes)
    for (double g : c.g_values)
      for (double w : c.widths) out.push_back({n, g, w});
  return out;
}

// Quantity names carry the sweep point only when the sweep has several.
std::string suffix(const Combo& k, bool multi) {
  if (!multi) return "";
  return "@N=" + std::to_string(k.n) + ",g=" + tag(k.g) + ",W=" + tag(k.w);
}

std::string file_tag(const Combo& k, bool multi) {
  if (!multi) return "";
  return "_N" + std::to_string(k.n) + "_g" + tag(k.g) + "_W" + tag(k.w);
}

BareEnergies draw(const ExperimentConfig& c, const DisorderModel& m, std::size_t n, std::size_t r, bool sort = true) {
  if (c.grid == "equally_spaced") return equally_spaced_grid(m, n);
  auto e = sample_bare_energies(m, n, derive_seed(c.seeds.base, r));
  return sort ? sorted(std::move(e)) : e;
}

// Runs fn over the seed ensemble and keeps the successful realizations in index order.
template <class R, class F>
std::vector<R> ensemble(EnsembleReport& rep, std::size_t count, std::size_t workers, F&& fn) {
  auto res = parallel_map<R>(count, workers, std::forward<F>(fn));
  std::vector<R> ok;
  ok.reserve(count);
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (res[i].value) {
      ok.push_back(std::move(*res[i].value));
    } else {
      ++rep.failures;
      if (rep.failure_messages.size() < 10) rep.failure_messages.push_back(std::to_string(i) + ": " + res[i].error);
    }
  }
  rep.realizations += count;
  return ok;
}

void add_avg(EnsembleReport& rep, const std::string& name, const std::vector<double>& v, const std::string& units = "") {
  if (v.empty()) {
    rep.add(name, kNaN, kNaN, 0, units);
    return;
  }
  const auto m = ensemble_average(v);
  rep.add(name, m.mean, m.stderr_, m.count, units);
}

std::vector<double> centers(const BinSpec& b) {
  std::vector<double> out(b.bins);
  const double h = (b.hi - b.lo) / static_cast<double>(b.bins);
  for (std::size_t i = 0; i < b.bins; ++i) out[i] = b.lo + (static_cast<double>(i) + 0.5) * h;
  return out;
}

BinSpec bins_for(const ExperimentConfig& c, const DisorderModel& m, double w) {
  // binning follows the support when W is swept and no explicit range was given
  BinSpec b = c.binning;
  if (w != c.model.width && b.lo == c.model.build().lo() && b.hi == c.model.build().hi()) {
    b.lo = m.lo();
    b.hi = m.hi();
  }
  return b;
}

// ---- spectrum ----

void run_spectrum(const ExperimentConfig& c, std::size_t workers, EnsembleReport& rep) {
  struct R {
    bool certified;
    double max_residual;
    double dense_dev;
    std::size_t pinned;
    std::string rows;
  };
  const auto ks = combos(c);
  const bool multi = ks.size() > 1;
  Csv csv("N,g,W,seed,a,eps,photon_weight,residual");
  for (const auto& k : ks) {
    const auto model = c.model.build(k.w);
    auto out = ensemble<R>(rep, c.seeds.count, workers, [&](std::size_t r) {
      const ArrowheadOperator op(draw(c, model, k.n, r), k.g);
      const auto dec = solve_spectrum(op);
      R res{dec.interlacing_certified(), 0.0, kNaN, dec.pinned_count(), {}};
      for (std::size_t a = 0; a < dec.size(); ++a) {
        if (dec.kind(a) == EigenDecomposition::StateKind::Secular)
          res.max_residual = std::max(res.max_residual, std::abs(dec.root_residual(a)));
      }
      if (k.n <= 400) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense_real(), Eigen::EigenvaluesOnly);
        double dev = 0.0;
        for (std::size_t a = 0; a < dec.size(); ++a)
          dev = std::max(dev, std::abs(dec.energies()[a] - es.eigenvalues()(static_cast<Eigen::Index>(a))));
        res.dense_dev = dev;
      }
      if (r < 10) {
        Csv rows("");
        for (std::size_t a = 0; a < dec.size(); ++a)
          rows.row(k.n, k.g, k.w, r, a, dec.energies()[a], dec.photon_weight(a),
                   dec.kind(a) == EigenDecomposition::StateKind::Secular ? dec.root_residual(a) : 0.0);
        res.rows = rows.str().substr(1);
      }
      return res;
    });
    std::vector<double> cert, resid, dense, pinned;
    for (const auto& o : out) {
      cert.push_back(o.certified ? 1.0 : 0.0);
      resid.push_back(o.max_residual);
      if (!std::isnan(o.dense_dev)) dense.push_back(o.dense_dev);
      pinned.push_back(static_cast<double>(o.pinned));
      csv.os << o.rows;
    }
    const auto sx = suffix(k, multi);
    add_avg(rep, "interlacing_certified" + sx, cert);
    rep.add("max_root_residual" + sx, resid.empty() ? kNaN : *std::max_element(resid.begin(), resid.end()), 0.0,
            resid.size());
    if (!dense.empty())
      rep.add("max_dense_deviation" + sx, *std::max_element(dense.begin(), dense.end()), 0.0, dense.size(), "energy");
    add_avg(rep, "pinned_states" + sx, pinned);
  }
  rep.artifacts.push_back({"spectrum.csv", "eigenvalues, photon weights and secular residuals (first 10 seeds)",
                           "energy in units of the bare-energy scale", csv.str()});
}

// ---- shifts ----

void run_shifts(const ExperimentConfig& c, std::size_t workers, EnsembleReport& rep) {
  const auto ks = combos(c);
  const bool multi = ks.size() > 1;
  Csv csv("N,g,W,bin_center,shift_mean,shift_stderr,count,shift_largeN");
  for (const auto& k : ks) {
    const auto model = c.model.build(k.w);
    auto out = ensemble<ShiftStatistics>(rep, c.seeds.count, workers, [&](std::size_t r) {
      return energy_shifts(solve_spectrum(ArrowheadOperator(draw(c, model, k.n, r), k.g)));
    });
    std::vector<double> s, e, per;
    for (const auto& o : out) {
      s.insert(s.end(), o.shifts.begin(), o.shifts.end());
      e.insert(e.end(), o.energies.begin(), o.energies.end());
      if (!o.shifts.empty()) per.push_back(num::mean_stderr(o.shifts).mean);
    }
    const auto prof = bin_statistic(s, e, bins_for(c, model, k.w));
    double sq = 0.0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < prof.bins(); ++b) {
      const double x = prof.center(b);
      const double th = (k.g > 0.0 && model.inside(x)) ? mean_shift_analytic(model, k.g, x) : kNaN;
      csv.row(k.n, k.g, k.w, x, prof.means[b], prof.stderrs[b], prof.counts[b], th);
      if (!prof.empty(b) && std::isfinite(th)) {
        sq += (prof.means[b] - th) * (prof.means[b] - th);
        ++used;
      }
    }
    const auto sx = suffix(k, multi);
    add_avg(rep, "shift_mean" + sx, per, "mean level spacing");
    rep.add("shift_rms_deviation" + sx, used ? std::sqrt(sq / static_cast<double>(used)) : kNaN, 0.0, used,
            "mean level spacing");
  }
  rep.artifacts.push_back({"shifts.csv", "binned dark-state energy shifts with the large-N mean",
                           "shift in units of the local mean spacing 1/N", csv.str()});
}

// ---- spacings ----

void run_spacings(const ExperimentConfig& c, std::size_t workers, EnsembleReport& rep) {
  const bool multi = c.sizes.size() * c.alpha_values.size() > 1;
  Csv csv("N,alpha,s,density,count");
  for (auto n : c.sizes) {
    for (double alpha : c.alpha_values) {
      auto out = ensemble<SpacingModel>(rep, c.seeds.count, workers, [&](std::size_t r) {
        return spacing_distribution(alpha, n, 1, derive_seed(c.seeds.base, r));
      });
      if (out.empty()) continue;
      SpacingModel m = out.front();
      for (std::size_t i = 1; i < out.size(); ++i) m.merge(out[i]);
      for (std::size_t b = 0; b < m.counts.size(); ++b)
        csv.row(n, alpha, (static_cast<double>(b) + 0.5) * m.bin_width, m.density(b), m.counts[b]);
      const std::string sx = multi ? "@N=" + std::to_string(n) + ",alpha=" + tag(alpha) : "";
      rep.add("mean_spacing" + sx, m.mean(), m.mean_stderr(), m.samples);
      rep.add("chi2_p_poisson" + sx, chi_square_test(m, poisson_cdf).p_value);
      rep.add("chi2_p_semi_poisson" + sx, chi_square_test(m, semi_poisson_cdf).p_value);
      rep.add("l1_poisson" + sx, l1_distance(m, poisson_cdf));
      rep.add("l1_semi_poisson" + sx, l1_distance(m, semi_poisson_cdf));
    }
  }
  rep.artifacts.push_back({"spacings.csv", "spacing histograms of the cotangent level model",
                           "s in units of the mean spacing", csv.str()});
}

// ---- ipr ----

void run_ipr(const ExperimentConfig& c, std::size_t workers, EnsembleReport& rep) {
  struct R {
    std::vector<double> values, energies;
    double dark_mean;
  };
  const auto ks = combos(c);
  const bool multi = ks.size() * c.q_values.size() > 1;
  Csv csv("N,g,W,q,bin_center,ipr_mean,ipr_stderr,count,ipr_equally_spaced");
  for (const auto& k : ks) {
    const auto model = c.model.build(k.w);
    for (double q : c.q_values) {
      auto out = ensemble<R>(rep, c.seeds.count, workers, [&](std::size_t r) {
        const auto rep_q = ipr_report(solve_spectrum(ArrowheadOperator(draw(c, model, k.n, r), k.g)), q);
        R res{{}, {}, rep_q.dark_mean()};
        for (std::size_t a = 0; a < rep_q.values.size(); ++a) {
          if (rep_q.classes[a] != StateClass::Dark) continue;
          res.values.push_back(rep_q.values[a]);
          res.energies.push_back(rep_q.energies[a]);
        }
        return res;
      });
      std::vector<double> v, e, per;
      for (const auto& o : out) {
        v.insert(v.end(), o.values.begin(), o.values.end());
        e.insert(e.end(), o.energies.begin(), o.energies.end());
        per.push_back(o.dark_mean);
      }
      const auto prof = bin_statistic(v, e, bins_for(c, model, k.w));
      const bool analytic = c.grid == "equally_spaced" && q == 2.0 && k.g > 0.0;
      double worst = 0.0;
      for (std::size_t b = 0; b < prof.bins(); ++b) {
        const double x = prof.center(b);
        const double th = analytic && model.inside(x) ? ipr_equally_spaced_analytic(model, k.g, x) : kNaN;
        csv.row(k.n, k.g, k.w, q, x, prof.means[b], prof.stderrs[b], prof.counts[b], th);
        if (!prof.empty(b) && std::isfinite(th)) worst = std::max(worst, std::abs(prof.means[b] / th - 1.0));
      }
      const std::string sx = multi ? suffix(k, true) + ",q=" + tag(q) : "";
      add_avg(rep, "ipr_dark_mean" + sx, per);
      if (analytic) rep.add("ipr_max_rel_deviation" + sx, worst);
    }
  }
  rep.artifacts.push_back({"ipr.csv", "binned dark-state inverse participation ratios", "dimensionless", csv.str()});
}

// ---- fractal ----

void run_fractal(const ExperimentConfig& c, std::size_t workers, EnsembleReport& rep) {
  std::string csv = "g,W,q,N,ipr_mean,ipr_stderr,effective_dim\n";
  json fits = json::array();
  const bool multi = c.g_values.size() * c.widths.size() * c.q_values.size() > 1;
  for (double g : c.g_values) {
    for (double w : c.widths) {
      const auto model = c.model.build(w);
      auto out = ensemble<FractalFit>(rep, c.q_values.size(), workers, [&](std::size_t i) {
        return fractal_dimension_estimate(model, g, c.q_values[i], c.sizes, c.seeds.base, c.seeds.count);
      });
      for (const auto& f : out) {
        std::istringstream lines(f.csv());
        std::string line;
        std::getline(lines, line);  // header
        while (std::getline(lines, line)) csv += tag(g) + "," + tag(w) + "," + line + "\n";
        auto j = json::parse(f.json());
        j["g"] = g;
        j["W"] = w;
        fits.push_back(j);
        const std::string sx = multi ? "@g=" + tag(g) + ",W=" + tag(w) + ",q=" + tag(f.q) : "";
        rep.add("fractal_dimension" + sx, f.dimension(), f.c_stderr, f.sizes.size());
        if (f.mean_ipr.size() >= 2)
          rep.add("ipr_size_ratio" + sx, f.mean_ipr.back() / f.mean_ipr.front(), 0.0, f.sizes.size());
      }
    }
  }
  rep.artifacts.push_back({"fractal.csv", "mean dark-state IPR(q) per size with effective dimensions", "dimensionless", csv});
  rep.artifacts.push_back({"fractal_fit.json", "b / log N + c extrapolation of the effective dimension", "dimensionless",
                           fits.dump(2) + "\n"});
}

// ---- spectral function and covariance ----

struct SpectralSamples {
  std::vector<std::vector<double>> a;  // one smoothed spectral function per realization
  std::vector<double> sum_rule;
};

SpectralSamples spectral_samples(const ExperimentConfig& c, const Combo& k, const std::vector<double>& grid,
                                 std::size_t workers, EnsembleReport& rep, bool sum_rule) {
  struct R {
    std::vector<double> a;
    double sum_rule;
  };
  const auto model = c.model.build(k.w);
  auto out = ensemble<R>(rep, c.seeds.count, workers, [&](std::size_t r) {
    const auto dec = solve_spectrum(ArrowheadOperator(draw(c, model, k.n, r), k.g));
    R res{spectral_function_finiteN(dec, grid, c.sigma).values, kNaN};
    if (sum_rule && r < 8) res.sum_rule = sum_rule_finiteN(dec, c.sigma).total;
    return res;
  });
  SpectralSamples s;
  for (auto& o : out) {
    s.a.push_back(std::move(o.a));
    if (std::isfinite(o.sum_rule)) s.sum_rule.push_back(o.sum_rule);
  }
  return s;
}

void run_spectral_function(const ExperimentConfig& c, std::size_t workers, EnsembleReport& rep) {
  const auto ks = combos(c);
  const bool multi = ks.size() > 1;
  Csv csv("N,g,W,w,A_mean,A_stderr,A_largeN");
  Csv deltas("N,g,W,position,weight");
  rep.sigma = c.sigma;
  for (const auto& k : ks) {
    const auto model = c.model.build(k.w);
    const auto grid = centers(bins_for(c, model, k.w));
    const auto s = spectral_samples(c, k, grid, workers, rep, true);
    const auto large = spectral_function_largeN(model, k.g, grid, c.sigma);
    const auto bare = spectral_function_largeN(model, k.g, grid, 0.0);
    for (std::size_t i = 0; i < bare.delta_positions.size(); ++i)
      deltas.row(k.n, k.g, k.w, bare.delta_positions[i], bare.delta_weights[i]);
    double dev = 0.0, z = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      std::vector<double> col;
      for (const auto& a : s.a) col.push_back(a[i]);
      const auto m = col.empty() ? num::MeanStderr{kNaN, kNaN, 0} : ensemble_average(col);
      csv.row(k.n, k.g, k.w, grid[i], m.mean, m.stderr_, large.values[i]);
      dev = std::max(dev, std::abs(m.mean - large.values[i]));
      if (m.stderr_ > 0.0) z = std::max(z, std::abs(m.mean - large.values[i]) / m.stderr_);
    }
    const auto sx = suffix(k, multi);
    add_avg(rep, "sum_rule_finiteN" + sx, s.sum_rule);
    rep.add("sum_rule_largeN" + sx, sum_rule_largeN(model, k.g).total);
    rep.add("max_abs_deviation" + sx, dev, 0.0, s.a.size(), "1/energy");
    rep.add("max_zscore" + sx, z, 0.0, s.a.size());
  }
  rep.artifacts.push_back({"spectral_function.csv", "ensemble-mean Lorentzian-smoothed spectral function and its large-N value",
                           "A in 1/energy", csv.str()});
  rep.artifacts.push_back({"spectral_deltas.csv", "large-N polariton delta peaks", "weight dimensionless", deltas.str()});
}

struct CovarianceStats {
  Eigen::MatrixXd cov, se;
};

CovarianceStats ensemble_covariance(const std::vector<std::vector<double>>& a) {
  const auto r = a.size();
  if (r < 2) throw InsufficientSpectrumError("covariance: need at least two realizations");
  const auto n = static_cast<Eigen::Index>(a.front().size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> col;
    for (const auto& v : a) col.push_back(v[static_cast<std::size_t>(i)]);
    mean(i) = ensemble_average(col).mean;
  }
  CovarianceStats s{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
  const double rd = static_cast<double>(r);
  std::vector<double> y(r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      for (std::size_t k = 0; k < r; ++k)
        y[k] = (a[k][static_cast<std::size_t>(i)] - mean(i)) * (a[k][static_cast<std::size_t>(j)] - mean(j));
      const auto m = ensemble_average(y);
      s.cov(i, j) = s.cov(j, i) = m.mean * rd / (rd - 1.0);
      s.se(i, j) = s.se(j, i) = m.stderr_ * rd / (rd - 1.0);
    }
  }
  return s;
}

void run_covariance(const ExperimentConfig& c, std::size_t workers, EnsembleReport& rep) {
  const auto ks = combos(c);
  const bool multi = ks.size() > 1;
  rep.sigma = c.sigma;
  for (const auto& k : ks) {
    const auto model = c.model.build(k.w);
    const auto grid = centers(bins_for(c, model, k.w));
    const auto s = spectral_samples(c, k, grid, workers, rep, false);
    const auto ens = ensemble_covariance(s.a);
    const auto th = smoothed_covariance_largeN(model, k.g, k.n, grid, c.sigma);
    std::size_t within = 0, signed_cells = 0, sign_ok = 0;
    double zmax = 0.0;
    const auto n = ens.cov.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double diff = std::abs(ens.cov(i, j) - th(i, j));
        if (diff <= 3.0 * ens.se(i, j)) ++within;
        if (ens.se(i, j) > 0.0) zmax = std::max(zmax, diff / ens.se(i, j));
        if (std::abs(th(i, j)) > 3.0 * ens.se(i, j)) {
          ++signed_cells;
          if ((th(i, j) > 0.0) == (ens.cov(i, j) > 0.0)) ++sign_ok;
        }
      }
    }
    const auto sx = suffix(k, multi);
    const auto cells = static_cast<double>(n * n);
    rep.add("cov_within_3se_fraction" + sx, static_cast<double>(within) / cells, 0.0, s.a.size());
    rep.add("cov_max_zscore" + sx, zmax, 0.0, s.a.size());
    rep.add("cov_sign_agreement" + sx, signed_cells ? static_cast<double>(sign_ok) / static_cast<double>(signed_cells) : kNaN,
            0.0, signed_cells);
    const auto ft = file_tag(k, multi);
    const std::string units = "covariance in 1/energy^2";
    rep.artifacts.push_back({"covariance_ensemble" + ft + ".csv", "ensemble covariance of the smoothed spectral function",
                             units, covariance_csv(grid, ens.cov)});
    rep.artifacts.push_back({"covariance_stderr" + ft + ".csv", "standard error of each ensemble covariance cell", units,
                             covariance_csv(grid, ens.se)});
    rep.artifacts.push_back({"covariance_largeN" + ft + ".csv", "large-N covariance smoothed with the same Lorentzian",
                             units, covariance_csv(grid, th)});
  }
}

// ---- photon weights ----

void run_photon_weights(const ExperimentConfig& c, std::size_t workers, EnsembleReport& rep) {
  struct R {
    std::vector<double> dark, energies;
    double lower, upper, total;
  };
  const auto ks = combos(c);
  const bool multi = ks.size() > 1;
  Csv csv("N,g,W,bin_center,N_pw_mean,N_pw_stderr,count,N_pw_largeN");
  for (const auto& k : ks) {
    const auto model = c.model.build(k.w);
    auto out = ensemble<R>(rep, c.seeds.count, workers, [&](std::size_t r) {
      const auto pw = photon_weights(solve_spectrum(ArrowheadOperator(draw(c, model, k.n, r), k.g)));
      R res{{}, {}, pw.weights.front(), pw.weights.back(), pw.total()};
      for (std::size_t a = 0; a < pw.weights.size(); ++a) {
        if (pw.classes[a] != StateClass::Dark) continue;
        res.dark.push_back(pw.weights[a] * static_cast<double>(k.n));
        res.energies.push_back(pw.energies[a]);
      }
      return res;
    });
    std::vector<double> d, e, lo, up, tot;
    for (const auto& o : out) {
      d.insert(d.end(), o.dark.begin(), o.dark.end());
      e.insert(e.end(), o.energies.begin(), o.energies.end());
      lo.push_back(o.lower);
      up.push_back(o.upper);
      tot.push_back(o.total);
    }
    const auto prof = bin_statistic(d, e, bins_for(c, model, k.w));
    double sq = 0.0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < prof.bins(); ++b) {
      const double x = prof.center(b);
      const double th = k.g > 0.0 && model.inside(x)
                            ? photon_weight_dark_analytic(model, k.g, k.n, x) * static_cast<double>(k.n)
                            : kNaN;
      csv.row(k.n, k.g, k.w, x, prof.means[b], prof.stderrs[b], prof.counts[b], th);
      if (!prof.empty(b) && std::isfinite(th)) {
        sq += (prof.means[b] - th) * (prof.means[b] - th);
        ++used;
      }
    }
    const auto sx = suffix(k, multi);
    add_avg(rep, "pw_lower" + sx, lo);
    add_avg(rep, "pw_upper" + sx, up);
    add_avg(rep, "pw_total" + sx, tot);
    if (k.g > 0.0) {
      const auto pol = photon_weight_polaritons(model, k.g);
      rep.add("pw_lower_largeN" + sx, pol.lower);
      rep.add("pw_upper_largeN" + sx, pol.upper);
      rep.add("pw_dark_rms_deviation" + sx, used ? std::sqrt(sq / static_cast<double>(used)) : kNaN, 0.0, used);
    }
  }
  rep.artifacts.push_back({"photon_weights.csv", "binned dark-state photon weights scaled by N with the large-N value",
                           "dimensionless", csv.str()});
}

// ---- escape ----

void run_escape(const ExperimentConfig& c, std::size_t workers, EnsembleReport& rep) {
  struct R {
    std::vector<std::vector<double>> curves;
    std::vector<double> rates;
  };
  const auto ks = combos(c);
  const bool multi = ks.size() > 1;
  Csv csv("N,g,W,t,P_mean,P_stderr,curves,P_largeN");
  Csv sites("N,g,W,seed,site,energy,rate,rate_stderr,fit_points,warning");
  for (const auto& k : ks) {
    if (!(k.g > 0.0)) throw ConfigError("/g_values", "escape needs g > 0");
    const auto model = c.model.build(k.w);
    const auto times = geometric_times(c.escape.t_min, c.escape.gt_max / k.g, c.escape.count);
    std::vector<std::string> site_rows(c.seeds.count);
    auto out = ensemble<R>(rep, c.seeds.count, workers, [&](std::size_t r) {
      const auto dec = solve_spectrum(ArrowheadOperator(draw(c, model, k.n, r), k.g));
      R res;
      Csv rows("");
      for (std::size_t j = 0; j < k.n; ++j) {
        const double wj = dec.bare().values[j];
        if (std::abs(wj - c.escape.energy) >= c.escape.window) continue;
        auto curve = escape_probability(dec, j, times);
        fit_escape_rate(curve, k.g);
        rows.row(k.n, k.g, k.w, r, j, wj, curve.rate, curve.rate_stderr, curve.fit_points, curve.warning ? 1 : 0);
        res.curves.push_back(curve.p);
        res.rates.push_back(curve.rate);
      }
      site_rows[r] = rows.str().substr(1);
      return res;
    });
    for (const auto& s : site_rows) sites.os << s;
    std::vector<std::vector<double>> curves;
    std::vector<double> per;
    for (auto& o : out) {
      if (!o.rates.empty()) per.push_back(num::mean_stderr(o.rates).mean);
      for (auto& p : o.curves) curves.push_back(std::move(p));
    }
    const auto sx = suffix(k, multi);
    EscapeCurve avg;
    avg.energy = c.escape.energy;
    avg.times = times;
    std::vector<double> large(times.size(), kNaN);
    if (c.escape.large_n && model.inside(c.escape.energy)) {
      const auto ln = escape_probability_largeN(model, k.g, k.n, c.escape.energy, times);
      large = ln.p;
      rep.add("escape_rate_largeN" + sx, ln.rate, ln.rate_stderr, ln.fit_points, "1/time");
    }
    std::vector<double> se(times.size(), kNaN);
    if (!curves.empty()) {
      for (std::size_t i = 0; i < times.size(); ++i) {
        std::vector<double> col;
        for (const auto& p : curves) col.push_back(p[i]);
        const auto m = ensemble_average(col);
        avg.p.push_back(m.mean);
        se[i] = m.stderr_;
      }
      fit_escape_rate(avg, k.g);
    } else {
      avg.p.assign(times.size(), kNaN);
      avg.rate = kNaN;
    }
    for (std::size_t i = 0; i < times.size(); ++i) csv.row(k.n, k.g, k.w, times[i], avg.p[i], se[i], curves.size(), large[i]);
    const double analytic = escape_rate_analytic(model, k.g, k.n, c.escape.energy).rate;
    rep.add("escape_rate_fit" + sx, avg.rate, avg.rate_stderr, curves.size(), "1/time");
    add_avg(rep, "escape_rate_site_mean" + sx, per, "1/time");
    rep.add("escape_rate_analytic" + sx, analytic, 0.0, 1, "1/time");
    rep.add("escape_rate_ratio" + sx, avg.rate / analytic, avg.rate_stderr / analytic, curves.size());
  }
  rep.artifacts.push_back({"escape.csv", "site-averaged escape probability and its large-N counterpart",
                           "t in 1/energy, P dimensionless", csv.str()});
  rep.artifacts.push_back({"escape_sites.csv", "per-site fitted escape rates", "rate in energy units", sites.str()});
}

void run_escape_sweep(const ExperimentConfig& c, std::size_t workers, EnsembleReport& rep) {
  if (c.model.type != "box") throw UnsupportedModelError("escape-sweep: the finite-N estimator needs the box model");
  const auto ks = combos(c);
  const bool multi = ks.size() > 1;
  Csv csv("N,g,W,E_Gamma,E_Gamma_stderr,E_Gamma_largeN,rel_deviation");
  double worst = 0.0;
  for (const auto& k : ks) {
    const auto model = c.model.build(k.w);
    auto out = ensemble<double>(rep, c.seeds.count, workers, [&](std::size_t r) {
      return mean_escape_rate_finiteN(ArrowheadOperator(draw(c, model, k.n, r), k.g), k.w);
    });
    const auto m = out.empty() ? num::MeanStderr{kNaN, kNaN, 0} : ensemble_average(out);
    const double th = mean_escape_rate(model, k.g, k.n);
    const double dev = m.mean / th - 1.0;
    worst = std::max(worst, std::abs(dev));
    csv.row(k.n, k.g, k.w, m.mean, m.stderr_, th, dev);
    const auto sx = suffix(k, multi);
    rep.add("E_Gamma" + sx, m.mean, m.stderr_, m.count, "energy");
    rep.add("E_Gamma_largeN" + sx, th, 0.0, 1, "energy");
  }
  rep.add("max_rel_deviation", worst, 0.0, ks.size());
  rep.artifacts.push_back({"escape_sweep.csv", "disorder-averaged escape rate over the (N, g, W) grid",
                           "rate in energy units", csv.str()});
}

// ---- transport ----

void run_transport(const ExperimentConfig& c, std::size_t workers, EnsembleReport& rep, bool sweep) {
  struct R {
    double j_out, dark_share, total, n_cavity;
    bool quadrature;
    std::string json;
  };
  const auto ks = combos(c);
  const bool multi = ks.size() > 1;
  Csv csv("N,g,W,seed,J_out,dark_share,total_population,n_cavity,used_quadrature");
  Csv summary("N,g,W,E_J_out,E_J_out_stderr,dark_share,total_population,realizations");
  struct Point {
    Combo k;
    double j;
    double pop;
  };
  std::vector<Point> points;
  for (const auto& k : ks) {
    const auto model = c.model.build(k.w);
    auto out = ensemble<R>(rep, c.seeds.count, workers, [&](std::size_t r) {
      // bare energies keep draw order so in/out sites are not energy-selected
      auto cfg = TransportConfig::rescaled(draw(c, model, k.n, r, false), k.g, c.transport.gamma_in_tilde,
                                           c.transport.gamma_out);
      cfg.in_site = c.transport.in_site;
      if (c.transport.out_site) cfg.out_site = *c.transport.out_site;
      cfg.validate();
      const auto sol = solve_transport(cfg);
      return R{sol.j_out, sol.dark_share(), sol.total_population(), sol.n_cavity, sol.used_quadrature,
               (!sweep && r < 3) ? sol.json(cfg) : std::string()};
    });
    std::vector<double> j, d, p;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& o = out[i];
      csv.row(k.n, k.g, k.w, i, o.j_out, o.dark_share, o.total, o.n_cavity, o.quadrature ? 1 : 0);
      j.push_back(o.j_out);
      d.push_back(o.dark_share);
      p.push_back(o.total);
      if (!o.json.empty())
        rep.artifacts.push_back({"transport" + file_tag(k, multi) + "_r" + std::to_string(i) + ".json",
                                 "steady-state solution of one realization", "rates in energy units", o.json + "\n"});
    }
    if (j.empty()) continue;
    const auto mj = ensemble_average(j), md = ensemble_average(d), mp = ensemble_average(p);
    summary.row(k.n, k.g, k.w, mj.mean, mj.stderr_, md.mean, mp.mean, mj.count);
    const auto sx = suffix(k, multi);
    rep.add("J_out" + sx, mj.mean, mj.stderr_, mj.count, "energy");
    rep.add("dark_share" + sx, md.mean, md.stderr_, md.count);
    rep.add("total_population" + sx, mp.mean, mp.stderr_, mp.count);
    points.push_back({k, mj.mean, mp.mean});
  }
  if (sweep && c.sizes.size() >= 2) {
    const bool multi_gw = c.g_values.size() * c.widths.size() > 1;
    for (double g : c.g_values) {
      for (double w : c.widths) {
        std::vector<double> x, y, pops;
        for (const auto& pt : points) {
          if (pt.k.g != g || pt.k.w != w || !(pt.j > 0.0)) continue;
          x.push_back(std::log(static_cast<double>(pt.k.n)));
          y.push_back(std::log(pt.j));
          pops.push_back(pt.pop);
        }
        if (x.size() < 2) continue;
        const auto fit = num::fit_linear(x, y);
        const std::string sx = multi_gw ? "@g=" + tag(g) + ",W=" + tag(w) : "";
        rep.add("jout_slope" + sx, fit.slope, fit.slope_stderr, x.size());
        const auto [mn, mx] = std::minmax_element(pops.begin(), pops.end());
        rep.add("population_flatness" + sx, *mx / *mn, 0.0, pops.size());
      }
    }
  }
  rep.artifacts.push_back({"transport.csv", "per-realization output current, dark share and populations",
                           "J in energy units", csv.str()});
  rep.artifacts.push_back({"transport_summary.csv", "ensemble means over the (N, g, W) grid", "J in energy units",
                           summary.str()});
}

}  // namespace

EnsembleReport run_experiment(const ExperimentConfig& cfg, std::size_t workers) {
  const auto start = std::chrono::steady_clock::now();
  EnsembleReport rep;
  rep.kind = cfg.kind;
  rep.config_hash = cfg.hash;
  rep.config = cfg.resolved;
  workers = std::max<std::size_t>(1, workers);
  const auto& k = cfg.kind;
  if (k == "spectrum") run_spectrum(cfg, workers, rep);
  else if (k == "shifts") run_shifts(cfg, workers, rep);
  else if (k == "spacings") run_spacings(cfg, workers, rep);
  else if (k == "ipr") run_ipr(cfg, workers, rep);
  else if (k == "fractal") run_fractal(cfg, workers, rep);
  else if (k == "spectral-function") run_spectral_function(cfg, workers, rep);
  else if (k == "covariance") run_covariance(cfg, workers, rep);
  else if (k == "photon-weights") run_photon_weights(cfg, workers, rep);
  else if (k == "escape") run_escape(cfg, workers, rep);
  else if (k == "escape-sweep") run_escape_sweep(cfg, workers, rep);
  else if (k == "transport") run_transport(cfg, workers, rep, false);
  else if (k == "transport-sweep") run_transport(cfg, workers, rep, true);
  else throw ConfigError("/kind", "unknown experiment kind '" + k + "'");
  evaluate_checks(cfg.checks, rep);
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace arrowhead
