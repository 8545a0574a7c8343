#include "arrowhead/numerics.hpp"

#include <algorithm>
#include <cstdio>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>

namespace arrowhead::num {

double pairwise_sum(std::span<const double> xs) noexcept {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

MeanStderr mean_stderr(std::span<const double> xs) {
  if (xs.empty()) throw EmptyEnsembleError("mean_stderr: no realizations");
  MeanStderr r;
  r.count = xs.size();
  r.mean = pairwise_sum(xs) / static_cast<double>(xs.size());
  if (xs.size() < 2) {
    r.stderr_ = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - r.mean) * (xs[i] - r.mean);
  const double var = pairwise_sum(sq) / static_cast<double>(xs.size() - 1);
  r.stderr_ = std::sqrt(var / static_cast<double>(xs.size()));
  return r;
}

LinearFit fit_linear(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ParameterError("fit_linear: size mismatch");
  if (x.size() < 2) throw ParameterError("fit_linear: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw ParameterError("fit_linear: all abscissae equal");
  LinearFit f;
  f.points = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    ss += r * r;
  }
  f.rms_residual = std::sqrt(ss / n);
  f.slope_stderr = x.size() > 2 ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
  return f;
}

namespace {

template <int Order>
void append_panels(double a, double b, std::size_t panels, std::vector<double>& nodes,
                   std::vector<double>& weights) {
  using G = boost::math::quadrature::gauss<double, Order>;
  const auto& abs = G::abscissa();
  const auto& w = G::weights();
  const double h = (b - a) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + h * static_cast<double>(p);
    const double mid = lo + 0.5 * h;
    // boost stores the non-negative half of the symmetric rule
    for (std::size_t k = 0; k < abs.size(); ++k) {
      if (abs[k] == 0.0) {
        nodes.push_back(mid);
        weights.push_back(0.5 * h * w[k]);
      } else {
        nodes.push_back(mid - 0.5 * h * abs[k]);
        weights.push_back(0.5 * h * w[k]);
        nodes.push_back(mid + 0.5 * h * abs[k]);
        weights.push_back(0.5 * h * w[k]);
      }
    }
  }
}

}  // namespace

void gauss_legendre_panels(double a, double b, std::size_t panels, int order,
                           std::vector<double>& nodes, std::vector<double>& weights) {
  if (panels == 0 || !(b > a)) throw ParameterError("gauss_legendre_panels: empty interval");
  switch (order) {
    case 5: append_panels<5>(a, b, panels, nodes, weights); break;
    case 10: append_panels<10>(a, b, panels, nodes, weights); break;
    case 20: append_panels<20>(a, b, panels, nodes, weights); break;
    default: throw ParameterError("gauss_legendre_panels: unsupported order");
  }
}

double chi_square_quantile(double dof, double p) {
  boost::math::chi_squared dist(dof);
  return boost::math::quantile(boost::math::complement(dist, p));
}

double chi_square_survival(double dof, double x) {
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double normal_survival(double z) {
  boost::math::normal dist;
  return boost::math::cdf(boost::math::complement(dist, z));
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace arrowhead::num
