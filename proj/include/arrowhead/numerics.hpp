#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "arrowhead/errors.hpp"

namespace arrowhead::num {

using cplx = std::complex<double>;

// Neumaier's improved Kahan summation.
template <class T>
class Compensated {
 public:
  void add(T x) noexcept {
    const T t = sum_ + x;
    if constexpr (std::is_same_v<T, double>) {
      if (std::abs(sum_) >= std::abs(x))
        comp_ += (sum_ - t) + x;
      else
        comp_ += (x - t) + sum_;
    } else {
      comp_.real(comp_.real() + two_sum_err(sum_.real(), x.real(), t.real()));
      comp_.imag(comp_.imag() + two_sum_err(sum_.imag(), x.imag(), t.imag()));
    }
    sum_ = t;
  }
  T value() const noexcept { return sum_ + comp_; }

 private:
  static double two_sum_err(double a, double b, double s) noexcept {
    return std::abs(a) >= std::abs(b) ? (a - s) + b : (b - s) + a;
  }
  T sum_{};
  T comp_{};
};

// Order-fixed pairwise summation: the result depends only on the sequence.
double pairwise_sum(std::span<const double> xs) noexcept;

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample std / sqrt(n); NaN when n < 2
  std::size_t count = 0;
};

// Throws EmptyEnsembleError for an empty sample.
MeanStderr mean_stderr(std::span<const double> xs);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double rms_residual = 0.0;
  std::size_t points = 0;
};

// Ordinary least squares y = intercept + slope * x. Needs >= 2 distinct x.
LinearFit fit_linear(std::span<const double> x, std::span<const double> y);

// Product of many complex factors kept as mantissa * 2^exponent so that
// products over thousands of factors neither overflow nor underflow.
class ScaledProduct {
 public:
  void mul(cplx z) noexcept {
    m_ *= z;
    if (++since_ >= 16) renormalize();
  }
  void div(cplx z) noexcept {
    m_ /= z;
    if (++since_ >= 16) renormalize();
  }
  void mul(const ScaledProduct& o) noexcept {
    m_ *= o.m_;
    e_ += o.e_;
    renormalize();
  }
  void div(const ScaledProduct& o) noexcept {
    m_ /= o.m_;
    e_ -= o.e_;
    renormalize();
  }
  cplx value() const noexcept {
    return {std::ldexp(m_.real(), static_cast<int>(e_)), std::ldexp(m_.imag(), static_cast<int>(e_))};
  }
  bool is_zero() const noexcept { return m_ == cplx{}; }

 private:
  void renormalize() noexcept {
    since_ = 0;
    const double a = std::max(std::abs(m_.real()), std::abs(m_.imag()));
    if (a == 0.0 || !std::isfinite(a)) return;
    const int k = std::ilogb(a);
    m_ = {std::ldexp(m_.real(), -k), std::ldexp(m_.imag(), -k)};
    e_ += k;
  }
  cplx m_{1.0, 0.0};
  long long e_ = 0;
  int since_ = 0;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

struct CQuadResult {
  cplx value{};
  double error = 0.0;
};

// Adaptive 15-point Gauss-Kronrod on [a, b] (infinite limits allowed).
template <class F>
auto integrate(F&& f, double a, double b, double rel_tol = 1e-12, unsigned max_depth = 18) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  auto v = gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel_tol, &err);
  if constexpr (std::is_same_v<decltype(v), double>)
    return QuadResult{v, err};
  else
    return CQuadResult{v, err};
}

// Gauss-Legendre nodes/weights mapped to [a, b] with `panels` equal panels of
// `order` points each (order in {5, 10, 20}).
void gauss_legendre_panels(double a, double b, std::size_t panels, int order,
                           std::vector<double>& nodes, std::vector<double>& weights);

// Critical value for the upper-tail chi-square test.
double chi_square_quantile(double dof, double p);
double chi_square_survival(double dof, double x);
double normal_survival(double z);

// Formats a double with 17 significant digits (round-trip exact).
std::string fmt17(double x);

}  // namespace arrowhead::num
