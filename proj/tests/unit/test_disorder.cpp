#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "arrowhead/disorder.hpp"
#include "arrowhead/errors.hpp"
#include "arrowhead/numerics.hpp"

using namespace arrowhead;

namespace {

// p.v. (1/pi) int rho(x)/(w - x) dx with the singular part subtracted analytically
double hilbert_oracle(const DisorderModel& m, double w) {
  const double r = m.density(w);
  const auto f = [&](double x) { return x == w ? 0.0 : (m.density(x) - r) / (w - x); };
  const double reg = num::integrate(f, m.lo(), w, 1e-13, 25).value + num::integrate(f, w, m.hi(), 1e-13, 25).value;
  return (reg + r * std::log((w - m.lo()) / (m.hi() - w))) / M_PI;
}

}  // namespace

TEST_SUITE("disorder") {
  TEST_CASE("box density and Hilbert transform") {
    const auto m = DisorderModel::box(2.0);
    CHECK(m.lo() == -1.0);
    CHECK(m.hi() == 1.0);
    CHECK(m.density(0.3) == 0.5);
    CHECK(m.density(1.5) == 0.0);
    for (double w : {-0.9, -0.3, 0.0, 0.45, 0.99}) CHECK(m.hilbert(w) == doctest::Approx(hilbert_oracle(m, w)).epsilon(1e-10));
    // outside the support the transform is a plain integral
    const double out = num::integrate([&](double x) { return m.density(x) / (1.7 - x); }, -1.0, 1.0).value / M_PI;
    CHECK(m.hilbert(1.7) == doctest::Approx(out).epsilon(1e-12));
    CHECK_THROWS_AS(m.hilbert(1.0), EdgeSingularityError);
    CHECK_THROWS_AS(DisorderModel::box(0.0), ParameterError);
  }

  TEST_CASE("Hilbert derivative matches a central difference") {
    for (const auto& m : {DisorderModel::box(1.0), semicircle_model(1.0)}) {
      for (double w : {-0.3, 0.1, 0.8}) {
        const double h = 1e-5;
        const double fd = (m.hilbert(w + h) - m.hilbert(w - h)) / (2 * h);
        CHECK(m.hilbert_deriv(w) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }

  TEST_CASE("custom model falls back to quadrature") {
    const auto sc = semicircle_model(1.0);
    DisorderModel::CustomSpec spec;
    spec.lo = -0.5;
    spec.hi = 0.5;
    spec.density = [&](double x) { return sc.density(x); };
    spec.symmetric = true;
    const auto custom = DisorderModel::custom(spec);
    CHECK_FALSE(custom.has_sampler());
    for (double w : {-0.4, -0.05, 0.2, 0.49, 0.7}) CHECK(custom.hilbert(w) == doctest::Approx(sc.hilbert(w)).epsilon(1e-8));
    CHECK(custom.cdf(0.1) == doctest::Approx(sc.cdf(0.1)).epsilon(1e-10));
    CHECK_THROWS(sample_bare_energies(custom, 10, 1));
  }

  TEST_CASE("semicircle normalization and cdf inverse") {
    const auto m = semicircle_model(2.0);
    CHECK(num::integrate([&](double x) { return m.density(x); }, -1.0, 1.0).value == doctest::Approx(1.0).epsilon(1e-12));
    for (double u : {0.01, 0.3, 0.5, 0.77, 0.999}) CHECK(m.cdf(m.inverse_cdf(u)) == doctest::Approx(u).epsilon(1e-12));
  }

  TEST_CASE("sampling is seeded and follows the density") {
    const auto m = DisorderModel::box(1.0);
    const auto a = sample_bare_energies(m, 50000, 9);
    const auto b = sample_bare_energies(m, 50000, 9);
    const auto c = sample_bare_energies(m, 50000, 10);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
    CHECK_FALSE(a.sorted);
    CHECK(*a.seed == 9);
    // Kolmogorov-Smirnov distance against the box cdf, 1% critical value 1.63/sqrt(n)
    auto s = sorted(a);
    CHECK(std::is_sorted(s.values.begin(), s.values.end()));
    double d = 0.0;
    const double n = static_cast<double>(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double f = m.cdf(s.values[i]);
      d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    CHECK(d < 1.63 / std::sqrt(n));
  }

  TEST_CASE("equally spaced grid obeys its spacing rule") {
    for (const auto& m : {DisorderModel::box(1.0), semicircle_model(1.0)}) {
      const std::size_t n = 400;
      const auto e = equally_spaced_grid(m, n);
      REQUIRE(e.size() == n);
      for (std::size_t a = 0; a + 1 < n; ++a) {
        const double gap = e.values[a + 1] - e.values[a];
        CHECK(gap * n * m.density(0.5 * (e.values[a] + e.values[a + 1])) == doctest::Approx(1.0).epsilon(1e-9));
      }
      // equal mass below the first and above the last point
      CHECK(m.cdf(e.values.front()) == doctest::Approx(1.0 - m.cdf(e.values.back())).epsilon(1e-9));
    }
    const auto box = equally_spaced_grid(DisorderModel::box(1.0), 10);
    CHECK(box.values.front() == doctest::Approx(-0.45).epsilon(1e-12));
  }
}
