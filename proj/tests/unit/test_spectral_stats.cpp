#include <doctest.h>

#include <cmath>

#include "arrowhead/errors.hpp"
#include "arrowhead/numerics.hpp"
#include "arrowhead/rng.hpp"
#include "arrowhead/spectral_stats.hpp"
#include "helpers.hpp"

using namespace arrowhead;

TEST_SUITE("spectral-statistics") {
  TEST_CASE("energy shifts from a solved spectrum") {
    const auto bare = testing::box_sample(100, 4);
    const auto dec = solve_spectrum(ArrowheadOperator(bare, 1.0));
    const auto s = energy_shifts(dec);
    REQUIRE(s.shifts.size() == 99);
    for (std::size_t a = 0; a < 99; ++a) {
      const double mid = 0.5 * (bare.values[a] + bare.values[a + 1]);
      CHECK(s.energies[a] == dec.energies()[a + 1]);
      CHECK(s.shifts[a] == doctest::Approx(100.0 * (dec.energies()[a + 1] - mid)).epsilon(1e-12));
    }
  }

  TEST_CASE("large-N mean shift") {
    const auto m = DisorderModel::box(1.0);
    CHECK(mean_shift_analytic(m, 1.0, 0.0) == doctest::Approx(0.0));
    for (double e : {0.1, 0.3}) CHECK(mean_shift_analytic(m, 0.7, -e) == doctest::Approx(-mean_shift_analytic(m, 0.7, e)));
    const double e = 0.2, g = 0.4;
    const double x = (m.hilbert(e) - e / (M_PI * g * g)) / m.density(e);
    CHECK(spacing_alpha(m, g, e) == doctest::Approx(x).epsilon(1e-14));
    // the shift stays within half a mean spacing
    CHECK(std::abs(mean_shift_analytic(m, g, e) * m.density(e)) < 0.5);
    CHECK_THROWS_AS(mean_shift_analytic(m, 0.0, e), ParameterError);
  }

  TEST_CASE("binning") {
    const std::vector<double> v{1, 2, 3, 4, 5};
    const std::vector<double> e{-0.45, -0.44, 0.1, 0.5, 0.7};
    const auto p = bin_statistic(v, e, {-0.5, 0.5, 2});
    CHECK(p.counts == std::vector<std::size_t>{2, 2});
    CHECK(p.means[0] == 1.5);
    CHECK(p.means[1] == 3.5);
    CHECK(p.center(1) == 0.25);
    const auto empty = bin_statistic(std::vector<double>{}, std::vector<double>{}, {0.0, 1.0, 3});
    CHECK(std::isnan(empty.means[0]));
  }

  TEST_CASE("shell average of a constant is the constant") {
    const auto m = DisorderModel::box(1.0);
    std::vector<double> v, e;
    for (std::uint64_t r = 0; r < 20; ++r) {
      const auto b = testing::box_sample(500, 100 + r);
      e.insert(e.end(), b.values.begin(), b.values.end());
      v.insert(v.end(), b.size(), 2.0);
    }
    const auto prof = bin_statistic(v, e, {-0.5, 0.5, 10});
    for (double s : shell_average(prof, m, 500, 20)) CHECK(s == doctest::Approx(2.0).epsilon(0.1));
  }

  TEST_CASE("continuum polaritons solve eps = pi g^2 rho~(eps)") {
    for (const auto& m : {DisorderModel::box(1.0), semicircle_model(1.0)}) {
      for (double g : {0.3, 1.0, 5.0}) {
        const auto p = polariton_energies_largeN(m, g);
        // the semicircle keeps rho~ finite at its edges: roots exist only for g^2 > r^2 / 2
        const bool expect = m.kind() == DisorderKind::Box || g * g > 0.125;
        CHECK(p.upper_exists == expect);
        CHECK(p.lower_exists == expect);
        if (!expect) continue;
        for (double e : {p.lower, p.upper}) CHECK(e == doctest::Approx(M_PI * g * g * m.hilbert(e)).epsilon(1e-12));
        CHECK(p.lower < m.lo());
        CHECK(p.upper > m.hi());
      }
    }
    const auto bp = box_upper_polariton(1.0, 1.0);
    CHECK(bp.energy == doctest::Approx(polariton_energies_largeN(DisorderModel::box(1.0), 1.0).upper).epsilon(1e-13));
    // g << W: W/2 = (g^2/W) log(W/delta) to leading order, so delta = W exp(-W^2 / (2 g^2))
    const auto weak = box_upper_polariton(1.0, 0.1);
    CHECK(weak.edge_distance == doctest::Approx(std::exp(-50.0)).epsilon(1e-6));
    CHECK(weak.photon_weight < 1e-15);
  }

  TEST_CASE("spacing model roots") {
    CounterRng rng(5);
    std::vector<double> u(50);
    for (auto& x : u) x = rng.uniform();
    std::sort(u.begin(), u.end());
    for (double alpha : {0.0, 2.5, -1.0}) {
      const auto x = spacing_roots(alpha, u);
      REQUIRE(x.size() == 50);
      for (std::size_t i = 0; i < x.size(); ++i) {
        double s = 0.0;
        for (double uj : u) s += 1.0 / std::tan(M_PI * (x[i] - uj));
        CHECK(std::abs(alpha + s / 50.0) < 1e-8 * (1.0 + std::abs(s) / 50.0));
        if (i + 1 < x.size()) {
          // one root in each gap of the periodic pole set
          CHECK(x[i] > u[i]);
          CHECK(x[i] < u[i + 1]);
        }
      }
    }
  }

  TEST_CASE("reference spacing laws") {
    for (double s : {0.3, 1.0, 2.7}) {
      const auto r = num::integrate([](double x) { return semi_poisson_pdf(x); }, 0.0, s);
      CHECK(semi_poisson_cdf(s) == doctest::Approx(r.value).epsilon(1e-12));
      CHECK(poisson_cdf(s) == doctest::Approx(1.0 - std::exp(-s)).epsilon(1e-14));
    }
  }

  TEST_CASE("spacing histogram statistics") {
    const auto m = spacing_distribution(1e6, 100, 200, 3);
    CHECK(m.samples == 100 * 200);
    CHECK(m.mean() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(chi_square_test(m, poisson_cdf).p_value > 1e-3);
    CHECK(l1_distance(m, poisson_cdf) < 0.1);
    CHECK(chi_square_test(m, semi_poisson_cdf).p_value < 1e-6);
    auto merged = spacing_distribution(0.0, 100, 10, 4);
    const auto other = spacing_distribution(0.0, 100, 10, 5);
    merged.merge(other);
    CHECK(merged.samples == 2000);
    CHECK(merged.realizations == 20);
  }
}
