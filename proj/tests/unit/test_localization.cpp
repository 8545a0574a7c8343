#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "arrowhead/errors.hpp"
#include "arrowhead/localization.hpp"
#include "helpers.hpp"

using namespace arrowhead;

TEST_SUITE("localization") {
  TEST_CASE("IPR matches dense eigenvectors") {
    const ArrowheadOperator op(testing::box_sample(80, 12), 0.6);
    const auto dec = solve_spectrum(op);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense_real());
    for (double q : {0.25, 1.0, 2.0}) {
      const auto rep = ipr_report(dec, q);
      for (std::size_t a = 0; a < dec.size(); ++a) {
        const double ref = es.eigenvectors().col(a).array().abs().pow(2 * q).sum();
        CHECK(rep.values[a] == doctest::Approx(ref).epsilon(1e-10));
        if (q == 1.0) CHECK(rep.values[a] == doctest::Approx(1.0).epsilon(1e-12));
      }
      CHECK(rep.classes.front() == StateClass::Polariton);
      CHECK(rep.classes.back() == StateClass::Polariton);
      CHECK(rep.classes[40] == StateClass::Dark);
    }
    CHECK_THROWS_AS(ipr(dec, 3, 0.0), ParameterError);
  }

  TEST_CASE("equally spaced IPR formula") {
    const auto m = DisorderModel::box(1.0);
    const double v = ipr_equally_spaced_analytic(m, 0.5, 0.25);
    CHECK(v > 1.0 / 3.0);
    CHECK(v < 1.0);
    // at the band center of a weakly coupled box the detuning term dominates
    CHECK(ipr_equally_spaced_analytic(m, 1e-3, 0.2) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK_THROWS_AS(ipr_equally_spaced_analytic(m, 0.5, 0.6), DomainError);
    // finite-N states on the grid, averaged over a narrow energy window
    const std::size_t n = 2000;
    const auto dec = solve_spectrum(ArrowheadOperator(equally_spaced_grid(m, n), 0.5));
    const auto rep = ipr_report(dec, 2.0);
    for (double e : {-0.3, 0.0, 0.25}) {
      double s = 0.0;
      int c = 0;
      for (std::size_t a = 1; a < n; ++a) {
        if (std::abs(rep.energies[a] - e) < 0.005) {
          s += rep.values[a];
          ++c;
        }
      }
      REQUIRE(c > 0);
      CHECK(s / c == doctest::Approx(ipr_equally_spaced_analytic(m, 0.5, e)).epsilon(0.02));
    }
  }

  TEST_CASE("fractal estimate arguments and output") {
    const auto m = DisorderModel::box(1.0);
    CHECK_THROWS(fractal_dimension_estimate(m, 1.0, 1.0, {100, 200, 400}, 1, 2));
    CHECK_THROWS(fractal_dimension_estimate(m, 1.0, 2.0, {100, 200}, 1, 2));
    const auto f = fractal_dimension_estimate(m, 1.0, 2.0, {100, 200, 400}, 1, 3);
    CHECK(f.sizes.size() == 3);
    const auto j = nlohmann::json::parse(f.json());
    CHECK(j.contains("b"));
    CHECK(j.contains("c"));
    CHECK(f.csv().rfind("q,N,ipr_mean", 0) == 0);
    // IPR(q=2) of dark states is O(1)
    for (double v : f.mean_ipr) CHECK(v > 0.1);
  }
}
