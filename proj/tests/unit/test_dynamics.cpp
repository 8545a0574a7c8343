#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "arrowhead/dynamics.hpp"
#include "arrowhead/errors.hpp"
#include "helpers.hpp"

using namespace arrowhead;

TEST_SUITE("dynamics") {
  TEST_CASE("finite-N propagator equals the dense matrix exponential") {
    const ArrowheadOperator op(testing::box_sample(40, 5), 1.2);
    const auto dec = solve_spectrum(op);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense_real());
    const auto& v = es.eigenvectors();
    for (double t : {0.0, 0.7, 25.0}) {
      Eigen::VectorXcd phase(41);
      for (int a = 0; a < 41; ++a) phase(a) = std::exp(cplx(0.0, -es.eigenvalues()(a) * t));
      const Eigen::MatrixXcd u = v.cast<cplx>() * phase.asDiagonal() * v.transpose().cast<cplx>();
      for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, 0}, {3, 40}, {40, 40}, {7, 21}})
        CHECK(std::abs(propagator_finiteN(dec, i, j, t) - u(i, j)) < 1e-12);
      double norm = 0.0;
      for (std::size_t i = 0; i <= 40; ++i) norm += std::norm(propagator_finiteN(dec, i, 12, t));
      CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto series = propagator_finiteN(dec, 4, 4, std::vector<double>{0.0, 1.0});
    CHECK(series[1] == propagator_finiteN(dec, 4, 4, 1.0));
  }

  TEST_CASE("large-N propagators at t = 0") {
    const auto m = DisorderModel::box(1.0);
    CHECK(std::abs(propagator_largeN(m, 1.0, 1000, {Element::Photon}, 0.0) - 1.0) < 1e-9);
    CHECK(std::abs(propagator_largeN(m, 1.0, 1000, {Element::Diagonal, 0.0, 0.1}, 0.0) - 1.0) < 1e-9);
    CHECK(std::abs(propagator_largeN(m, 1.0, 1000, {Element::SiteCavity, 0.0, 0.1}, 0.0)) < 1e-9);
    CHECK(std::abs(propagator_largeN(m, 1.0, 1000, {Element::SiteSite, -0.2, 0.1}, 0.0)) < 1e-9);
    CHECK_THROWS(propagator_largeN(m, 1.0, 1000, {Element::Diagonal, 0.0, 0.7}, 1.0));
  }

  TEST_CASE("large-N photon propagator tracks a large finite system") {
    const auto m = DisorderModel::box(1.0);
    const auto dec = solve_spectrum(ArrowheadOperator(testing::box_sample(4000, 77), 1.0));
    for (double t : {0.5, 2.0, 6.0}) {
      const cplx fin = propagator_finiteN(dec, 4000, 4000, t);
      const cplx big = propagator_largeN(m, 1.0, 4000, {Element::Photon}, t);
      // realization-to-realization fluctuations are O(1/sqrt(N))
      CHECK(std::abs(fin - big) < 0.03);
    }
  }

  TEST_CASE("band-center escape rate is g independent") {
    const auto m = DisorderModel::box(1.0);
    for (double g : {0.3, 1.0, 3.0})
      CHECK(escape_rate_analytic(m, g, 2000, 0.0).rate == doctest::Approx(2.0 / (M_PI * 2000)).epsilon(1e-13));
    const auto edge = escape_rate_analytic(m, 1.0, 2000, 0.5);
    CHECK(edge.edge);
    CHECK(edge.rate == 0.0);
  }

  TEST_CASE("disorder-averaged escape rate limits") {
    const auto m = DisorderModel::box(1.0);
    const std::size_t n = 1000;
    CHECK(mean_escape_rate(m, 0.05, n) == doctest::Approx(2 * M_PI * 0.0025 / n).epsilon(0.05));
    CHECK(mean_escape_rate(m, 10.0, n) == doctest::Approx(M_PI / (6.0 * n)).epsilon(0.03));
    // the closed form agrees with direct integration of rho Gamma
    DisorderModel::CustomSpec spec;
    spec.lo = -0.5;
    spec.hi = 0.5;
    spec.density = [](double) { return 1.0; };
    spec.hilbert = [&](double w) { return m.hilbert(w); };
    spec.hilbert_deriv = [&](double w) { return m.hilbert_deriv(w); };
    spec.symmetric = true;
    const auto custom = DisorderModel::custom(spec);
    CHECK(mean_escape_rate(custom, 0.8, n) == doctest::Approx(mean_escape_rate(m, 0.8, n)).epsilon(1e-7));
  }

  TEST_CASE("escape fit on a synthetic linear curve") {
    EscapeCurve c;
    c.times = geometric_times(0.1, 100.0, 50);
    CHECK(c.times.front() == doctest::Approx(0.1));
    CHECK(c.times.back() == doctest::Approx(100.0));
    for (double t : c.times) c.p.push_back(0.01 + 1e-3 * t);
    fit_escape_rate(c, 1.0);
    CHECK(c.rate == doctest::Approx(1e-3).epsilon(1e-10));
    CHECK(c.intercept == doctest::Approx(0.01).epsilon(1e-8));
    CHECK(c.t1 >= 5.0);
    CHECK(c.t2 <= 50.0);
  }

  TEST_CASE("finite-N escape probability starts at zero and stays in [0, 1]") {
    const auto dec = solve_spectrum(ArrowheadOperator(testing::box_sample(300, 4), 1.0));
    const auto curve = escape_probability(dec, 150, geometric_times(0.05, 60.0, 40));
    CHECK(curve.p.front() < 1e-3);
    for (double p : curve.p) {
      CHECK(p >= -1e-14);
      CHECK(p <= 1.0 + 1e-14);
    }
  }

  TEST_CASE("perturbative cross-check flags its breakdown") {
    BareEnergies e{{-0.3, 0.0, 0.2, 0.4}, true, {}};
    CHECK(fgr_escape_probability(e, 0.1, 1, {1.0}).warning);
    CHECK(fgr_escape_probability(BareEnergies{{-0.3, 0.01, 0.2, 0.4}, true, {}}, 0.1, 1, {1.0}).warning);
    BareEnergies f{{-0.3, -0.1, 0.2, 0.4}, true, {}};
    const auto ok = fgr_escape_probability(f, 0.01, 0, {0.0, 1.0});
    CHECK_FALSE(ok.warning);
    CHECK(ok.p[0] == 0.0);
  }
}
