#include <doctest.h>

#include <Eigen/Dense>

#include "arrowhead/errors.hpp"
#include "arrowhead/numerics.hpp"
#include "arrowhead/photon.hpp"
#include "helpers.hpp"

using namespace arrowhead;

TEST_SUITE("photon-greens") {
  TEST_CASE("finite-N Green's function equals the dense resolvent") {
    const ArrowheadOperator op(testing::box_sample(60, 2), 0.9);
    const auto dec = solve_spectrum(op);
    const Eigen::MatrixXcd h = op.dense();
    for (cplx z : {cplx(0.1, 0.02), cplx(-1.3, 0.5), cplx(0.4, -0.01)}) {
      const Eigen::MatrixXcd res = (z * Eigen::MatrixXcd::Identity(61, 61) - h).inverse();
      CHECK(std::abs(photon_greens_finiteN(op, z) - res(60, 60)) < 1e-11);
      CHECK(std::abs(photon_greens_eigensum(dec, z) - res(60, 60)) < 1e-11);
    }
    CHECK_THROWS_AS(photon_greens_finiteN(op, cplx(op.bare().values[5], 0.0)), PoleError);
    CHECK_THROWS_AS(photon_greens_eigensum(dec, cplx(dec.energies()[5], 0.0)), PoleError);
  }

  TEST_CASE("self-energy of the box") {
    const auto m = DisorderModel::box(1.0);
    for (cplx z : {cplx(0.2, 0.1), cplx(-0.7, 0.3), cplx(0.0, -0.05)}) {
      const auto re = num::integrate([&](double w) { return (1.0 / (z - w)).real(); }, -0.5, 0.5, 1e-13, 30).value;
      const auto im = num::integrate([&](double w) { return (1.0 / (z - w)).imag(); }, -0.5, 0.5, 1e-13, 30).value;
      CHECK(std::abs(pi_bar(m, z) - cplx(re, im) / M_PI) < 1e-11);
    }
    const cplx up = pi_bar(m, 0.1, Side::Upper), dn = pi_bar(m, 0.1, Side::Lower);
    CHECK(up.real() == doctest::Approx(m.hilbert(0.1)));
    CHECK(up.imag() == doctest::Approx(-1.0));
    CHECK(dn.imag() == doctest::Approx(1.0));
    CHECK_THROWS_AS(pi_bar(m, 0.1), DomainError);
    // just above the axis the boundary value is approached
    CHECK(std::abs(pi_bar(m, cplx(0.1, 1e-9)) - up) < 1e-7);
  }

  TEST_CASE("large-N spectral continuum is -Im D(w + i0) / pi") {
    for (const auto& m : {DisorderModel::box(1.0), semicircle_model(1.5)}) {
      for (double g : {0.2, 1.0}) {
        for (double w : {-0.35, 0.0, 0.3}) {
          const cplx d = photon_greens_largeN(m, g, w, Side::Upper);
          CHECK(spectral_continuum(m, g, w) == doctest::Approx(-d.imag() / M_PI).epsilon(1e-12));
          const double h = 1e-5;
          const double fd = (spectral_continuum(m, g, w + h) - spectral_continuum(m, g, w - h)) / (2 * h);
          CHECK(spectral_continuum_deriv(m, g, w) == doctest::Approx(fd).epsilon(1e-6));
          const cplx dfd = (photon_greens_largeN(m, g, w + h, Side::Upper) - photon_greens_largeN(m, g, w - h, Side::Upper)) / (2 * h);
          CHECK(std::abs(photon_greens_largeN_deriv(m, g, w) - dfd) < 1e-6 * std::abs(dfd));
        }
      }
    }
  }

  TEST_CASE("sum rules") {
    const auto dec = solve_spectrum(ArrowheadOperator(testing::box_sample(100, 21), 1.0));
    CHECK(std::abs(sum_rule_finiteN(dec, 0.03).total - 1.0) < 1e-6);
    for (double g : {0.1, 0.5, 1.5, 5.0}) {
      CHECK(std::abs(sum_rule_largeN(DisorderModel::box(1.0), g).total - 1.0) < 1e-6);
      CHECK(std::abs(sum_rule_largeN(semicircle_model(1.0), g).total - 1.0) < 1e-6);
    }
    const auto pw = photon_weights(dec);
    CHECK(pw.total() == doctest::Approx(1.0).epsilon(1e-13));
  }

  TEST_CASE("photon weights of the continuum") {
    const auto m = DisorderModel::box(1.0);
    // strong coupling: 1/2 - W^2 / (24 g^2)
    const auto strong = photon_weight_polaritons(m, 5.0);
    CHECK(std::abs(strong.upper - (0.5 - 1.0 / (24.0 * 25.0))) < 1e-3);
    CHECK(std::abs(strong.lower - (0.5 - 1.0 / (24.0 * 25.0))) < 1e-3);
    const auto weak = photon_weight_polaritons(m, 0.1);
    CHECK(weak.upper < 1e-15);
    CHECK(weak.lower < 1e-15);
    // polariton weight is 1/(1 - pi g^2 rho~') at the continuum root
    const auto mid = photon_weight_polaritons(m, 0.8);
    CHECK(mid.upper == doctest::Approx(1.0 / (1.0 - M_PI * 0.64 * m.hilbert_deriv(mid.energy_upper))).epsilon(1e-12));
    // dark-state shell weight times N rho is the continuum spectral density
    for (double w : {-0.2, 0.1}) {
      CHECK(photon_weight_dark_analytic(m, 0.8, 100, w) * 100 * m.density(w) ==
            doctest::Approx(spectral_continuum(m, 0.8, w)).epsilon(1e-13));
    }
  }

  TEST_CASE("finite-N spectral function") {
    const auto dec = solve_spectrum(ArrowheadOperator(testing::box_sample(50, 3), 1.0));
    const std::vector<double> grid{-1.0, 0.0, 0.2};
    const auto sf = spectral_function_finiteN(dec, grid, 0.05);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const cplx d = photon_greens_eigensum(dec, cplx(grid[i], 0.05));
      CHECK(sf.values[i] == doctest::Approx(-d.imag() / M_PI).epsilon(1e-12));
    }
    const auto large = spectral_function_largeN(DisorderModel::box(1.0), 1.0, grid);
    CHECK(large.delta_positions.size() == 2);
    CHECK(large.csv().rfind("w,A", 0) == 0);
  }

  TEST_CASE("covariance kernel against the closed form at pi g^2 = 1") {
    const auto m = DisorderModel::box(1.0);
    const double g = 1.0 / std::sqrt(M_PI);
    const std::size_t n = 100;
    const double pts[][2] = {{0.1, 0.3}, {-0.2, 0.25}, {0.05, -0.4}, {-0.33, -0.1}};
    for (const auto& p : pts) {
      const double w1 = p[0], w2 = p[1];
      const double r1 = m.density(w1), r2 = m.density(w2), t1 = m.hilbert(w1), t2 = m.hilbert(w2);
      const double a1 = spectral_continuum(m, g, w1), a2 = spectral_continuum(m, g, w2);
      const double p1 = r1 * r1 + t1 * t1 - w1 * w1, p2 = r2 * r2 + t2 * t2 - w2 * w2;
      const double num = (2.0 / M_PI) * ((w2 - t2) * p1 - (w1 - t1) * p2) / (w1 - w2) - p1 * p2;
      const double den = (r1 * r1 + (t1 - w1) * (t1 - w1)) * (r2 * r2 + (t2 - w2) * (t2 - w2));
      const auto k = spectral_covariance_largeN(m, g, w1, w2, n);
      CHECK(k.smooth == doctest::Approx(a1 * a2 * num / den / n).epsilon(1e-10));
      CHECK(k.delta_weight == 0.0);
    }
    const auto diag = spectral_covariance_largeN(m, g, 0.2, 0.2, n);
    const double a = spectral_continuum(m, g, 0.2);
    CHECK(diag.delta_weight == doctest::Approx(a * a / (n * m.density(0.2))).epsilon(1e-12));
    // the coincidence limit is continuous
    const auto near = spectral_covariance_largeN(m, g, 0.2, 0.2 + 1e-6, n);
    CHECK(near.smooth == doctest::Approx(diag.smooth).epsilon(1e-5));
  }

  TEST_CASE("smoothed covariance is symmetric") {
    const std::vector<double> grid{-0.3, -0.1, 0.1, 0.3};
    const auto c = smoothed_covariance_largeN(DisorderModel::box(1.0), 1.5, 100, grid, 0.03);
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-12 * c.cwiseAbs().maxCoeff());
    // along the diagonal, deviations are positively correlated
    for (int i = 0; i < 4; ++i) CHECK(c(i, i) > 0.0);
    CHECK(covariance_csv(grid, c).find('\n') != std::string::npos);
  }
}
