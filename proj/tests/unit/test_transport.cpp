#include <doctest.h>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "arrowhead/errors.hpp"
#include "arrowhead/transport.hpp"
#include "helpers.hpp"

using namespace arrowhead;

namespace {

TransportConfig config(std::size_t n, std::uint64_t seed, double g, double gt_in = 0.1) {
  auto cfg = TransportConfig::rescaled(sample_bare_energies(DisorderModel::box(1.0), n, seed), g, gt_in, 1.0);
  cfg.validate();
  return cfg;
}

}  // namespace

TEST_SUITE("transport") {
  TEST_CASE("retarded Green's function equals the dense inverse") {
    const auto cfg = config(30, 3, 1.0, 10.0);
    const Eigen::MatrixXcd h = cfg.op().dense();
    for (double w : {-0.6, 0.05, 1.4}) {
      const Eigen::MatrixXcd gr = (w * Eigen::MatrixXcd::Identity(31, 31) - h).inverse();
      for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, 0}, {5, 0}, {30, 0}, {29, 29}, {12, 17}})
        CHECK(std::abs(retarded_greens_transport(cfg, w, i, j) - gr(i, j)) < 1e-10 * std::abs(gr(i, j)) + 1e-13);
    }
  }

  TEST_CASE("residue formulas match frequency quadrature") {
    for (std::uint64_t seed : {1, 2}) {
      const auto cfg = config(15, seed, 1.0, 0.1);
      const auto sol = solve_transport(cfg);
      const auto q = populations_quadrature(cfg);
      for (std::size_t j = 0; j < 15; ++j) CHECK(testing::rel(sol.populations[j], q.populations[j]) < 1e-6);
      CHECK(testing::rel(sol.n_cavity, q.n_cavity) < 1e-6);
      CHECK(testing::rel(sol.j_out, cfg.gamma_out * q.populations[14]) < 1e-6);
    }
  }

  TEST_CASE("current conservation and share decomposition") {
    const auto cfg = config(60, 9, 1.0);
    const auto sol = solve_transport(cfg);
    CHECK(sol.j_in == doctest::Approx(-sol.j_out).epsilon(1e-10));
    double s = 0.0;
    for (double x : sol.shares) s += x;
    CHECK(s == doctest::Approx(sol.j_out).epsilon(1e-9));
    CHECK(sol.dark_current + sol.polariton_current == doctest::Approx(sol.j_out).epsilon(1e-9));
    for (double n : sol.populations) CHECK(n >= 0.0);
    const auto j = nlohmann::json::parse(sol.json(cfg));
    CHECK(j.contains("populations"));
  }

  TEST_CASE("limits and validation") {
    auto cfg = config(20, 4, 0.0);
    const auto zero_g = solve_transport(cfg);
    CHECK(zero_g.populations[0] == doctest::Approx(1.0));
    CHECK(zero_g.j_out == 0.0);
    auto no_in = config(20, 4, 1.0, 0.0);
    CHECK(solve_transport(no_in).j_out == 0.0);
    TransportConfig bad = config(10, 1, 1.0);
    bad.out_site = 0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = config(10, 1, 1.0);
    bad.gamma_out = -1.0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = config(10, 1, 1.0);
    bad.in_site = 10;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
  }

  TEST_CASE("repeated bare energies leave an undamped dark state") {
    // two uncoupled-to-reservoir sites at the same energy: one pinned state carries no current
    BareEnergies e{{0.1, 0.1, -0.3, 0.25}, false, {}};
    auto cfg = TransportConfig::rescaled(e, 1.0, 0.1, 1.0);
    cfg.in_site = 2;
    cfg.validate();
    const auto sol = solve_transport(cfg);
    const auto q = populations_quadrature(cfg);
    for (std::size_t j = 0; j < 4; ++j) CHECK(testing::rel(sol.populations[j], q.populations[j]) < 1e-6);
    CHECK(sol.j_in == doctest::Approx(-sol.j_out).epsilon(1e-10));
  }

  TEST_CASE("nearly coinciding complex eigenvalues fall back to quadrature or throw") {
    // at tiny g the secular root next to the doubled energy sits within 1e-12 of the pinned one
    BareEnergies e{{0.1, 0.1, -0.3, 0.25}, false, {}};
    auto cfg = TransportConfig::rescaled(e, 1e-7, 0.1, 1.0);
    cfg.in_site = 2;
    cfg.validate();
    REQUIRE(transport_spectrum(cfg).near_degenerate);
    const auto sol = solve_transport(cfg);
    CHECK(sol.used_quadrature);
    CHECK(sol.j_in == doctest::Approx(-sol.j_out).epsilon(1e-6));
    CHECK_THROWS_AS(solve_transport(cfg, DegenerateHandling::Throw), IllConditionedError);
  }
}
