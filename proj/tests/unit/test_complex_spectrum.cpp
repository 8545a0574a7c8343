#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"

using namespace arrowhead;

namespace {

// Largest distance from a computed eigenvalue to its nearest dense eigenvalue, matched greedily.
double match(const std::vector<cplx>& got, Eigen::VectorXcd ref) {
  double worst = 0.0;
  std::vector<bool> used(ref.size(), false);
  for (const auto& z : got) {
    double best = 1e300;
    Eigen::Index bi = 0;
    for (Eigen::Index i = 0; i < ref.size(); ++i) {
      if (used[i]) continue;
      const double d = std::abs(ref(i) - z);
      if (d < best) {
        best = d;
        bi = i;
      }
    }
    used[bi] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST_SUITE("complex-spectrum") {
  TEST_CASE("matches a dense complex eigensolver") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      for (double g : {0.3, 1.0, 4.0}) {
        auto bare = sample_bare_energies(DisorderModel::box(1.0), 40, seed);
        const ArrowheadOperator op(bare, g, {{0, cplx(0, -0.05)}, {39, cplx(0, -0.5)}});
        const auto cs = solve_complex_spectrum(op);
        REQUIRE(cs.eigenvalues.size() == 41);
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(op.dense(), false);
        CHECK(match(cs.eigenvalues, es.eigenvalues()) < 1e-11);
        CHECK_FALSE(cs.near_degenerate);
        for (const auto& z : cs.eigenvalues) CHECK(z.imag() <= 1e-15);
        for (std::size_t a = 0; a < 41; ++a)
          for (std::size_t j = 0; j < 40; j += 7)
            CHECK(std::abs(cs.diff(a, j) - (cs.eigenvalues[a] - cs.shifted_diagonal()[j])) <
                  1e-13 * (1.0 + std::abs(cs.eigenvalues[a])));
      }
    }
  }

  TEST_CASE("tiny injection rate keeps the anchored roots accurate") {
    auto bare = sample_bare_energies(DisorderModel::box(1.0), 100, 6);
    const ArrowheadOperator op(bare, 1.0, {{0, cplx(0, -0.5e-5)}, {99, cplx(0, -0.5)}});
    const auto cs = solve_complex_spectrum(op);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(op.dense(), false);
    CHECK(match(cs.eigenvalues, es.eigenvalues()) < 1e-10);
    const auto csv = complex_spectrum_csv(cs);
    CHECK(csv.rfind("a,re,im,residual", 0) == 0);
  }
}
