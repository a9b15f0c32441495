#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numbers>

#include "conebs/grid.hpp"
#include "conebs/quadrature.hpp"
#include "support.hpp"

using namespace conebs;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("gauss_legendre integrates polynomials of degree 2n - 1") {
  for (int n : {1, 2, 5, 12}) {
    const QuadratureRule q = gauss_legendre(n, 0.0, 2.0);
    const int deg = 2 * n - 1;
    double sum = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) sum += q.weights[i] * std::pow(q.nodes[i], deg);
    CHECK(sum == doctest::Approx(std::pow(2.0, deg + 1) / (deg + 1)).epsilon(1e-13));
    for (std::size_t i = 1; i < q.nodes.size(); ++i) CHECK(q.nodes[i] > q.nodes[i - 1]);
  }
}

TEST_CASE("richardson and empirical order on a synthetic sequence") {
  // q(h) = 1 + h^1.5 at h = 1, 1/2, 1/4
  const auto q = [](double h) { return 1.0 + std::pow(h, 1.5); };
  CHECK(empirical_order(q(1.0), q(0.5), q(0.25)) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(richardson(q(0.5), q(0.25), 1.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(richardson(2.0, 3.0, 0.0) == 3.0);
  CHECK(std::isnan(empirical_order(1.0, 2.0, 4.0)));
}

TEST_CASE("build_grid: total measure equals the cone area") {
  const Grid disk = build_grid(1.0, 2.0 * kPi, 8, 8, 1.0);
  CHECK(disk.total_measure() == doctest::Approx(kPi).epsilon(1e-12));
  for (int nr : {4, 9, 16}) {
    const Grid g = build_grid(2.0, kPi, nr, 12, 2.0);
    CHECK(g.total_measure() == doctest::Approx(2.0 * kPi).epsilon(1e-12));
  }
}

TEST_CASE("build_grid: nodes strictly inside, weights positive, cells tile the interval") {
  const Grid g = build_grid(1.5, kPi, 10, 16, 2.0);
  CHECK(g.size() == 160);
  for (int i = 0; i < g.n_r; ++i) {
    CHECK(g.r_nodes[i] > 0.0);
    CHECK(g.r_nodes[i] < 1.5);
    CHECK(g.r_weights[i] > 0.0);
    CHECK(g.r_lo[i] < g.r_nodes[i]);
    CHECK(g.r_nodes[i] < g.r_hi[i]);
    if (i > 0) CHECK(g.r_lo[i] == g.r_hi[i - 1]);
  }
  CHECK(g.r_lo.front() == 0.0);
  CHECK(g.r_hi.back() == doctest::Approx(1.5));
  CHECK(g.s_weight == doctest::Approx(kPi / 16));
  CHECK(g.s_nodes.front() == doctest::Approx(0.5 * kPi / 16));
}

TEST_CASE("build_grid: grading clusters nodes towards the tip") {
  const Grid uniform = build_grid(1.0, kPi, 8, 8, 1.0);
  const Grid graded = build_grid(1.0, kPi, 8, 8, 2.0);
  CHECK(graded.r_nodes.front() < uniform.r_nodes.front());
}

TEST_CASE("build_grid: parameter validation") {
  CHECK_ERROR_KIND(build_grid(1.0, kPi, 3, 8), conebs::ErrorKind::domain);
  CHECK_ERROR_KIND(build_grid(1.0, kPi, 8, 3), conebs::ErrorKind::domain);
  CHECK_ERROR_KIND(build_grid(1.0, kPi, 8, 8, 0.5), conebs::ErrorKind::domain);
  CHECK_ERROR_KIND(build_grid(0.0, kPi, 8, 8), conebs::ErrorKind::domain);
}

TEST_CASE("build_panel_grid: nested panels share nodes") {
  const Grid a = build_panel_grid(2.0, kPi, 6, 16);
  const Grid b = build_panel_grid(4.0, kPi, 6, 16);
  CHECK(a.n_r == 12);
  CHECK(b.n_r == 24);
  for (int i = 0; i < a.n_r; ++i) CHECK(a.r_nodes[i] == b.r_nodes[i]);
  CHECK(b.total_measure() == doctest::Approx(0.5 * kPi * 16.0).epsilon(1e-12));
}

TEST_CASE("default_angular_nodes scales with L") {
  CHECK(default_angular_nodes(16, kPi) == 32);
  CHECK(default_angular_nodes(32, kPi) == 64);
  CHECK(default_angular_nodes(16, 2.0 * kPi) == 64);
  CHECK(default_angular_nodes(4, kPi) == 16);
  CHECK(default_angular_nodes(64, 1.5 * kPi) % 4 == 0);
}
