#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "conebs/bs_operator.hpp"
#include "conebs/quadrature.hpp"
#include "conebs/spectral.hpp"
#include "support.hpp"

using namespace conebs;

namespace {

constexpr double kPi = std::numbers::pi;

double top_eigenvalue(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// Integral of G_kappa over an annular sector of the plane around a point inside
// it, in polar coordinates centred at the point: the inner integral is exact
// and the angular one uses Gauss-Legendre panels split at the corner directions.
double flat_cell_integral(double kappa, double r0, double a0, double r_lo, double r_hi, double a_lo, double a_hi) {
  const Eigen::Vector2d x0(r0 * std::cos(a0), r0 * std::sin(a0));
  auto exit_distance = [&](double phi) {
    const Eigen::Vector2d u(std::cos(phi), std::sin(phi));
    double best = std::numeric_limits<double>::infinity();
    const double b = x0.dot(u);
    const double c_out = x0.squaredNorm() - r_hi * r_hi;
    best = std::min(best, -b + std::sqrt(b * b - c_out));
    if (r_lo > 0.0) {
      const double disc = b * b - (x0.squaredNorm() - r_lo * r_lo);
      if (disc >= 0.0) {
        const double t = -b - std::sqrt(disc);
        if (t > 0.0) best = std::min(best, t);
      }
    }
    for (double a : {a_lo, a_hi}) {
      const Eigen::Vector2d e(std::cos(a), std::sin(a));
      const double cross_ue = u.x() * e.y() - u.y() * e.x();
      if (std::abs(cross_ue) < 1e-15) continue;
      const double t = -(x0.x() * e.y() - x0.y() * e.x()) / cross_ue;
      if (t > 0.0 && (x0 + t * u).dot(e) > 0.0) best = std::min(best, t);
    }
    return best;
  };
  std::vector<double> cuts;
  for (double r : {r_lo, r_hi}) {
    for (double a : {a_lo, a_hi}) {
      const Eigen::Vector2d corner(r * std::cos(a), r * std::sin(a));
      double phi = std::atan2(corner.y() - x0.y(), corner.x() - x0.x());
      if (phi < 0.0) phi += 2.0 * kPi;
      cuts.push_back(phi);
    }
  }
  cuts.push_back(0.0);
  cuts.push_back(2.0 * kPi);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    const int panels = 16;
    for (int p = 0; p < panels; ++p) {
      const double lo = cuts[k - 1] + (cuts[k] - cuts[k - 1]) * p / panels;
      const double hi = cuts[k - 1] + (cuts[k] - cuts[k - 1]) * (p + 1) / panels;
      if (hi <= lo) continue;
      const QuadratureRule q = gauss_legendre(20, lo, hi);
      for (std::size_t j = 0; j < q.nodes.size(); ++j) {
        const double rho = exit_distance(q.nodes[j]);
        const double radial = kappa > 0.0 ? (1.0 - std::exp(-kappa * rho)) / kappa : rho;
        total += q.weights[j] * radial;
      }
    }
  }
  return total / (4.0 * kPi);
}

}  // namespace

TEST_CASE("green_kernel values, singularity and monotonicity") {
  CHECK(green_kernel(0.0, 1.0) == doctest::Approx(0.0795774715).epsilon(1e-9));
  CHECK(green_kernel(1.0, 1.0) == doctest::Approx(std::exp(-1.0) / (4.0 * kPi)).epsilon(1e-15));
  CHECK(green_kernel(1.0, 1.0) == doctest::Approx(0.02927492).epsilon(1e-7));
  CHECK(green_kernel(2.0, 0.5) < green_kernel(1.0, 0.5));
  CHECK_ERROR_KIND(green_kernel(0.0, 0.0), ErrorKind::singular_argument);
  CHECK_ERROR_KIND(green_kernel(1.0, -1.0), ErrorKind::singular_argument);
}

TEST_CASE("assemble_full: exact symmetry and positive entries") {
  for (const Loop& loop : {make_circle(kPi), make_perturbed_loop(kPi, 0.1, 2)}) {
    const Cone cone(1.0, loop);
    const Grid grid = build_grid(1.0, kPi, 8, 16);
    for (double kappa : {0.0, 0.7}) {
      const BsMatrix A = assemble_full(cone, grid, kappa);
      CHECK(A.size() == 128);
      CHECK(A.is_full());
      CHECK(A.symmetric_weighting);
      CHECK((A.entries - A.entries.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(A.entries.minCoeff() > 0.0);
    }
  }
}

TEST_CASE("assemble_full: off-diagonal entries follow the weighted kernel") {
  const Loop loop = make_perturbed_loop(kPi, 0.1, 3);
  const Cone cone(1.3, loop);
  const Grid grid = build_grid(1.3, kPi, 6, 16);
  const double kappa = 0.4;
  const BsMatrix A = assemble_full(cone, grid, kappa);
  for (auto [p, q] : {std::pair{3, 40}, {17, 90}, {0, 95}}) {
    const int i = p / grid.n_s, a = p % grid.n_s;
    const int j = q / grid.n_s, b = q % grid.n_s;
    const double d = (cone.point(grid.r_nodes[i], grid.s_nodes[a]) - cone.point(grid.r_nodes[j], grid.s_nodes[b])).norm();
    const double expect =
        std::sqrt(grid.node_weight(i) * grid.node_weight(j)) * std::exp(-kappa * d) / (4.0 * kPi * d);
    CHECK(A.entries(p, q) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("singular cell matches exact polar integration on the flat disk") {
  const Cone disk(1.0, make_circle(2.0 * kPi));
  const Grid grid = build_grid(1.0, 2.0 * kPi, 8, 32);
  for (int i : {0, 3, 6}) {
    const int a = 5;
    const int node = i * grid.n_s + a;
    const double h = grid.s_weight;
    const double a0 = grid.s_nodes[a];
    for (double kappa : {0.0, 1.0}) {
      const double oracle =
          flat_cell_integral(kappa, grid.r_nodes[i], a0, grid.r_lo[i], grid.r_hi[i], a0 - 0.5 * h, a0 + 0.5 * h);
      const double entry = singular_cell(disk, grid, kappa, node);
      CHECK(testing::rel_diff(entry, oracle) < 1e-3);
      CHECK(entry > 0.0);
    }
    CHECK(singular_cell(disk, grid, 0.5, node) < singular_cell(disk, grid, 0.0, node));
  }
}

TEST_CASE("cell rule integrates the cell area") {
  const Cone cone(1.0, make_perturbed_loop(kPi, 0.1, 2));
  const Grid grid = build_grid(1.0, kPi, 8, 16);
  for (int i : {0, 4, 7}) {
    const CellRule rule = cell_rule(cone, grid, i, 3);
    const double area = 0.5 * (grid.r_hi[i] * grid.r_hi[i] - grid.r_lo[i] * grid.r_lo[i]) * grid.s_weight;
    CHECK(rule.cell_area() == doctest::Approx(area).epsilon(1e-6));
  }
}

TEST_CASE("radial_mode_kernel: great circle against adaptive quadrature") {
  const Cone disk(3.0, make_circle(2.0 * kPi));
  const double oracle = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [](double t) { return 1.0 / (4.0 * kPi * std::sqrt(1.0 + 4.0 * (1.0 - std::cos(t)))); }, 0.0, 2.0 * kPi, 15,
      1e-14);
  CHECK(radial_mode_kernel(disk, 0.0, 0, 1.0, 2.0, 256) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("radial_mode_kernel: tip limit, mode bound and errors") {
  const Cone cone(2.0, make_circle(kPi));
  const double k0 = radial_mode_kernel(cone, 0.3, 0, 1.0, 1e-9, 128);
  CHECK(k0 == doctest::Approx(kPi * std::exp(-0.3) / (4.0 * kPi)).epsilon(1e-6));
  // nonzero modes vanish as r' -> 0, mode 1 linearly
  for (int m : {1, 2, 5}) CHECK(std::abs(radial_mode_kernel(cone, 0.3, m, 1.0, 1e-9, 128)) < 1e-8 * k0);
  const double far = std::abs(radial_mode_kernel(cone, 0.3, 1, 1.0, 1e-6, 128));
  const double near = std::abs(radial_mode_kernel(cone, 0.3, 1, 1.0, 1e-9, 128));
  CHECK(near == doctest::Approx(1e-3 * far).epsilon(1e-2));

  for (double rp : {0.3, 0.9, 1.6}) {
    const double base = radial_mode_kernel(cone, 0.5, 0, 1.0, rp, 256);
    for (int m = 1; m <= 4; ++m) CHECK(std::abs(radial_mode_kernel(cone, 0.5, m, 1.0, rp, 256)) <= base);
  }
  CHECK_ERROR_KIND(radial_mode_kernel(cone, 0.0, 0, 1.0, 1.0, 128), ErrorKind::singular_argument);
  CHECK_ERROR_KIND(radial_mode_kernel(cone, 0.0, 0, 1.0, 0.5, 2), ErrorKind::domain);
  CHECK_ERROR_KIND(radial_mode_kernel(Cone(1.0, make_perturbed_loop(kPi, 0.1, 2)), 0.0, 0, 0.5, 0.2, 64),
                   ErrorKind::misuse);
}

TEST_CASE("assemble_radial: mode 0 reproduces the full spectrum top") {
  const Cone cone(1.0, make_circle(kPi));
  const Grid grid = build_grid(1.0, kPi, 12, 24);
  for (double kappa : {0.0, 0.5}) {
    const double mu_full = top_eigenvalue(assemble_full(cone, grid, kappa).entries);
    const BsMatrix B0 = assemble_radial(cone, grid, kappa, 0);
    CHECK(B0.mode == 0);
    CHECK((B0.entries - B0.entries.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const double mu0 = top_eigenvalue(B0.entries);
    CHECK(testing::rel_diff(mu0, mu_full) < 1e-4);
    for (int m : {1, -1, 2, 3}) CHECK(top_eigenvalue(assemble_radial(cone, grid, kappa, m).entries) <= mu0);
  }
  CHECK_ERROR_KIND(assemble_radial(Cone(1.0, make_perturbed_loop(kPi, 0.1, 2)), grid, 0.0, 0), ErrorKind::misuse);
}

TEST_CASE("row sums at the disk centre approach one half") {
  const Cone disk(1.0, make_circle(2.0 * kPi));
  const Grid grid = build_grid(1.0, 2.0 * kPi, 16, 64);
  const Eigen::VectorXd rows = nystrom_row_sums(disk, grid, 0.0);
  // the innermost shell sits closest to the centre
  CHECK(rows[0] == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("surface constants of the unit disk") {
  const Cone disk(1.0, make_circle(2.0 * kPi));
  const SurfaceConstants sc = surface_constants(disk, build_grid(1.0, 2.0 * kPi, 12, 48));
  CHECK(std::abs(sc.diameter - 2.0) <= sc.diameter_error + 1e-12);
  CHECK(sc.diameter <= 2.0);
  CHECK(sc.potential_bound > 0.0);
  CHECK(std::isfinite(sc.potential_bound));
  // sup over the disk of the potential of the uniform layer is at the centre
  CHECK(sc.potential_bound == doctest::Approx(0.5).epsilon(1e-2));
}

TEST_CASE("kappa dependence: monotone spectrum and the norm envelope") {
  for (const Loop& loop : {make_circle(2.0 * kPi), make_perturbed_loop(kPi, 0.1, 2)}) {
    const Cone cone(1.0, loop);
    const Grid grid = build_grid(1.0, loop.length(), 8, default_angular_nodes(8, loop.length()));
    const FullDiscretization disc(cone, grid);
    const SurfaceConstants sc = surface_constants(cone, grid);
    const Eigen::MatrixXd A0 = disc.assemble(0.0).entries;
    double prev = top_eigenvalue(A0);
    for (double kappa : {0.01, 0.1, 0.5, 1.0}) {
      const Eigen::MatrixXd A = disc.assemble(kappa).entries;
      const double mu = top_eigenvalue(A);
      CHECK(mu < prev);
      prev = mu;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A0 - A, Eigen::EigenvaluesOnly);
      const double norm2 = es.eigenvalues().cwiseAbs().maxCoeff();
      CHECK(norm2 <= 1.1 * sc.potential_bound * (1.0 - std::exp(-kappa * sc.diameter)));
    }
    // |mu(kappa) - mu(0)| shrinks monotonically along a dyadic sequence
    const double mu0 = top_eigenvalue(A0);
    double last = std::numeric_limits<double>::infinity();
    for (double kappa = 1.0; kappa > 1e-3; kappa *= 0.5) {
      const double diff = std::abs(top_eigenvalue(disc.assemble(kappa).entries) - mu0);
      CHECK(diff < last);
      last = diff;
    }
  }
}

TEST_CASE("self-convergence of mu(0) on the disk") {
  const Cone disk(1.0, make_circle(2.0 * kPi));
  std::vector<double> mu;
  for (int n : {16, 32, 64}) {
    mu.push_back(top_eigenvalue(assemble_radial(disk, build_grid(1.0, 2.0 * kPi, n, default_angular_nodes(n, 2.0 * kPi)), 0.0, 0).entries));
  }
  const double order = empirical_order(mu[0], mu[1], mu[2]);
  CHECK(order >= 1.0);
  MESSAGE("disk mu(0) order " << order << ", extrapolated " << richardson(mu[1], mu[2], order));
}

TEST_CASE("binary matrix dump round-trips") {
  const BsMatrix A = assemble_full(Cone(1.0, make_circle(kPi)), build_grid(1.0, kPi, 4, 8), 0.2);
  const std::string path = (std::filesystem::temp_directory_path() / "conebs_test.bsmat").string();
  write_bsmat(path, A);
  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  CHECK(std::memcmp(magic, "BSMAT1\0\0", 8) == 0);
  std::uint64_t dims[2];
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  CHECK(dims[0] == 32);
  CHECK(dims[1] == 32);
  in.close();
  const Eigen::MatrixXd back = read_bsmat(path);
  CHECK((back - A.entries).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}
