#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numbers>

#include "conebs/knot_energy.hpp"
#include "support.hpp"

using namespace conebs;

namespace {

constexpr double kPi = std::numbers::pi;

// L * int_0^L f(chord^2(t)) dt for a circle, by the periodic trapezoid rule.
double circle_phi_1d(double L, const FParams& p, int n) {
  const double st = L / (2.0 * kPi);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = L * (i + 0.5) / n;
    const double chord_sq = 2.0 * st * st * (1.0 - std::cos(t / st));
    const double u = p.b * chord_sq + p.c;
    sum += std::exp(-p.a * std::sqrt(u)) / std::sqrt(u);
  }
  return L * sum * L / n;
}

// Fourth-order central differences, refined once by Richardson.
double fd_first(const FParams& p, double x, double h) {
  auto d = [&](double hh) {
    return (8.0 * (f_eval(p, x + hh) - f_eval(p, x - hh)) - (f_eval(p, x + 2 * hh) - f_eval(p, x - 2 * hh))) / (12.0 * hh);
  };
  return (16.0 * d(0.5 * h) - d(h)) / 15.0;
}

double fd_second(const FParams& p, double x, double h) {
  auto d = [&](double hh) {
    return (-(f_eval(p, x + 2 * hh) + f_eval(p, x - 2 * hh)) + 16.0 * (f_eval(p, x + hh) + f_eval(p, x - hh)) -
            30.0 * f_eval(p, x)) /
           (12.0 * hh * hh);
  };
  return (16.0 * d(0.5 * h) - d(h)) / 15.0;
}

}  // namespace

TEST_CASE("f_eval: direct substitution and errors") {
  CHECK(f_eval({1, 1, 1}, 0.0) == doctest::Approx(0.3678794412).epsilon(1e-10));
  CHECK(f_eval({0, 1, 0}, 4.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f_eval({2, 3, 1}, 1.0) == doctest::Approx(0.0091578194).epsilon(1e-9));
  CHECK(f_eval({0, 0, 1}, 7.0) == doctest::Approx(1.0));
  CHECK_ERROR_KIND(f_eval({1, 1, 0}, 0.0), ErrorKind::singular_argument);
  CHECK_ERROR_KIND(f_eval({1, 0, 0}, 1.0), ErrorKind::domain);
  CHECK_ERROR_KIND(f_eval({-1, 1, 1}, 1.0), ErrorKind::domain);
}

TEST_CASE("f_derivatives: closed forms at a = b = c = 1, x = 0") {
  const FDerivatives d = f_derivatives({1, 1, 1}, 0.0);
  CHECK(d.first == doctest::Approx(-std::exp(-1.0)).epsilon(1e-14));
  CHECK(d.second == doctest::Approx(1.75 * std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("f_derivatives: signs and agreement with finite differences") {
  double worst1 = 0.0;
  double worst2 = 0.0;
  for (double a : {0.01, 0.1, 1.0, 10.0}) {
    for (double b : {0.01, 0.1, 1.0, 10.0}) {
      for (double c : {0.01, 0.1, 1.0, 10.0}) {
        for (double x : {0.001, 0.01, 0.1, 1.0, 4.0}) {
          const FParams p{a, b, c};
          const FDerivatives d = f_derivatives(p, x);
          CHECK(d.first < 0.0);
          CHECK(d.second > 0.0);
          // resolve both the power-law scale u / b and the exponential scale sqrt(u) / (a b)
          const double u = b * x + c;
          const double h = 0.02 * std::min(u / b, std::sqrt(u) / (a * b));
          worst1 = std::max(worst1, testing::rel_diff(fd_first(p, x, h), d.first));
          worst2 = std::max(worst2, testing::rel_diff(fd_second(p, x, h), d.second));
        }
      }
    }
  }
  CHECK(worst1 < 1e-6);
  CHECK(worst2 < 1e-6);
}

TEST_CASE("phi_f on circles matches the one-dimensional reduction") {
  for (double L : {kPi / 2.0, kPi, 1.5 * kPi}) {
    for (const FParams& p : {FParams{1, 1, 0.25}, FParams{0, 2, 0.5}, FParams{3, 0.5, 1.0}}) {
      const PhiEstimate e = phi_f(make_circle(L), p, 256);
      CHECK(testing::rel_diff(e.fine, circle_phi_1d(L, p, 4096)) < 1e-8);
      CHECK(e.n == 256);
      CHECK(e.error == doctest::Approx(std::abs(e.fine - e.coarse)));
    }
  }
}

TEST_CASE("phi_f: constant integrand and shift invariance") {
  const Loop loop = make_perturbed_loop(kPi, 0.1, 2);
  CHECK(phi_f(loop, {0, 0, 1}, 64).fine == doctest::Approx(kPi * kPi).epsilon(1e-12));

  // the same loop started at s0 = 0.37
  const int n = 512;
  std::vector<double> s(n);
  std::vector<Vec3> pts(n);
  for (int i = 0; i < n; ++i) {
    s[i] = loop.length() * i / n;
    pts[i] = loop.point(s[i] + 0.37);
  }
  const Loop shifted = make_sampled_loop(s, pts, loop.length());
  const FParams p{1, 1, 0.25};
  CHECK(testing::rel_diff(phi_f(shifted, p, 256).fine, phi_f(loop, p, 256).fine) < 1e-10);
}

TEST_CASE("phi_f: circle minimizes among loops of equal length") {
  const Loop circle = make_circle(kPi);
  const Loop loop = make_perturbed_loop(kPi, 0.1, 2);
  const FParams p{1, 1, 0.25};
  const PhiEstimate c = phi_f(circle, p, 256);
  const PhiEstimate t = phi_f(loop, p, 256);
  CHECK(c.fine < t.fine);
  CHECK(t.fine - c.fine > 3.0 * (c.error + t.error));

  const PhiEstimate gap = phi_f_gap(loop, circle, p, 256);
  CHECK(gap.fine == doctest::Approx(t.fine - c.fine).epsilon(1e-8));
  CHECK(gap.fine > 3.0 * gap.error);
}

TEST_CASE("phi_f: c = 0 diverges, the gap stays finite") {
  const Loop circle = make_circle(kPi);
  const Loop loop = make_perturbed_loop(kPi, 0.1, 3);
  const FParams p{0.5, 1.0, 0.0};
  CHECK_ERROR_KIND(phi_f(loop, p, 64), ErrorKind::divergent_integral);
  const PhiEstimate gap = phi_f_gap(loop, circle, p, 256);
  CHECK(std::isfinite(gap.fine));
  CHECK(gap.fine > 3.0 * gap.error);
  CHECK(phi_f_gap(circle, circle, p, 64).fine == 0.0);
  CHECK_ERROR_KIND(phi_f_gap(loop, make_circle(3.0), p, 64), ErrorKind::domain);
  CHECK_ERROR_KIND(phi_f(loop, {1, 1, 1}, 8), ErrorKind::domain);
}

TEST_CASE("k_kappa: zero for circles, positive otherwise, linear prefactor") {
  const Loop circle = make_circle(kPi);
  const Loop loop = make_perturbed_loop(kPi, 0.1, 2);
  CHECK(k_kappa(1.0, 2.0, 0.5, circle, circle) == 0.0);

  const double k = k_kappa(1.0, 2.0, 0.5, circle, loop);
  CHECK(k > 0.0);
  // oracle: the two energies separately (c = 1 keeps both finite)
  const FParams p{0.5, 2.0, 1.0};
  const double oracle = 2.0 / (4.0 * kPi) * (phi_f(loop, p, 512).fine - phi_f(circle, p, 512).fine);
  CHECK(testing::rel_diff(k, oracle) < 1e-6);

  // r = r' > 0 is allowed
  CHECK(k_kappa(0.7, 0.7, 0.0, circle, loop) > 0.0);
  // r' = 0: the integrand no longer depends on the loop
  CHECK(k_kappa(1.0, 0.0, 0.5, circle, loop) == 0.0);
  CHECK_ERROR_KIND(k_kappa(0.0, 0.0, 0.5, circle, loop), ErrorKind::singular_argument);
  CHECK_ERROR_KIND(k_kappa(1.0, 2.0, 0.5, loop, circle), ErrorKind::misuse);
}
