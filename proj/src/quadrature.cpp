#include "conebs/quadrature.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "conebs/errors.hpp"

namespace conebs {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::infeasible_shape: return "infeasible-shape";
    case ErrorKind::invalid_shape: return "invalid-shape";
    case ErrorKind::singular_argument: return "singular-argument";
    case ErrorKind::divergent_integral: return "divergent-integral";
    case ErrorKind::accuracy_not_reached: return "accuracy-not-reached";
    case ErrorKind::grid: return "grid";
    case ErrorKind::misuse: return "misuse";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::no_bound_state: return "no-bound-state";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw Error(ErrorKind::domain, "gauss_legendre: n must be positive");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = half * w;
    rule.weights[n - 1 - i] = half * w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = mid;
  return rule;
}

double richardson(double coarse, double fine, double order) {
  if (order <= 0.0 || !std::isfinite(order)) return fine;
  const double f = std::pow(2.0, order);
  return fine + (fine - coarse) / (f - 1.0);
}

double empirical_order(double q1, double q2, double q3) {
  const double d1 = q2 - q1;
  const double d2 = q3 - q2;
  if (d1 == 0.0 || d2 == 0.0 || (d1 > 0) != (d2 > 0) || std::abs(d2) >= std::abs(d1)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return std::log2(std::abs(d1) / std::abs(d2));
}

}  // namespace conebs
