#pragma once

#include <vector>

namespace conebs {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule with n nodes on [a, b], nodes ascending.
QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Richardson combination of two estimates at step ratio 2 for a method of the given order.
/// order <= 0 means "no extrapolation" and returns the fine value.
double richardson(double coarse, double fine, double order);

/// Empirical convergence order from three nested estimates (step ratio 2).
/// Returns NaN when the differences do not shrink monotonically.
double empirical_order(double q1, double q2, double q3);

}  // namespace conebs
