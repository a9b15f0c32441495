#pragma once

#include "conebs/geometry.hpp"

namespace conebs {

/// f(x) = e^{-a sqrt(bx + c)} / sqrt(bx + c).
struct FParams {
  double a = 0.0;
  double b = 1.0;
  double c = 0.0;
};

struct FDerivatives {
  double first = 0.0;
  double second = 0.0;
};

double f_eval(const FParams& p, double x);

/// Closed-form f' and f''.
FDerivatives f_derivatives(const FParams& p, double x);

/// Double arc-length integral at two resolutions.
struct PhiEstimate {
  double coarse = 0.0;       // n nodes per variable
  double fine = 0.0;         // 2n nodes per variable
  double extrapolated = 0.0;
  double error = 0.0;        // |fine - coarse|
  int n = 0;
};

/// Phi_f[T] = int_0^L int_0^L f(|tau(s) - tau(t)|^2) ds dt by the periodic
/// trapezoid rule with the two variables offset by half a step.
///
/// With c = 0 and b > 0 the integrand behaves like 1/|s - t| and the integral
/// diverges logarithmically; that case throws divergent_integral. The gap
/// between two loops of equal length stays finite, see phi_f_gap.
PhiEstimate phi_f(const Loop& loop, const FParams& p, int n_quad = 256);

/// Phi_f[loop] - Phi_f[reference] evaluated pointwise on shared nodes, so the
/// matching diagonal singularities cancel. Both loops must have equal length.
PhiEstimate phi_f_gap(const Loop& loop, const Loop& reference, const FParams& p, int n_quad = 256);

/// K(r, r') = (r r' / 4 pi) (Phi_f[loop] - Phi_f[circle]) with a = kappa,
/// b = r r', c = (r - r')^2.
double k_kappa(double r, double rp, double kappa, const Loop& circle, const Loop& loop, int n_quad = 256);

}  // namespace conebs
