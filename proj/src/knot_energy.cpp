#include "conebs/knot_energy.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "conebs/errors.hpp"
#include "conebs/quadrature.hpp"

namespace conebs {

namespace {

void check_params(const FParams& p) {
  if (!(p.a >= 0.0) || !(p.b >= 0.0) || !(p.c >= 0.0)) {
    throw Error(ErrorKind::domain, "FParams: a, b, c must be nonnegative");
  }
  if (p.b == 0.0 && p.c == 0.0) throw Error(ErrorKind::domain, "FParams: b and c cannot both vanish");
}

double argument(const FParams& p, double x) {
  const double y = p.b * x + p.c;
  if (!(y > 0.0)) throw Error(ErrorKind::singular_argument, "f: b x + c must be positive");
  return y;
}

// h^2 sum_{i,j} g(chord^2(s_i, t_j)) with s_i = i h, t_j = (j + 1/2) h.
template <typename G>
double offset_trapezoid(const Loop& loop, int n, G&& g) {
  const double L = loop.length();
  const double h = L / n;
  std::vector<double> s(n);
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    s[i] = i * h;
    t[i] = (i + 0.5) * h;
  }
  const std::vector<Vec3> ps = loop.points(s);
  const std::vector<Vec3> pt = loop.points(t);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += g((ps[i] - pt[j]).squaredNorm());
    total += row;
  }
  return h * h * total;
}

}  // namespace

double f_eval(const FParams& p, double x) {
  check_params(p);
  const double y = argument(p, x);
  const double q = std::sqrt(y);
  return std::exp(-p.a * q) / q;
}

FDerivatives f_derivatives(const FParams& p, double x) {
  check_params(p);
  const double y = argument(p, x);
  const double q = std::sqrt(y);
  const double e = std::exp(-p.a * q);
  const double a = p.a;
  const double b = p.b;
  FDerivatives d;
  d.first = -e * (a * b / (2.0 * y) + b / (2.0 * y * q));
  d.second = e * (a * a * b * b / (4.0 * y * q) + 3.0 * a * b * b / (4.0 * y * y) + 3.0 * b * b / (4.0 * y * y * q));
  return d;
}

PhiEstimate phi_f(const Loop& loop, const FParams& p, int n_quad) {
  check_params(p);
  if (n_quad < 16) throw Error(ErrorKind::domain, "phi_f: n_quad must be >= 16");
  if (p.c == 0.0) {
    throw Error(ErrorKind::divergent_integral,
                "phi_f: with c = 0 the integrand is ~ 1/|s - t| on the diagonal and the double integral diverges "
                "logarithmically; compare loops with phi_f_gap instead");
  }
  auto g = [&p](double x) {
    const double q = std::sqrt(p.b * x + p.c);
    return std::exp(-p.a * q) / q;
  };
  PhiEstimate out;
  out.n = n_quad;
  out.coarse = offset_trapezoid(loop, n_quad, g);
  out.fine = offset_trapezoid(loop, 2 * n_quad, g);
  out.extrapolated = out.fine;  // smooth periodic integrand: no algebraic error term to remove
  out.error = std::abs(out.fine - out.coarse);
  if (out.error > 1e-3 * std::abs(out.fine)) {
    std::ostringstream msg;
    msg << "phi_f: quadrature not converged at n = " << 2 * n_quad << " (" << out.coarse << " vs " << out.fine << ")";
    throw AccuracyError(msg.str(), out.coarse, out.fine);
  }
  return out;
}

PhiEstimate phi_f_gap(const Loop& loop, const Loop& reference, const FParams& p, int n_quad) {
  check_params(p);
  if (n_quad < 16) throw Error(ErrorKind::domain, "phi_f_gap: n_quad must be >= 16");
  if (std::abs(loop.length() - reference.length()) > 1e-9 * reference.length()) {
    throw Error(ErrorKind::domain, "phi_f_gap: loops must have equal length");
  }
  auto g = [&p](double x) {
    const double q = std::sqrt(p.b * x + p.c);
    return std::exp(-p.a * q) / q;
  };
  auto gap_at = [&](int n) {
    const double L = loop.length();
    const double h = L / n;
    std::vector<double> s(n);
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) {
      s[i] = i * h;
      t[i] = (i + 0.5) * h;
    }
    const std::vector<Vec3> ls = loop.points(s);
    const std::vector<Vec3> lt = loop.points(t);
    const std::vector<Vec3> rs = reference.points(s);
    const std::vector<Vec3> rt = reference.points(t);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) row += g((ls[i] - lt[j]).squaredNorm()) - g((rs[i] - rt[j]).squaredNorm());
      total += row;
    }
    return h * h * total;
  };
  PhiEstimate out;
  out.n = n_quad;
  out.coarse = gap_at(n_quad);
  out.fine = gap_at(2 * n_quad);
  // With c = 0 the difference has a |s - t| kink on the diagonal: second order.
  out.extrapolated = p.c == 0.0 ? richardson(out.coarse, out.fine, 2.0) : out.fine;
  out.error = std::abs(out.fine - out.coarse);
  return out;
}

double k_kappa(double r, double rp, double kappa, const Loop& circle, const Loop& loop, int n_quad) {
  if (!(r >= 0.0) || !(rp >= 0.0) || !(kappa >= 0.0)) throw Error(ErrorKind::domain, "k_kappa: r, r', kappa must be >= 0");
  if (r == 0.0 && rp == 0.0) throw Error(ErrorKind::singular_argument, "k_kappa: undefined at r = r' = 0");
  if (!circle.is_circular()) throw Error(ErrorKind::misuse, "k_kappa: reference loop must be a circle");
  const double b = r * rp;
  if (b == 0.0) return 0.0;  // f is constant in x, both energies equal L^2
  const FParams p{kappa, b, (r - rp) * (r - rp)};
  return b / (4.0 * std::numbers::pi) * phi_f_gap(loop, circle, p, n_quad).fine;
}

}  // namespace conebs
