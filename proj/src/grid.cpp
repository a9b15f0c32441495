#include "conebs/grid.hpp"

#include <cmath>
#include <numbers>

#include "conebs/errors.hpp"
#include "conebs/quadrature.hpp"

namespace conebs {

namespace {

// Appends n Gauss-Legendre nodes of t in [0, 1] mapped to r = r0 + span * t^grading,
// with cells taken from the cumulative weight partition of [0, 1].
void append_graded(Grid& g, int n, double r0, double span, double grading) {
  const QuadratureRule rule = gauss_legendre(n, 0.0, 1.0);
  double edge = 0.0;
  for (int k = 0; k < n; ++k) {
    const double t = rule.nodes[k];
    const double next_edge = (k == n - 1) ? 1.0 : edge + rule.weights[k];
    g.r_nodes.push_back(r0 + span * std::pow(t, grading));
    g.r_weights.push_back(span * grading * std::pow(t, grading - 1.0) * rule.weights[k]);
    g.r_lo.push_back(r0 + span * std::pow(edge, grading));
    g.r_hi.push_back(r0 + span * std::pow(next_edge, grading));
    edge = next_edge;
  }
}

void fill_angular(Grid& g, double L, int n_s) {
  g.L = L;
  g.n_s = n_s;
  g.s_weight = L / n_s;
  g.s_nodes.resize(n_s);
  for (int a = 0; a < n_s; ++a) g.s_nodes[a] = (a + 0.5) * g.s_weight;
}

void check_common(double R, double L, int n_s, double grading) {
  if (!(R > 0.0) || !std::isfinite(R)) throw Error(ErrorKind::domain, "grid: R must be positive and finite");
  if (!(L > 0.0)) throw Error(ErrorKind::domain, "grid: L must be positive");
  if (n_s < 4) throw Error(ErrorKind::domain, "grid: n_s must be >= 4");
  if (!(grading >= 1.0)) throw Error(ErrorKind::domain, "grid: grading must be >= 1");
}

}  // namespace

double Grid::total_measure() const {
  double sum = 0.0;
  for (int i = 0; i < n_r; ++i) sum += measure(i);
  return sum * s_weight * n_s;
}

Grid build_grid(double R, double L, int n_r, int n_s, double grading) {
  check_common(R, L, n_s, grading);
  if (n_r < 4) throw Error(ErrorKind::domain, "grid: n_r must be >= 4");
  Grid g;
  g.R = R;
  g.grading = grading;
  append_graded(g, n_r, 0.0, R, grading);
  g.n_r = n_r;
  fill_angular(g, L, n_s);
  return g;
}

Grid build_panel_grid(double R, double L, int nodes_per_panel, int n_s, double grading, double panel) {
  check_common(R, L, n_s, grading);
  if (nodes_per_panel < 4) throw Error(ErrorKind::domain, "grid: nodes_per_panel must be >= 4");
  if (!(panel > 0.0)) throw Error(ErrorKind::domain, "grid: panel length must be positive");
  Grid g;
  g.R = R;
  g.grading = grading;
  const int full = static_cast<int>(std::floor(R / panel * (1.0 + 1e-12)));
  double r0 = 0.0;
  for (int p = 0; p < full; ++p) {
    append_graded(g, nodes_per_panel, r0, panel, p == 0 ? grading : 1.0);
    r0 += panel;
  }
  const double rest = R - r0;
  if (rest > 1e-12 * R) {
    const int n = std::max(4, static_cast<int>(std::ceil(nodes_per_panel * rest / panel)));
    append_graded(g, n, r0, rest, full == 0 ? grading : 1.0);
  }
  g.n_r = static_cast<int>(g.r_nodes.size());
  fill_angular(g, L, n_s);
  return g;
}

int default_angular_nodes(int n_r, double L) {
  const int n = 4 * static_cast<int>(std::lround(n_r * L / (2.0 * std::numbers::pi)));
  return n < 16 ? 16 : n;
}

}  // namespace conebs
