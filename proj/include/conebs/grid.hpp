#pragma once

#include <vector>

namespace conebs {

/// Tensor quadrature on the cone parameter domain (0, R) x [0, L).
///
/// Radial weights integrate dr; the surface measure r dr ds is
/// `measure(i) * s_weight`. Every radial node owns the cell
/// [r_lo[i], r_hi[i]] and every angular node the cell of width s_weight
/// centred on it. Node index of (i, a) is i * n_s + a.
struct Grid {
  double R = 0.0;
  double L = 0.0;
  int n_r = 0;
  int n_s = 0;
  double grading = 1.0;

  std::vector<double> r_nodes;
  std::vector<double> r_weights;
  std::vector<double> r_lo;
  std::vector<double> r_hi;

  std::vector<double> s_nodes;
  double s_weight = 0.0;

  int size() const noexcept { return n_r * n_s; }

  /// r_weights[i] * r_nodes[i]
  double measure(int i) const noexcept { return r_weights[i] * r_nodes[i]; }

  /// Surface weight of node (i, a); independent of a.
  double node_weight(int i) const noexcept { return measure(i) * s_weight; }

  /// Sum of all node weights; equals L R^2 / 2 for exact rules.
  double total_measure() const;
};

/// Gauss-Legendre radial nodes mapped through t -> R t^grading, equispaced
/// midpoint angular nodes.
Grid build_grid(double R, double L, int n_r, int n_s, double grading = 2.0);

/// Radial panels of length `panel` with `nodes_per_panel` Gauss-Legendre nodes
/// each; the first panel is graded towards the tip. Grids built for R1 < R2
/// share their nodes on [0, R1] when R1 is a multiple of the panel length.
Grid build_panel_grid(double R, double L, int nodes_per_panel, int n_s, double grading = 2.0,
                      double panel = 1.0);

/// Angular node count used by the experiment policies: about two nodes per
/// radial node for L = pi, scaled with L, a multiple of 4, at least 16.
int default_angular_nodes(int n_r, double L);

}  // namespace conebs
