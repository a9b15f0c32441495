#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "conebs/geometry.hpp"
#include "conebs/grid.hpp"

namespace conebs {

/// e^{-kappa d} / (4 pi d), the resolvent kernel of -Laplace + kappa^2 in R^3.
double green_kernel(double kappa, double d);

/// Symmetric Nystrom matrix of the single-layer operator on a cone.
///
/// Entries are sqrt(w_i) G(d_ij) sqrt(w_j) off the diagonal and the integral of
/// G over the node's own cell on the diagonal; the matrix is the symmetric
/// similarity transform of the weighted Nystrom operator.
struct BsMatrix {
  double kappa = 0.0;
  Eigen::MatrixXd entries;
  std::optional<int> mode;  // angular mode for radial matrices, empty for the full matrix
  bool symmetric_weighting = true;

  int size() const noexcept { return static_cast<int>(entries.rows()); }
  bool is_full() const noexcept { return !mode.has_value(); }
};

/// Quadrature for the integral of G(|x_i - y|) over the cell of node i.
/// The singular point is the apex of four triangles covering the cell.
struct CellRule {
  std::vector<double> dist;
  std::vector<double> weight;  // includes the surface measure and polar Jacobian

  double integrate(double kappa) const;
  double cell_area() const;  // integral of 1 over the cell, for diagnostics
};

/// Cell rule for radial node i and angular node a of the grid.
CellRule cell_rule(const Cone& cone, const Grid& grid, int i, int a);

/// Diagonal entry for node index `node` (i * n_s + a).
double singular_cell(const Cone& cone, const Grid& grid, double kappa, int node);

/// Full 2D discretization with the geometry cached for repeated kappa values.
class FullDiscretization {
 public:
  FullDiscretization(Cone cone, Grid grid);

  const Cone& cone() const noexcept { return cone_; }
  const Grid& grid() const noexcept { return grid_; }

  BsMatrix assemble(double kappa) const;

  /// Diagonal entry of node p at the given kappa.
  double diagonal(int p, double kappa) const;

 private:
  Cone cone_;
  Grid grid_;
  Eigen::MatrixXd chord_sq_;     // between angular nodes
  std::vector<CellRule> cells_;  // per radial node for circles, per node otherwise
  bool circular_;
};

/// Radial discretization of a circular cone for one angular Fourier mode.
///
/// Uses the grid's angular nodes for the mode integral, so the mode-m matrix is
/// exactly the m-th Fourier block of the full matrix on the same grid.
class RadialDiscretization {
 public:
  RadialDiscretization(Cone cone, Grid grid);

  const Cone& cone() const noexcept { return cone_; }
  const Grid& grid() const noexcept { return grid_; }

  BsMatrix assemble(double kappa, int m) const;

 private:
  Cone cone_;
  Grid grid_;
  std::vector<double> lag_chord_sq_;  // chord^2 at angular lag l * h
  std::vector<CellRule> cells_;
};

BsMatrix assemble_full(const Cone& cone, const Grid& grid, double kappa);
BsMatrix assemble_radial(const Cone& cone, const Grid& grid, double kappa, int m);

/// Integral over t in [0, L) of F(r, r', t) cos(2 pi m t / L) by the periodic
/// trapezoid rule with n_t nodes. F diverges like 1/|t| at r = r', so that case
/// is rejected; mode matrices handle the diagonal with the cell rule.
double radial_mode_kernel(const Cone& circle_cone, double kappa, int m, double r, double rp, int n_t);

struct SurfaceConstants {
  double diameter = 0.0;
  double diameter_error = 0.0;
  double potential_bound = 0.0;  // sup_x of the integral of 1 / (4 pi |x - y|)
  double potential_error = 0.0;
};

/// Diameter from rim and tip points, potential bound from the kappa = 0 row sums
/// of the weighted Nystrom operator. Errors compare against a refined rim and a
/// half-resolution grid respectively.
SurfaceConstants surface_constants(const Cone& cone, const Grid& grid);

/// Row sums of the weighted (unsymmetrized) Nystrom operator.
Eigen::VectorXd nystrom_row_sums(const Cone& cone, const Grid& grid, double kappa);

/// Debug dump: magic "BSMAT1\0\0", uint64 rows, uint64 cols, row-major float64,
/// all little-endian.
void write_bsmat(const std::string& path, const BsMatrix& m);
Eigen::MatrixXd read_bsmat(const std::string& path);

}  // namespace conebs
