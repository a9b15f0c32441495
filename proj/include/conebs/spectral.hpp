#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>

#include "conebs/bs_operator.hpp"

namespace conebs {

struct SpectralResult {
  double mu = 0.0;
  Eigen::VectorXd vector;  // unit norm, largest-magnitude entry positive
  double residual = 0.0;   // ||A v - mu v||_2
  double gap = 0.0;        // mu - second eigenvalue
  double second = 0.0;
  std::map<double, int> count_above;
  int iterations = 0;      // matrix-vector products, 0 for the dense path
  bool dense = false;
};

struct EigenOptions {
  int dense_limit = 512;     // full decomposition at or below this size
  double tolerance = 1e-12;  // relative residual for the Krylov path
  int basis = 40;
  int max_restarts = 200;
};

/// Largest eigenpair and the second eigenvalue of a symmetric matrix. An
/// optional start vector (e.g. the Perron vector at a nearby kappa) speeds up
/// the Krylov path.
SpectralResult largest_eigenpair(const Eigen::MatrixXd& A, const Eigen::VectorXd* start = nullptr,
                                 const EigenOptions& opt = {});
SpectralResult largest_eigenpair(const BsMatrix& A, const Eigen::VectorXd* start = nullptr,
                                 const EigenOptions& opt = {});

/// Number of eigenvalues strictly above `threshold` (> 0), from a full decomposition.
int eigencount_above(const BsMatrix& A, double threshold);

/// ||P_m A P_n||_F / ||A||_F where P_k projects each radial shell onto the
/// sampled angular mode exp(2 pi i k s / L).
double mode_coupling_residual(const Cone& cone, const Grid& grid, double kappa, int m, int n);
double mode_coupling_residual(const BsMatrix& full, const Grid& grid, int m, int n);

/// Largest per-shell mass in nonzero angular modes, relative to the total mass
/// of the vector. Zero for a rotationally invariant vector.
double angular_variation(const Eigen::VectorXd& perron, const Grid& grid);

}  // namespace conebs
