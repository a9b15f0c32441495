#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "conebs/bs_operator.hpp"
#include "conebs/spectral.hpp"

namespace conebs {

/// Coupling strength, cone and grid of one eigenvalue problem.
struct ProblemSpec {
  double alpha = 1.0;
  Cone cone;
  Grid grid;

  ProblemSpec(double alpha_, Cone cone_, Grid grid_);
};

/// kappa -> mu(kappa) on a fixed cone and grid. Circular cones go through the
/// mode-0 radial matrix, everything else through the full matrix; the previous
/// Perron vector seeds the next Krylov solve. Not thread-safe; use one per thread.
class MuFunction {
 public:
  MuFunction(const Cone& cone, const Grid& grid, const EigenOptions& opt = {});

  SpectralResult eigenpair(double kappa);
  double operator()(double kappa) { return eigenpair(kappa).mu; }

  BsMatrix matrix(double kappa) const;
  bool radial() const noexcept { return radial_ != nullptr; }
  int evaluations() const noexcept { return evaluations_; }
  const Grid& grid() const noexcept { return grid_; }

 private:
  Grid grid_;
  std::unique_ptr<RadialDiscretization> radial_;
  std::unique_ptr<FullDiscretization> full_;
  EigenOptions opt_;
  Eigen::VectorXd last_;
  int evaluations_ = 0;
};

/// 1 / mu(0).
double critical_alpha(const Cone& cone, const Grid& grid);

/// Relative guard band of the existence test mu(0) > 1/alpha.
inline constexpr double kExistenceGuard = 1e-12;

bool bound_state_exists(const ProblemSpec& spec);
bool bound_state_exists(double mu0, double alpha);

struct GroundState {
  std::optional<double> energy;  // -kappa^2, empty without a bound state
  double kappa = 0.0;
  double mu_at_kappa = 0.0;
  double mu0 = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  int iterations = 0;

  /// Bottom of the spectrum: the energy, or 0 when there is no bound state.
  double bottom() const { return energy.value_or(0.0); }
};

/// Bisection with Illinois steps inside a maintained bracket g(lo) > 0 > g(hi),
/// g = mu - 1/alpha. Throws no_bound_state when mu(0) <= 1/alpha.
GroundState ground_state_energy(const ProblemSpec& spec);
GroundState ground_state_energy(MuFunction& mu, double alpha);

/// As above but reports the absence of a bound state in the result.
GroundState ground_state_or_none(MuFunction& mu, double alpha);

/// Energy on a sequence of refined grids; `value` is the finest level and
/// `error` the difference to the next-finest one.
struct EnergyEstimate {
  double value = 0.0;
  double error = 0.0;
  bool bound = false;
  std::vector<double> levels;
  std::vector<GroundState> states;
};

EnergyEstimate ground_state_levels(double alpha, const Cone& cone, const std::vector<Grid>& grids);

/// Radial and angular resolution of one refinement level.
struct GridLevel {
  int n_r = 16;
  int n_s = 0;  // 0 selects default_angular_nodes(n_r, L)
};

struct IsoperimetricResult {
  double e_circle = 0.0;
  double e_loop = 0.0;
  double margin = 0.0;        // e_circle - e_loop
  double error = 0.0;         // combined discretization error of the margin
  double e_circle_error = 0.0;
  double e_loop_error = 0.0;
  double alpha_cr = 0.0;      // circular cone, finest grid
  bool conclusive = false;    // margin > 3 error
  std::vector<double> level_margins;
  std::vector<GridLevel> levels;  // as used, with n_s resolved
};

/// Ground-state energies of the circular cone and the cone over `loop` (same
/// L and R) on matched grids. The error of the margin is the change of the
/// margin between the two finest levels plus the root-finding tolerance.
IsoperimetricResult isoperimetric_compare(double alpha, double R, const Loop& loop,
                                          const std::vector<GridLevel>& levels, double grading = 2.0);

/// Same comparison, appending levels refined by 3/2 while the result is
/// inconclusive and the finest n_r stays within max_n_r.
IsoperimetricResult isoperimetric_adaptive(double alpha, double R, const Loop& loop,
                                           const std::vector<GridLevel>& levels, int max_n_r = 48,
                                           double grading = 2.0);

/// Panel grid with fixed node density per unit length, for growing R.
struct DensityLevel {
  int nodes_per_panel = 8;
  double angular_density = 8.0;  // angular nodes per unit rim length R L
  double grading = 2.0;
};

Grid density_grid(double R, double L, const DensityLevel& level);

struct LimitPoint {
  double R = 0.0;
  double energy = 0.0;  // finest level, 0 without a bound state
  double error = 0.0;
  bool bound = false;
  int n_r = 0;
  int n_s = 0;
};

struct LimitStudyResult {
  std::vector<LimitPoint> points;
  double reference = 0.0;           // -alpha^2 / 4
  double extrapolated = 0.0;        // three-point fit in 1/R over the last three radii
  double extrapolation_error = 0.0;
  bool monotone = true;             // nonincreasing within error bars
  std::string flag;                 // empty, or a description of the failure
};

LimitStudyResult limit_study(double alpha, const Loop& loop, const std::vector<double>& R_values,
                             const std::vector<DensityLevel>& levels);

/// Value at x = 0 of the polynomial through (x_k, y_k).
double extrapolate_to_zero(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace conebs
