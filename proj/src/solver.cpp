#include "conebs/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "conebs/errors.hpp"

namespace conebs {

ProblemSpec::ProblemSpec(double alpha_, Cone cone_, Grid grid_)
    : alpha(alpha_), cone(std::move(cone_)), grid(std::move(grid_)) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::domain, "coupling alpha must be positive");
  if (std::abs(cone.cross_section().length() - grid.L) > 1e-9 * grid.L ||
      std::abs(cone.radius() - grid.R) > 1e-12 * grid.R) {
    throw Error(ErrorKind::grid, "grid does not match the cone (L or R differ)");
  }
}

MuFunction::MuFunction(const Cone& cone, const Grid& grid, const EigenOptions& opt) : grid_(grid), opt_(opt) {
  if (cone.cross_section().is_circular()) {
    radial_ = std::make_unique<RadialDiscretization>(cone, grid);
  } else {
    full_ = std::make_unique<FullDiscretization>(cone, grid);
  }
}

BsMatrix MuFunction::matrix(double kappa) const {
  return radial_ ? radial_->assemble(kappa, 0) : full_->assemble(kappa);
}

SpectralResult MuFunction::eigenpair(double kappa) {
  const BsMatrix A = matrix(kappa);
  SpectralResult res = largest_eigenpair(A, last_.size() ? &last_ : nullptr, opt_);
  last_ = res.vector;
  ++evaluations_;
  return res;
}

double critical_alpha(const Cone& cone, const Grid& grid) {
  MuFunction mu(cone, grid);
  const double mu0 = mu(0.0);
  if (!(mu0 > 0.0)) throw Error(ErrorKind::numeric, "mu(0) is not positive");
  return 1.0 / mu0;
}

bool bound_state_exists(double mu0, double alpha) { return mu0 > (1.0 / alpha) * (1.0 + kExistenceGuard); }

bool bound_state_exists(const ProblemSpec& spec) {
  MuFunction mu(spec.cone, spec.grid);
  return bound_state_exists(mu(0.0), spec.alpha);
}

GroundState ground_state_or_none(MuFunction& mu, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::domain, "coupling alpha must be positive");
  const double target = 1.0 / alpha;
  GroundState out;
  out.mu0 = mu(0.0);
  if (!bound_state_exists(out.mu0, alpha)) return out;

  double lo = 0.0;
  double glo = out.mu0 - target;
  double hi = 1.0;
  double ghi = mu(hi) - target;
  int doublings = 0;
  while (ghi > 0.0) {
    if (++doublings > 60) throw Error(ErrorKind::numeric, "ground state: bracket expansion failed after 60 doublings");
    lo = hi;
    glo = ghi;
    hi *= 2.0;
    ghi = mu(hi) - target;
  }
  if (ghi == 0.0) {
    out.kappa = out.bracket_lo = out.bracket_hi = hi;
    out.mu_at_kappa = target;
    out.energy = -hi * hi;
    out.iterations = doublings;
    return out;
  }

  int iterations = 0;
  int side = 0;
  bool force_bisect = false;
  double best_x = lo;
  double best_g = glo;
  while (hi - lo >= 1e-10 * (1.0 + lo)) {
    const double width = hi - lo;
    double x = 0.5 * (lo + hi);
    if (!force_bisect) {
      const double secant = (lo * ghi - hi * glo) / (ghi - glo);
      if (secant > lo && secant < hi) x = secant;
    }
    const double gx = mu(x) - target;
    ++iterations;
    if (std::abs(gx) < std::abs(best_g)) {
      best_x = x;
      best_g = gx;
    }
    if (gx > 0.0) {
      lo = x;
      glo = gx;
      if (side == 1) ghi *= 0.5;
      side = 1;
    } else if (gx < 0.0) {
      hi = x;
      ghi = gx;
      if (side == -1) glo *= 0.5;
      side = -1;
    } else {
      lo = hi = x;
      break;
    }
    // Fall back to bisection when a step fails to halve the bracket.
    force_bisect = !force_bisect && (hi - lo) > 0.5 * width;
    if (iterations > 400) throw Error(ErrorKind::numeric, "ground state: root bracketing did not converge");
  }
  // Halving of glo/ghi by the Illinois rule leaves the signs intact, so the
  // bracket invariant g(lo) > 0 > g(hi) holds throughout.
  out.kappa = best_x;
  out.mu_at_kappa = best_g + target;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.iterations = iterations + doublings;
  out.energy = -best_x * best_x;
  return out;
}

GroundState ground_state_energy(MuFunction& mu, double alpha) {
  GroundState gs = ground_state_or_none(mu, alpha);
  if (!gs.energy) {
    std::ostringstream msg;
    msg << "no bound state: mu(0) = " << gs.mu0 << " does not exceed 1/alpha = " << 1.0 / alpha;
    throw Error(ErrorKind::no_bound_state, msg.str());
  }
  return gs;
}

GroundState ground_state_energy(const ProblemSpec& spec) {
  MuFunction mu(spec.cone, spec.grid);
  return ground_state_energy(mu, spec.alpha);
}

EnergyEstimate ground_state_levels(double alpha, const Cone& cone, const std::vector<Grid>& grids) {
  if (grids.empty()) throw Error(ErrorKind::domain, "ground_state_levels: need at least one grid");
  EnergyEstimate out;
  for (const Grid& g : grids) {
    MuFunction mu(cone, g);
    out.states.push_back(ground_state_or_none(mu, alpha));
    out.levels.push_back(out.states.back().bottom());
  }
  out.value = out.levels.back();
  out.bound = out.states.back().energy.has_value();
  out.error = out.levels.size() > 1 ? std::abs(out.levels.back() - out.levels[out.levels.size() - 2]) : 0.0;
  return out;
}

namespace {

// Energy uncertainty left by the root-finder's bracket tolerance.
double root_tolerance(const GroundState& gs) {
  if (!gs.energy) return 0.0;
  return 2.0 * gs.kappa * 1e-10 * (1.0 + gs.kappa);
}

class IsoperimetricRun {
 public:
  IsoperimetricRun(double alpha, double R, const Loop& loop, double grading)
      : alpha_(alpha), R_(R), grading_(grading), loop_(loop), circle_cone_(R, make_circle(loop.length())),
        loop_cone_(R, loop) {}

  void add_level(const GridLevel& lv) {
    const double L = loop_.length();
    const int ns = lv.n_s > 0 ? lv.n_s : default_angular_nodes(lv.n_r, L);
    const Grid grid = build_grid(R_, L, lv.n_r, ns, grading_);
    MuFunction mu_c(circle_cone_, grid);
    circle_.push_back(ground_state_or_none(mu_c, alpha_));
    if (loop_.is_circular()) {
      loop_states_.push_back(circle_.back());
    } else {
      MuFunction mu_l(loop_cone_, grid);
      loop_states_.push_back(ground_state_or_none(mu_l, alpha_));
    }
    levels_.push_back({lv.n_r, ns});
  }

  IsoperimetricResult result() const {
    if (levels_.size() < 2) throw Error(ErrorKind::domain, "isoperimetric_compare: need at least two grid levels");
    IsoperimetricResult out;
    for (std::size_t k = 0; k < levels_.size(); ++k) {
      out.level_margins.push_back(circle_[k].bottom() - loop_states_[k].bottom());
    }
    const std::size_t f = levels_.size() - 1;
    out.levels = levels_;
    out.alpha_cr = 1.0 / circle_[f].mu0;
    out.e_circle = circle_[f].bottom();
    out.e_loop = loop_states_[f].bottom();
    out.margin = out.e_circle - out.e_loop;
    out.e_circle_error = std::abs(circle_[f].bottom() - circle_[f - 1].bottom());
    out.e_loop_error = std::abs(loop_states_[f].bottom() - loop_states_[f - 1].bottom());
    out.error = std::abs(out.level_margins[f] - out.level_margins[f - 1]) + root_tolerance(circle_[f]) +
                root_tolerance(loop_states_[f]);
    out.conclusive = out.margin > 3.0 * out.error;
    return out;
  }

 private:
  double alpha_;
  double R_;
  double grading_;
  Loop loop_;
  Cone circle_cone_;
  Cone loop_cone_;
  std::vector<GroundState> circle_;
  std::vector<GroundState> loop_states_;
  std::vector<GridLevel> levels_;
};

}  // namespace

IsoperimetricResult isoperimetric_compare(double alpha, double R, const Loop& loop,
                                          const std::vector<GridLevel>& levels, double grading) {
  if (levels.size() < 2) throw Error(ErrorKind::domain, "isoperimetric_compare: need at least two grid levels");
  IsoperimetricRun run(alpha, R, loop, grading);
  for (const GridLevel& lv : levels) run.add_level(lv);
  return run.result();
}

IsoperimetricResult isoperimetric_adaptive(double alpha, double R, const Loop& loop,
                                           const std::vector<GridLevel>& levels, int max_n_r, double grading) {
  if (levels.size() < 2) throw Error(ErrorKind::domain, "isoperimetric_adaptive: need at least two grid levels");
  IsoperimetricRun run(alpha, R, loop, grading);
  for (const GridLevel& lv : levels) run.add_level(lv);
  IsoperimetricResult out = run.result();
  GridLevel next = levels.back();
  while (!out.conclusive && out.margin > 0.0) {
    next.n_r = next.n_r * 3 / 2;
    if (next.n_s > 0) next.n_s = 4 * ((next.n_s * 3 / 2 + 3) / 4);
    if (next.n_r > max_n_r) break;
    run.add_level(next);
    out = run.result();
  }
  return out;
}

Grid density_grid(double R, double L, const DensityLevel& level) {
  const double n = level.angular_density * R * L;
  const int ns = std::max(16, 4 * static_cast<int>(std::lround(n / 4.0)));
  return build_panel_grid(R, L, level.nodes_per_panel, ns, level.grading, 1.0);
}

double extrapolate_to_zero(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) throw Error(ErrorKind::domain, "extrapolate_to_zero: mismatched samples");
  double value = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    double w = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j != k) w *= (0.0 - x[j]) / (x[k] - x[j]);
    }
    value += w * y[k];
  }
  return value;
}

LimitStudyResult limit_study(double alpha, const Loop& loop, const std::vector<double>& R_values,
                             const std::vector<DensityLevel>& levels) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::domain, "coupling alpha must be positive");
  if (R_values.empty() || levels.empty()) throw Error(ErrorKind::domain, "limit_study: need radii and grid levels");
  for (std::size_t k = 1; k < R_values.size(); ++k) {
    if (!(R_values[k] > R_values[k - 1])) throw Error(ErrorKind::domain, "limit_study: radii must increase");
  }
  const double L = loop.length();
  LimitStudyResult out;
  out.reference = -0.25 * alpha * alpha;
  for (double R : R_values) {
    const Cone cone(R, loop);
    std::vector<Grid> grids;
    for (const DensityLevel& lv : levels) grids.push_back(density_grid(R, L, lv));
    const EnergyEstimate e = ground_state_levels(alpha, cone, grids);
    LimitPoint p;
    p.R = R;
    p.energy = e.value;
    p.error = e.error;
    p.bound = e.bound;
    p.n_r = grids.back().n_r;
    p.n_s = grids.back().n_s;
    out.points.push_back(p);
  }
  for (std::size_t k = 1; k < out.points.size(); ++k) {
    const LimitPoint& a = out.points[k - 1];
    const LimitPoint& b = out.points[k];
    if (b.energy > a.energy + a.error + b.error) {
      out.monotone = false;
      std::ostringstream msg;
      msg << "discretization failure: E(" << b.R << ") = " << b.energy << " exceeds E(" << a.R << ") = " << a.energy
          << " beyond error bars";
      out.flag = msg.str();
      break;
    }
  }
  const std::size_t n = out.points.size();
  const std::size_t take = std::min<std::size_t>(3, n);
  std::vector<double> x;
  std::vector<double> y;
  double propagated = 0.0;
  for (std::size_t k = n - take; k < n; ++k) {
    x.push_back(1.0 / out.points[k].R);
    y.push_back(out.points[k].energy);
  }
  out.extrapolated = extrapolate_to_zero(x, y);
  for (std::size_t k = 0; k < take; ++k) {
    double w = 1.0;
    for (std::size_t j = 0; j < take; ++j) {
      if (j != k) w *= -x[j] / (x[k] - x[j]);
    }
    propagated += std::abs(w) * out.points[n - take + k].error;
  }
  double model = 0.0;
  if (take >= 2) {
    const std::vector<double> x2(x.end() - 2, x.end());
    const std::vector<double> y2(y.end() - 2, y.end());
    model = std::abs(out.extrapolated - extrapolate_to_zero(x2, y2));
  }
  out.extrapolation_error = propagated + model;
  return out;
}

}  // namespace conebs
