#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

namespace conebs {

using Vec3 = Eigen::Vector3d;

enum class LoopKind { circle, perturbed_circle, samples };

const char* to_string(LoopKind kind);

/// Parameters of the polar-angle family theta(phi) = theta0 + eps * cos(k * phi).
/// For circles eps = 0 and k = 0.
struct ShapeParams {
  double theta0 = 0.0;
  double eps = 0.0;
  int k = 0;
};

/// Closed unit-speed curve on the unit sphere, the cross-section of a cone.
///
/// Loops are immutable after construction. `point(s)` is periodic in s with
/// period `length()` and may be called concurrently.
class Loop {
 public:
  LoopKind kind() const noexcept { return kind_; }
  double length() const noexcept { return length_; }
  const ShapeParams& shape() const noexcept { return shape_; }

  /// True for circles, including the eps = 0 member of the perturbed family.
  bool is_circular() const noexcept;

  /// sin(theta) of the circle; only meaningful when is_circular().
  double circle_radius() const noexcept { return circle_radius_; }

  Vec3 point(double s) const;
  std::vector<Vec3> points(const std::vector<double>& s) const;

  /// Original sample table for kind() == samples.
  const std::vector<double>& sample_s() const noexcept { return sample_s_; }
  const std::vector<Vec3>& sample_points() const noexcept { return sample_pts_; }

 private:
  friend Loop make_circle(double);
  friend Loop make_perturbed_loop(double, double, int);
  friend Loop make_sampled_loop(const std::vector<double>&, const std::vector<Vec3>&, double);

  double phi_of_s(double s) const;
  double s_of_phi(double phi) const;
  double speed(double phi) const;

  LoopKind kind_ = LoopKind::circle;
  double length_ = 0.0;
  ShapeParams shape_;
  double circle_radius_ = 0.0;

  // perturbed family: speed(phi) = a0 + sum_j coeff[j] cos((j+1) k phi)
  double speed_mean_ = 0.0;
  std::vector<double> speed_cos_;
  std::vector<double> speed_sin_;  // speed_cos_[j] / ((j+1) k), integrated series
  std::vector<double> phi_table_;  // phi at equispaced s, closed (size n+1)

  // sampled loops: trigonometric interpolation coefficients per coordinate
  std::vector<double> sample_s_;
  std::vector<Vec3> sample_pts_;
  std::vector<Vec3> trig_cos_;
  std::vector<Vec3> trig_sin_;
};

/// Circle of length L in the upper hemisphere, sin(theta) = L / (2 pi).
Loop make_circle(double L);

/// Member of theta(phi) = theta0 + eps cos(k phi) with theta0 chosen so that the
/// curve has length L; reparametrized to unit speed and validated.
Loop make_perturbed_loop(double L, double eps, int k);

/// Loop from samples equispaced in arc length on [0, L). When L <= 0 it is
/// inferred from the spacing. Interpolated trigonometrically and validated.
Loop make_sampled_loop(const std::vector<double>& s, const std::vector<Vec3>& pts, double L = 0.0);

struct LoopCheck {
  double max_radius_error = 0.0;  // max | |tau| - 1 |
  double max_speed_error = 0.0;   // max | |tau'| - 1 |, central differences
  double min_separated_chord = 0.0;
};

/// Probes on-sphere, unit-speed and self-intersection invariants on n probe points.
LoopCheck inspect_loop(const Loop& loop, int n_probe = 512);

/// Throws invalid_shape when any invariant fails its tolerance.
void validate_loop(const Loop& loop, int n_probe = 512);

/// |tau(s) - tau(t)|^2, which equals 2 - 2 <tau(s), tau(t)> for points on the sphere.
double chord_sq_loop(const Loop& loop, double s, double t);

/// Finite cone Sigma_R(T) = { r T : 0 <= r < R }.
class Cone {
 public:
  Cone(double radius, Loop cross_section);

  double radius() const noexcept { return radius_; }
  const Loop& cross_section() const noexcept { return loop_; }

  /// sigma(r, s) = r tau(s)
  Vec3 point(double r, double s) const { return r * loop_.point(s); }

  /// Surface area L R^2 / 2.
  double area() const noexcept { return 0.5 * loop_.length() * radius_ * radius_; }

 private:
  double radius_;
  Loop loop_;
};

/// (r - r')^2 + r r' |tau(s) - tau(t)|^2, the squared distance between cone points.
double cone_chord_sq(double r, double s, double rp, double t, const Loop& loop);

// Structured text records. Parametric loops are written as key = value lines
// under "# loop v1"; sampled loops as "# loop-samples v1" followed by rows
// "s x y z".
void write_loop(std::ostream& os, const Loop& loop);
void write_loop_samples(std::ostream& os, const Loop& loop, int n);
Loop read_loop(std::istream& is);
Loop read_loop_file(const std::string& path);

}  // namespace conebs
