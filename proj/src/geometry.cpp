#include "conebs/geometry.hpp"

#include <algorithm>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "conebs/errors.hpp"

namespace conebs {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kSpeedSamples = 4096;  // per period of the speed function
constexpr int kPhiTable = 1024;

double wrap(double s, double L) {
  double r = std::fmod(s, L);
  if (r < 0.0) r += L;
  return r;
}

double family_speed(double phi, double theta0, double eps, int k) {
  const double dtheta = -eps * k * std::sin(k * phi);
  const double st = std::sin(theta0 + eps * std::cos(k * phi));
  return std::sqrt(dtheta * dtheta + st * st);
}

// Mean speed over one period of the speed function (period 2 pi / k); the
// periodic trapezoid rule is spectrally accurate here.
double family_mean_speed(double theta0, double eps, int k) {
  const double period = kTwoPi / k;
  double sum = 0.0;
  for (int m = 0; m < kSpeedSamples; ++m) {
    sum += family_speed(period * m / kSpeedSamples, theta0, eps, k);
  }
  return sum / kSpeedSamples;
}

}  // namespace

const char* to_string(LoopKind kind) {
  switch (kind) {
    case LoopKind::circle: return "circle";
    case LoopKind::perturbed_circle: return "perturbed-circle";
    case LoopKind::samples: return "user-supplied-samples";
  }
  return "unknown";
}

bool Loop::is_circular() const noexcept {
  return kind_ == LoopKind::circle || (kind_ == LoopKind::perturbed_circle && shape_.eps == 0.0);
}

double Loop::speed(double phi) const {
  return family_speed(phi, shape_.theta0, shape_.eps, shape_.k);
}

double Loop::s_of_phi(double phi) const {
  // sum_j b_j sin(j x) with x = k phi and b_j = speed_cos_[j-1] / (j k), by Clenshaw
  const double x = shape_.k * phi;
  const double two_cos = 2.0 * std::cos(x);
  double u1 = 0.0;
  double u2 = 0.0;
  for (std::size_t j = speed_sin_.size(); j-- > 0;) {
    const double u0 = speed_sin_[j] + two_cos * u1 - u2;
    u2 = u1;
    u1 = u0;
  }
  return speed_mean_ * phi + u1 * std::sin(x);
}

double Loop::phi_of_s(double s) const {
  const double sw = wrap(s, length_);
  const double pos = sw / length_ * kPhiTable;
  const int idx = std::min(static_cast<int>(pos), kPhiTable - 1);
  const double frac = pos - idx;
  double phi = phi_table_[idx] + frac * (phi_table_[idx + 1] - phi_table_[idx]);
  for (int iter = 0; iter < 20; ++iter) {
    const double step = (s_of_phi(phi) - sw) / speed(phi);
    phi -= step;
    if (std::abs(step) < 1e-15) break;
  }
  return phi;
}

Vec3 Loop::point(double s) const {
  switch (kind_) {
    case LoopKind::circle: {
      const double rho = circle_radius_;
      const double a = s / rho;
      return {rho * std::cos(a), rho * std::sin(a), std::cos(shape_.theta0)};
    }
    case LoopKind::perturbed_circle: {
      const double phi = phi_of_s(s);
      const double theta = shape_.theta0 + shape_.eps * std::cos(shape_.k * phi);
      const double st = std::sin(theta);
      return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
    }
    case LoopKind::samples: {
      const double w = kTwoPi * wrap(s, length_) / length_;
      Vec3 p = trig_cos_[0];
      for (std::size_t j = 1; j < trig_cos_.size(); ++j) {
        p += trig_cos_[j] * std::cos(j * w) + trig_sin_[j] * std::sin(j * w);
      }
      return p.normalized();
    }
  }
  return Vec3::Zero();
}

std::vector<Vec3> Loop::points(const std::vector<double>& s) const {
  std::vector<Vec3> out;
  out.reserve(s.size());
  for (double v : s) out.push_back(point(v));
  return out;
}

Loop make_circle(double L) {
  if (!(L > 0.0) || L > kTwoPi) {
    throw Error(ErrorKind::domain, "make_circle: length must lie in (0, 2 pi]");
  }
  Loop loop;
  loop.kind_ = LoopKind::circle;
  loop.length_ = L;
  loop.circle_radius_ = std::min(1.0, L / kTwoPi);
  loop.shape_.theta0 = std::asin(loop.circle_radius_);
  return loop;
}

Loop make_perturbed_loop(double L, double eps, int k) {
  if (!(L > 0.0) || L > kTwoPi) {
    throw Error(ErrorKind::domain, "make_perturbed_loop: length must lie in (0, 2 pi]");
  }
  if (!(eps >= 0.0)) throw Error(ErrorKind::domain, "make_perturbed_loop: eps must be >= 0");
  if (k < 2) throw Error(ErrorKind::domain, "make_perturbed_loop: wave number k must be >= 2");
  if (eps == 0.0) {
    Loop circle = make_circle(L);
    Loop loop;
    loop.kind_ = LoopKind::perturbed_circle;
    loop.length_ = L;
    loop.circle_radius_ = circle.circle_radius_;
    loop.shape_ = {circle.shape_.theta0, 0.0, k};
    loop.speed_mean_ = loop.circle_radius_;
    loop.phi_table_.resize(kPhiTable + 1);
    for (int i = 0; i <= kPhiTable; ++i) loop.phi_table_[i] = kTwoPi * i / kPhiTable;
    return loop;
  }
  if (eps >= 0.5 * std::numbers::pi) {
    throw Error(ErrorKind::infeasible_shape, "make_perturbed_loop: eps must be below pi/2");
  }

  // theta must stay inside (0, pi); the length is symmetric about theta0 = pi/2
  // and increases on (eps, pi/2].
  const double lo = eps + 1e-6;
  const double hi = 0.5 * std::numbers::pi;
  auto residual = [&](double theta0) { return kTwoPi * family_mean_speed(theta0, eps, k) - L; };
  const double f_lo = residual(lo);
  const double f_hi = residual(hi);
  if (f_lo > 0.0 || f_hi < 0.0) {
    std::ostringstream msg;
    msg << "make_perturbed_loop: length " << L << " unreachable for eps=" << eps << ", k=" << k
        << " (attainable range [" << f_lo + L << ", " << f_hi + L << "])";
    throw Error(ErrorKind::infeasible_shape, msg.str());
  }
  double theta0 = hi;
  if (f_hi != 0.0) {
    std::uintmax_t max_iter = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) < 1e-15; };
    const auto bracket = boost::math::tools::toms748_solve(residual, lo, hi, f_lo, f_hi, tol, max_iter);
    theta0 = 0.5 * (bracket.first + bracket.second);
  }

  Loop loop;
  loop.kind_ = LoopKind::perturbed_circle;
  loop.shape_ = {theta0, eps, k};

  // Cosine series of the speed over one period 2 pi / k.
  std::vector<double> samples(kSpeedSamples);
  const double period = kTwoPi / k;
  double mean = 0.0;
  for (int m = 0; m < kSpeedSamples; ++m) {
    samples[m] = family_speed(period * m / kSpeedSamples, theta0, eps, k);
    mean += samples[m];
  }
  mean /= kSpeedSamples;
  loop.speed_mean_ = mean;
  std::vector<double> cos_table(kSpeedSamples);
  for (int q = 0; q < kSpeedSamples; ++q) cos_table[q] = std::cos(kTwoPi * q / kSpeedSamples);
  std::vector<double> coeffs;
  for (int j = 1; j < kSpeedSamples / 2; ++j) {
    double a = 0.0;
    for (int m = 0; m < kSpeedSamples; ++m) a += samples[m] * cos_table[(j * m) % kSpeedSamples];
    coeffs.push_back(2.0 * a / kSpeedSamples);
  }
  std::size_t keep = coeffs.size();
  while (keep > 0 && std::abs(coeffs[keep - 1]) < 1e-14 * mean) --keep;  // DFT rounding floor
  coeffs.resize(keep);
  loop.speed_cos_ = std::move(coeffs);
  loop.speed_sin_.resize(loop.speed_cos_.size());
  for (std::size_t j = 0; j < loop.speed_cos_.size(); ++j) {
    loop.speed_sin_[j] = loop.speed_cos_[j] / static_cast<double>((j + 1) * k);
  }
  loop.length_ = kTwoPi * mean;

  // phi(s) table by safeguarded Newton on the monotone s(phi).
  loop.phi_table_.resize(kPhiTable + 1);
  loop.phi_table_[0] = 0.0;
  loop.phi_table_[kPhiTable] = kTwoPi;
  for (int i = 1; i < kPhiTable; ++i) {
    const double target = loop.length_ * i / kPhiTable;
    double a = loop.phi_table_[i - 1];
    double b = kTwoPi;
    double phi = std::clamp(kTwoPi * i / kPhiTable, a, b);
    for (int iter = 0; iter < 100; ++iter) {
      const double g = loop.s_of_phi(phi) - target;
      if (g > 0.0) b = phi; else a = phi;
      double next = phi - g / loop.speed(phi);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(next - phi) < 1e-15) {
        phi = next;
        break;
      }
      phi = next;
    }
    loop.phi_table_[i] = phi;
  }
  validate_loop(loop);
  return loop;
}

Loop make_sampled_loop(const std::vector<double>& s, const std::vector<Vec3>& pts, double L) {
  const std::size_t n = pts.size();
  if (n < 8 || s.size() != n) {
    throw Error(ErrorKind::invalid_shape, "make_sampled_loop: need at least 8 samples with matching s values");
  }
  const double ds = s[1] - s[0];
  if (!(ds > 0.0)) throw Error(ErrorKind::invalid_shape, "make_sampled_loop: s must increase");
  if (std::abs(s[0]) > 1e-12 * ds) throw Error(ErrorKind::invalid_shape, "make_sampled_loop: s must start at 0");
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(s[i] - s[0] - i * ds) > 1e-9 * ds * n) {
      throw Error(ErrorKind::invalid_shape, "make_sampled_loop: samples must be equispaced in arc length");
    }
  }
  if (L <= 0.0) L = ds * static_cast<double>(n);
  if (std::abs(L - ds * static_cast<double>(n)) > 1e-9 * L) {
    throw Error(ErrorKind::invalid_shape, "make_sampled_loop: length inconsistent with sample spacing");
  }
  if (L > kTwoPi * (1.0 + 1e-12)) throw Error(ErrorKind::domain, "make_sampled_loop: length exceeds 2 pi");

  Loop loop;
  loop.kind_ = LoopKind::samples;
  loop.length_ = L;
  loop.sample_s_ = s;
  loop.sample_pts_ = pts;
  const std::size_t half = n / 2;
  loop.trig_cos_.assign(half + 1, Vec3::Zero());
  loop.trig_sin_.assign(half + 1, Vec3::Zero());
  for (std::size_t j = 0; j <= half; ++j) {
    Vec3 a = Vec3::Zero();
    Vec3 b = Vec3::Zero();
    for (std::size_t m = 0; m < n; ++m) {
      const double w = kTwoPi * static_cast<double>((j * m) % n) / static_cast<double>(n);
      a += pts[m] * std::cos(w);
      b += pts[m] * std::sin(w);
    }
    double scale = 2.0 / static_cast<double>(n);
    if (j == 0 || (n % 2 == 0 && j == half)) scale = 1.0 / static_cast<double>(n);
    loop.trig_cos_[j] = a * scale;
    loop.trig_sin_[j] = (n % 2 == 0 && j == half) ? Vec3::Zero() : Vec3(b * scale);
  }
  validate_loop(loop);
  return loop;
}

LoopCheck inspect_loop(const Loop& loop, int n_probe) {
  LoopCheck check;
  const double L = loop.length();
  const double h = 1e-4;
  std::vector<Vec3> pts(n_probe);
  for (int i = 0; i < n_probe; ++i) {
    const double s = L * i / n_probe;
    pts[i] = loop.point(s);
    check.max_radius_error = std::max(check.max_radius_error, std::abs(pts[i].norm() - 1.0));
    // Fourth-order central differences, refined until two steps agree; sharp
    // turns near the poles need steps well below the default.
    auto derivative = [&](double step) {
      const Vec3 d = (8.0 * (loop.point(s + step) - loop.point(s - step)) -
                      (loop.point(s + 2.0 * step) - loop.point(s - 2.0 * step))) /
                     (12.0 * step);
      return d.norm();
    };
    double step = h;
    double speed = derivative(step);
    for (int refine = 0; refine < 4; ++refine) {
      step *= 0.25;
      const double next = derivative(step);
      const bool settled = std::abs(next - speed) < 1e-10;
      speed = next;
      if (settled) break;
    }
    check.max_speed_error = std::max(check.max_speed_error, std::abs(speed - 1.0));
  }
  check.min_separated_chord = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_probe; ++i) {
    for (int j = i + 1; j < n_probe; ++j) {
      const double sep = std::min(j - i, n_probe - (j - i)) * L / n_probe;
      if (sep <= L / 50.0) continue;
      check.min_separated_chord = std::min(check.min_separated_chord, (pts[i] - pts[j]).norm());
    }
  }
  return check;
}

void validate_loop(const Loop& loop, int n_probe) {
  const LoopCheck c = inspect_loop(loop, n_probe);
  std::ostringstream msg;
  if (c.max_radius_error > 1e-12) {
    msg << "loop leaves the unit sphere (max | |tau| - 1 | = " << c.max_radius_error << ")";
  } else if (c.max_speed_error > 1e-8) {
    msg << "loop is not unit speed (max speed deviation " << c.max_speed_error << ")";
  } else if (!(c.min_separated_chord > 1e-6)) {
    msg << "loop self-intersects (min separated chord " << c.min_separated_chord << ")";
  } else {
    return;
  }
  throw Error(ErrorKind::invalid_shape, msg.str());
}

double chord_sq_loop(const Loop& loop, double s, double t) {
  // Same value as 2 - 2 <a, b> on the sphere, without the cancellation for close points.
  return (loop.point(s) - loop.point(t)).squaredNorm();
}

Cone::Cone(double radius, Loop cross_section) : radius_(radius), loop_(std::move(cross_section)) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw Error(ErrorKind::domain, "Cone: radius must be positive and finite");
  }
}

double cone_chord_sq(double r, double s, double rp, double t, const Loop& loop) {
  const double dr = r - rp;
  return dr * dr + r * rp * chord_sq_loop(loop, s, t);
}

void write_loop(std::ostream& os, const Loop& loop) {
  if (loop.kind() == LoopKind::samples) {
    write_loop_samples(os, loop, static_cast<int>(loop.sample_s().size()));
    return;
  }
  os << std::setprecision(17);
  os << "# loop v1\n";
  os << "kind = " << to_string(loop.kind()) << "\n";
  os << "L = " << loop.length() << "\n";
  os << "theta0 = " << loop.shape().theta0 << "\n";
  os << "eps = " << loop.shape().eps << "\n";
  os << "k = " << loop.shape().k << "\n";
}

void write_loop_samples(std::ostream& os, const Loop& loop, int n) {
  os << std::setprecision(17);
  os << "# loop-samples v1\n";
  os << "# L = " << loop.length() << "\n";
  os << "# s x y z\n";
  const bool original = loop.kind() == LoopKind::samples && n == static_cast<int>(loop.sample_s().size());
  for (int i = 0; i < n; ++i) {
    const double s = original ? loop.sample_s()[i] : loop.length() * i / n;
    const Vec3 p = original ? loop.sample_points()[i] : loop.point(s);
    os << s << ' ' << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::io, "loop record: bad numeric value for '" + key + "': " + value);
  }
}

}  // namespace

Loop read_loop(std::istream& is) {
  std::string line;
  std::string header;
  while (std::getline(is, line)) {
    header = trim(line);
    if (!header.empty()) break;
  }
  if (header == "# loop v1") {
    std::map<std::string, std::string> kv;
    while (std::getline(is, line)) {
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::io, "loop record: expected key = value, got: " + t);
      kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    if (!kv.count("kind") || !kv.count("L")) throw Error(ErrorKind::io, "loop record: missing kind or L");
    const double L = parse_number("L", kv["L"]);
    if (kv["kind"] == "circle") return make_circle(L);
    if (kv["kind"] == "perturbed-circle") {
      const double eps = kv.count("eps") ? parse_number("eps", kv["eps"]) : 0.0;
      const int k = kv.count("k") ? static_cast<int>(parse_number("k", kv["k"])) : 2;
      Loop loop = make_perturbed_loop(L, eps, k);
      if (kv.count("theta0")) {
        const double theta0 = parse_number("theta0", kv["theta0"]);
        if (std::abs(theta0 - loop.shape().theta0) > 1e-8) {
          throw Error(ErrorKind::io, "loop record: theta0 inconsistent with L, eps, k");
        }
      }
      return loop;
    }
    throw Error(ErrorKind::io, "loop record: unknown kind '" + kv["kind"] + "'");
  }
  if (header == "# loop-samples v1") {
    double L = 0.0;
    std::vector<double> s;
    std::vector<Vec3> pts;
    while (std::getline(is, line)) {
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t[0] == '#') {
        const auto eq = t.find('=');
        if (eq != std::string::npos && trim(t.substr(1, eq - 1)) == "L") {
          L = parse_number("L", trim(t.substr(eq + 1)));
        }
        continue;
      }
      std::istringstream row(t);
      double sv, x, y, z;
      if (!(row >> sv >> x >> y >> z)) throw Error(ErrorKind::io, "loop samples: malformed row: " + t);
      s.push_back(sv);
      pts.emplace_back(x, y, z);
    }
    return make_sampled_loop(s, pts, L);
  }
  throw Error(ErrorKind::io, "loop record: unrecognized header '" + header + "'");
}

Loop read_loop_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open loop file: " + path);
  return read_loop(in);
}

}  // namespace conebs
