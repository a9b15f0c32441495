#include "conebs/bs_operator.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "conebs/errors.hpp"
#include "conebs/quadrature.hpp"

namespace conebs {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;
constexpr int kCellOrder = 8;     // Gauss-Legendre points per panel direction
constexpr int kChebNodes = 16;    // local interpolation of tau inside an angular cell

static_assert(std::endian::native == std::endian::little, "BSMAT1 export assumes a little-endian host");

const QuadratureRule& cell_gauss() {
  static const QuadratureRule rule = gauss_legendre(kCellOrder, 0.0, 1.0);
  return rule;
}

// Chebyshev interpolant of tau on [s0 - half, s0 + half], used for the many
// near-node evaluations the cell rules need.
class LocalCurve {
 public:
  LocalCurve(const Loop& loop, double s0, double half) : s0_(s0), half_(half) {
    for (int j = 0; j < kChebNodes; ++j) {
      x_[j] = std::cos(std::numbers::pi * (j + 0.5) / kChebNodes);
      p_[j] = loop.point(s0 + half * x_[j]);
      bw_[j] = ((j % 2) ? -1.0 : 1.0) * std::sin(std::numbers::pi * (j + 0.5) / kChebNodes);
    }
    centre_ = loop.point(s0);
  }

  const Vec3& centre() const { return centre_; }

  Vec3 at(double w) const {
    const double x = w / half_;
    Vec3 num = Vec3::Zero();
    double den = 0.0;
    for (int j = 0; j < kChebNodes; ++j) {
      const double diff = x - x_[j];
      if (diff == 0.0) return p_[j];
      const double c = bw_[j] / diff;
      num += c * p_[j];
      den += c;
    }
    return num / den;
  }

 private:
  double s0_;
  double half_;
  std::array<double, kChebNodes> x_{};
  std::array<double, kChebNodes> bw_{};
  std::array<Vec3, kChebNodes> p_{};
  Vec3 centre_;
};

// Builds the four-triangle polar rule around node (r_i, s_a). `chord_sq(w)`
// returns |tau(s_a) - tau(s_a + w)|^2.
template <typename ChordSq>
CellRule build_cell_rule(double ri, double lo, double hi, double h, ChordSq&& chord_sq) {
  const QuadratureRule& g = cell_gauss();
  const double u1 = lo - ri;
  const double u2 = hi - ri;
  const double v1 = -0.5 * h * ri;
  const double v2 = 0.5 * h * ri;
  CellRule rule;

  // Triangle with apex at the node and the edge {fixed = p_signed, free in [x1, x2]}.
  auto add_triangle = [&](bool fixed_is_u, double p_signed, double x1, double x2) {
    const double p = std::abs(p_signed);
    if (p <= 0.0) return;
    auto add_half = [&](double x_end) {
      const double X = std::abs(x_end);
      const double sign = x_end < 0.0 ? -1.0 : 1.0;
      double a = 0.0;
      double width = p;
      while (a < X) {
        const double b = std::min(X, a + width);
        for (int ix = 0; ix < kCellOrder; ++ix) {
          const double x = sign * (a + (b - a) * g.nodes[ix]);
          const double wx = (b - a) * g.weights[ix];
          for (int it = 0; it < kCellOrder; ++it) {
            const double t = g.nodes[it];
            const double u = t * (fixed_is_u ? p_signed : x);
            const double v = t * (fixed_is_u ? x : p_signed);
            const double rp = ri + u;
            const double d2 = u * u + ri * rp * chord_sq(v / ri);
            const double d = std::sqrt(d2);
            rule.dist.push_back(d);
            rule.weight.push_back(wx * g.weights[it] * p * t * rp / ri);
          }
        }
        a = b;
        width *= 2.0;
      }
    };
    add_half(x1);
    add_half(x2);
  };

  add_triangle(true, u2, v1, v2);
  add_triangle(true, u1, v1, v2);
  add_triangle(false, v2, u1, u2);
  add_triangle(false, v1, u1, u2);
  return rule;
}

double circle_chord_sq(double rho, double w) {
  const double s = std::sin(0.5 * w / rho);
  return 4.0 * rho * rho * s * s;
}

}  // namespace

double green_kernel(double kappa, double d) {
  if (!(d > 0.0)) throw Error(ErrorKind::singular_argument, "green_kernel: distance must be positive");
  return std::exp(-kappa * d) / (kFourPi * d);
}

double CellRule::integrate(double kappa) const {
  double sum = 0.0;
  if (kappa == 0.0) {
    for (std::size_t q = 0; q < dist.size(); ++q) sum += weight[q] / dist[q];
  } else {
    for (std::size_t q = 0; q < dist.size(); ++q) sum += weight[q] * std::exp(-kappa * dist[q]) / dist[q];
  }
  return sum / kFourPi;
}

double CellRule::cell_area() const {
  double sum = 0.0;
  for (double w : weight) sum += w;
  return sum;
}

CellRule cell_rule(const Cone& cone, const Grid& grid, int i, int a) {
  const Loop& loop = cone.cross_section();
  const double ri = grid.r_nodes[i];
  const double h = grid.s_weight;
  if (loop.is_circular()) {
    const double rho = loop.circle_radius();
    return build_cell_rule(ri, grid.r_lo[i], grid.r_hi[i], h, [rho](double w) { return circle_chord_sq(rho, w); });
  }
  const LocalCurve local(loop, grid.s_nodes[a], 0.5 * h);
  return build_cell_rule(ri, grid.r_lo[i], grid.r_hi[i], h,
                         [&local](double w) { return (local.centre() - local.at(w)).squaredNorm(); });
}

double singular_cell(const Cone& cone, const Grid& grid, double kappa, int node) {
  if (node < 0 || node >= grid.size()) throw Error(ErrorKind::domain, "singular_cell: node index out of range");
  return cell_rule(cone, grid, node / grid.n_s, node % grid.n_s).integrate(kappa);
}

FullDiscretization::FullDiscretization(Cone cone, Grid grid)
    : cone_(std::move(cone)), grid_(std::move(grid)), circular_(cone_.cross_section().is_circular()) {
  const Loop& loop = cone_.cross_section();
  if (std::abs(loop.length() - grid_.L) > 1e-9 * grid_.L || std::abs(cone_.radius() - grid_.R) > 1e-12 * grid_.R) {
    throw Error(ErrorKind::grid, "grid does not match the cone (L or R differ)");
  }
  const int ns = grid_.n_s;
  const std::vector<Vec3> tau = loop.points(grid_.s_nodes);
  chord_sq_.resize(ns, ns);
  for (int a = 0; a < ns; ++a) {
    for (int b = 0; b < ns; ++b) {
      chord_sq_(a, b) = circular_ ? circle_chord_sq(loop.circle_radius(), grid_.s_nodes[a] - grid_.s_nodes[b])
                                  : (tau[a] - tau[b]).squaredNorm();
    }
  }
  if (circular_) {
    for (int i = 0; i < grid_.n_r; ++i) cells_.push_back(cell_rule(cone_, grid_, i, 0));
  } else {
    cells_.reserve(grid_.size());
    for (int i = 0; i < grid_.n_r; ++i) {
      for (int a = 0; a < ns; ++a) cells_.push_back(cell_rule(cone_, grid_, i, a));
    }
  }
}

double FullDiscretization::diagonal(int p, double kappa) const {
  return cells_[circular_ ? p / grid_.n_s : p].integrate(kappa);
}

BsMatrix FullDiscretization::assemble(double kappa) const {
  if (!(kappa >= 0.0)) throw Error(ErrorKind::domain, "assemble_full: kappa must be >= 0");
  const int n = grid_.size();
  const int ns = grid_.n_s;
  BsMatrix out;
  out.kappa = kappa;
  out.entries.resize(n, n);
  Eigen::MatrixXd& A = out.entries;

  std::vector<double> sw(n);
  for (int p = 0; p < n; ++p) sw[p] = std::sqrt(grid_.node_weight(p / ns));

  std::vector<double> diag_r(circular_ ? grid_.n_r : 0);
  if (circular_) {
    for (int i = 0; i < grid_.n_r; ++i) diag_r[i] = cells_[i].integrate(kappa);
  }

  // Upper triangle, then mirrored: exact symmetry by construction.
  for (int q = 0; q < n; ++q) {
    const int j = q / ns;
    const int b = q % ns;
    const double rj = grid_.r_nodes[j];
    for (int p = 0; p < q; ++p) {
      const int i = p / ns;
      const int a = p % ns;
      const double ri = grid_.r_nodes[i];
      const double dr = ri - rj;
      const double d = std::sqrt(dr * dr + ri * rj * chord_sq_(a, b));
      if (!(d > 0.0)) throw Error(ErrorKind::grid, "assemble_full: coincident nodes");
      const double g = (kappa == 0.0 ? 1.0 : std::exp(-kappa * d)) / (kFourPi * d);
      A(p, q) = sw[p] * g * sw[q];
    }
    A(q, q) = circular_ ? diag_r[j] : cells_[q].integrate(kappa);
  }
  A.triangularView<Eigen::StrictlyLower>() = A.transpose().triangularView<Eigen::StrictlyLower>();
  return out;
}

RadialDiscretization::RadialDiscretization(Cone cone, Grid grid) : cone_(std::move(cone)), grid_(std::move(grid)) {
  const Loop& loop = cone_.cross_section();
  if (!loop.is_circular()) throw Error(ErrorKind::misuse, "radial mode assembly requires a circular cross-section");
  if (std::abs(loop.length() - grid_.L) > 1e-9 * grid_.L || std::abs(cone_.radius() - grid_.R) > 1e-12 * grid_.R) {
    throw Error(ErrorKind::grid, "grid does not match the cone (L or R differ)");
  }
  lag_chord_sq_.resize(grid_.n_s);
  for (int l = 0; l < grid_.n_s; ++l) lag_chord_sq_[l] = circle_chord_sq(loop.circle_radius(), l * grid_.s_weight);
  for (int i = 0; i < grid_.n_r; ++i) cells_.push_back(cell_rule(cone_, grid_, i, 0));
}

BsMatrix RadialDiscretization::assemble(double kappa, int m) const {
  if (!(kappa >= 0.0)) throw Error(ErrorKind::domain, "assemble_radial: kappa must be >= 0");
  const int nr = grid_.n_r;
  const int ns = grid_.n_s;
  const double h = grid_.s_weight;
  std::vector<double> cosines(ns);
  for (int l = 0; l < ns; ++l) {
    cosines[l] = std::cos(2.0 * std::numbers::pi * static_cast<double>((static_cast<long>(m) * l) % ns) / ns);
  }
  BsMatrix out;
  out.kappa = kappa;
  out.mode = m;
  out.entries.resize(nr, nr);
  Eigen::MatrixXd& B = out.entries;
  for (int j = 0; j < nr; ++j) {
    const double rj = grid_.r_nodes[j];
    for (int i = 0; i <= j; ++i) {
      const double ri = grid_.r_nodes[i];
      const double dr = ri - rj;
      double sum = 0.0;
      for (int l = (i == j ? 1 : 0); l < ns; ++l) {
        const double d = std::sqrt(dr * dr + ri * rj * lag_chord_sq_[l]);
        sum += (kappa == 0.0 ? 1.0 : std::exp(-kappa * d)) / (kFourPi * d) * cosines[l];
      }
      double value = std::sqrt(grid_.measure(i) * grid_.measure(j)) * h * sum;
      if (i == j) value += cells_[i].integrate(kappa);
      B(i, j) = value;
      B(j, i) = value;
    }
  }
  return out;
}

BsMatrix assemble_full(const Cone& cone, const Grid& grid, double kappa) {
  return FullDiscretization(cone, grid).assemble(kappa);
}

BsMatrix assemble_radial(const Cone& cone, const Grid& grid, double kappa, int m) {
  return RadialDiscretization(cone, grid).assemble(kappa, m);
}

double radial_mode_kernel(const Cone& circle_cone, double kappa, int m, double r, double rp, int n_t) {
  const Loop& loop = circle_cone.cross_section();
  if (!loop.is_circular()) throw Error(ErrorKind::misuse, "radial_mode_kernel requires a circular cross-section");
  if (!(r > 0.0) || !(rp >= 0.0)) throw Error(ErrorKind::domain, "radial_mode_kernel: radii must be positive");
  if (r == rp) {
    throw Error(ErrorKind::singular_argument,
                "radial_mode_kernel: the angular integral diverges at r = r'; use the cell-corrected mode matrix");
  }
  if (n_t < 4) throw Error(ErrorKind::domain, "radial_mode_kernel: n_t must be >= 4");
  const double L = loop.length();
  const double rho = loop.circle_radius();
  const double h = L / n_t;
  const double dr = r - rp;
  double sum = 0.0;
  for (int l = 0; l < n_t; ++l) {
    const double t = l * h;
    const double d = std::sqrt(dr * dr + r * rp * circle_chord_sq(rho, t));
    sum += green_kernel(kappa, d) * std::cos(2.0 * std::numbers::pi * m * t / L);
  }
  return h * sum;
}

Eigen::VectorXd nystrom_row_sums(const Cone& cone, const Grid& grid, double kappa) {
  if (cone.cross_section().is_circular()) {
    const BsMatrix B = assemble_radial(cone, grid, kappa, 0);
    Eigen::VectorXd rows(grid.n_r);
    for (int i = 0; i < grid.n_r; ++i) {
      double sum = 0.0;
      for (int j = 0; j < grid.n_r; ++j) sum += B.entries(i, j) * std::sqrt(grid.measure(j) / grid.measure(i));
      rows[i] = sum;
    }
    return rows;
  }
  const BsMatrix A = assemble_full(cone, grid, kappa);
  const int n = grid.size();
  Eigen::VectorXd sw(n);
  for (int p = 0; p < n; ++p) sw[p] = std::sqrt(grid.node_weight(p / grid.n_s));
  // M = W^{-1/2} A W^{1/2}
  return (A.entries * sw).cwiseQuotient(sw);
}

SurfaceConstants surface_constants(const Cone& cone, const Grid& grid) {
  SurfaceConstants out;
  const Loop& loop = cone.cross_section();
  const double R = cone.radius();
  // |x - y| is convex along generators, so the supremum is attained on rim or tip.
  auto rim_diameter = [&](int n) {
    std::vector<Vec3> pts(n);
    for (int a = 0; a < n; ++a) pts[a] = loop.point(loop.length() * a / n);
    double best = 1.0;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) best = std::max(best, (pts[a] - pts[b]).norm());
    }
    return R * best;
  };
  const double d_grid = rim_diameter(grid.n_s);
  const double d_fine = rim_diameter(4 * grid.n_s);
  out.diameter = std::max(d_grid, d_fine);
  out.diameter_error = std::abs(d_fine - d_grid);

  out.potential_bound = nystrom_row_sums(cone, grid, 0.0).maxCoeff();
  const int nr_half = std::max(4, grid.n_r / 2);
  const int ns_half = std::max(4, grid.n_s / 2);
  const Grid coarse = build_grid(grid.R, grid.L, nr_half, ns_half, grid.grading);
  const double c_coarse = nystrom_row_sums(cone, coarse, 0.0).maxCoeff();
  out.potential_error = std::abs(out.potential_bound - c_coarse);
  return out;
}

void write_bsmat(const std::string& path, const BsMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write matrix file: " + path);
  const char magic[8] = {'B', 'S', 'M', 'A', 'T', '1', '\0', '\0'};
  out.write(magic, 8);
  const std::uint64_t rows = static_cast<std::uint64_t>(m.entries.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.entries.cols());
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  for (Eigen::Index i = 0; i < m.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.entries.cols(); ++j) {
      const double v = m.entries(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!out) throw Error(ErrorKind::io, "failed writing matrix file: " + path);
}

Eigen::MatrixXd read_bsmat(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open matrix file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "BSMAT1\0\0", 8) != 0) throw Error(ErrorKind::io, "not a BSMAT1 file: " + path);
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in) throw Error(ErrorKind::io, "truncated BSMAT1 header: " + path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) in.read(reinterpret_cast<char*>(&m(i, j)), sizeof(double));
  }
  if (!in) throw Error(ErrorKind::io, "truncated BSMAT1 payload: " + path);
  return m;
}

}  // namespace conebs
