#include "conebs/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "conebs/errors.hpp"

namespace conebs {

namespace {

void normalize_sign(Eigen::VectorXd& v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  if (v[k] < 0.0) v = -v;
}

Eigen::VectorXd seeded_noise(Eigen::Index n, unsigned long seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(gen);
  return v;
}

SpectralResult dense_pair(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::numeric, "dense eigensolver failed");
  const Eigen::Index n = A.rows();
  SpectralResult out;
  out.dense = true;
  out.mu = es.eigenvalues()[n - 1];
  out.vector = es.eigenvectors().col(n - 1);
  out.second = n > 1 ? es.eigenvalues()[n - 2] : -std::numeric_limits<double>::infinity();
  return out;
}

// Restarted Lanczos with full reorthogonalization, written as Rayleigh-Ritz on
// an explicitly orthonormal Krylov basis. The restart keeps a few leading Ritz
// vectors and expands with the residual, which spans the next Krylov direction.
SpectralResult krylov_pair(const Eigen::MatrixXd& A, const Eigen::VectorXd* start, const EigenOptions& opt) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = std::min<Eigen::Index>(std::max(opt.basis, 8), n);
  const Eigen::Index keep = std::min<Eigen::Index>(6, m - 2);

  // A perturbation keeps the start out of symmetry-invariant subspaces, so the
  // second Ritz value approximates the global second eigenvalue.
  Eigen::VectorXd v0 = seeded_noise(n, 7);
  if (start && start->size() == n && start->norm() > 0.0) {
    v0 = start->normalized() + 1e-2 * v0.normalized();
  } else {
    v0 = Eigen::VectorXd::Ones(n).normalized() + 0.1 * v0.normalized();
  }
  v0.normalize();

  Eigen::MatrixXd V(n, m);
  Eigen::MatrixXd W(n, m);
  V.col(0) = v0;
  W.col(0).noalias() = A * v0;
  Eigen::Index cols = 1;
  Eigen::Index src = 0;
  int matvecs = 1;
  unsigned long refill_seed = 11;
  const double scale = A.cwiseAbs().rowwise().sum().maxCoeff();

  SpectralResult out;
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    while (cols < m) {
      Eigen::VectorXd r = W.col(src);
      for (int pass = 0; pass < 2; ++pass) r -= V.leftCols(cols) * (V.leftCols(cols).transpose() * r);
      double norm = r.norm();
      if (norm <= 1e-13 * scale) {
        r = seeded_noise(n, refill_seed++);
        for (int pass = 0; pass < 2; ++pass) r -= V.leftCols(cols) * (V.leftCols(cols).transpose() * r);
        norm = r.norm();
      }
      V.col(cols) = r / norm;
      W.col(cols).noalias() = A * V.col(cols);
      ++matvecs;
      src = cols;
      ++cols;
    }
    Eigen::MatrixXd H = V.leftCols(cols).transpose() * W.leftCols(cols);
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const Eigen::VectorXd& theta = es.eigenvalues();
    const Eigen::MatrixXd& Y = es.eigenvectors();

    auto residual_of = [&](Eigen::Index k) {
      return (W.leftCols(cols) * Y.col(k) - theta[k] * (V.leftCols(cols) * Y.col(k))).norm();
    };
    const double r1 = residual_of(cols - 1);
    const double r2 = residual_of(cols - 2);
    const double mu = theta[cols - 1];
    out.mu = mu;
    out.second = theta[cols - 2];
    out.vector = V.leftCols(cols) * Y.col(cols - 1);
    out.iterations = matvecs;
    if ((r1 <= opt.tolerance * std::abs(mu) && r2 <= 1e-7 * std::abs(mu)) || cols == n) return out;

    // thick restart
    const Eigen::MatrixXd Yk = Y.rightCols(keep);
    const Eigen::MatrixXd Vk = V.leftCols(cols) * Yk;
    const Eigen::MatrixXd Wk = W.leftCols(cols) * Yk;
    V.leftCols(keep) = Vk;
    W.leftCols(keep) = Wk;
    cols = keep;
    src = 0;
    double worst = -1.0;
    for (Eigen::Index k = 0; k < keep; ++k) {
      const double rk = (W.col(k) - (V.col(k).dot(W.col(k))) * V.col(k)).norm();
      if (rk > worst) {
        worst = rk;
        src = k;
      }
    }
  }
  std::ostringstream msg;
  msg << "Krylov eigensolver did not converge after " << matvecs << " products; last mu = " << out.mu;
  throw Error(ErrorKind::numeric, msg.str());
}

}  // namespace

SpectralResult largest_eigenpair(const Eigen::MatrixXd& A, const Eigen::VectorXd* start, const EigenOptions& opt) {
  if (A.rows() != A.cols() || A.rows() == 0) throw Error(ErrorKind::domain, "largest_eigenpair: matrix must be square");
  SpectralResult out = A.rows() <= opt.dense_limit ? dense_pair(A) : krylov_pair(A, start, opt);
  out.vector.normalize();
  normalize_sign(out.vector);
  out.residual = (A * out.vector - out.mu * out.vector).norm();
  out.gap = out.mu - out.second;
  return out;
}

SpectralResult largest_eigenpair(const BsMatrix& A, const Eigen::VectorXd* start, const EigenOptions& opt) {
  return largest_eigenpair(A.entries, start, opt);
}

int eigencount_above(const BsMatrix& A, double threshold) {
  if (!(threshold > 0.0)) throw Error(ErrorKind::domain, "eigencount_above: threshold must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.entries, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::numeric, "dense eigensolver failed");
  int count = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) count += es.eigenvalues()[i] > threshold ? 1 : 0;
  return count;
}

double mode_coupling_residual(const BsMatrix& full, const Grid& grid, int m, int n) {
  if (!full.is_full() || full.size() != grid.size()) throw Error(ErrorKind::misuse, "mode coupling needs the full matrix of the grid");
  if (m == n) throw Error(ErrorKind::misuse, "mode_coupling_residual: modes must differ");
  const int ns = grid.n_s;
  const int nr = grid.n_r;
  auto sampled_mode = [&](int mode) {
    Eigen::VectorXcd q(ns);
    for (int a = 0; a < ns; ++a) {
      const long phase = (static_cast<long>(mode) * a) % ns;
      q[a] = std::polar(1.0 / std::sqrt(static_cast<double>(ns)), 2.0 * std::numbers::pi * phase / ns);
    }
    return q;
  };
  const Eigen::VectorXcd qm = sampled_mode(m);
  const Eigen::VectorXcd qn = sampled_mode(n);
  // P_k = I (x) q_k q_k^H, so each block contributes |q_m^H A_ij q_n|^2.
  double sum = 0.0;
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nr; ++j) {
      const auto block = full.entries.block(static_cast<Eigen::Index>(i) * ns, static_cast<Eigen::Index>(j) * ns, ns, ns);
      const Eigen::VectorXcd bq = block.cast<std::complex<double>>() * qn;
      sum += std::norm(qm.dot(bq));
    }
  }
  return std::sqrt(sum) / full.entries.norm();
}

double mode_coupling_residual(const Cone& cone, const Grid& grid, double kappa, int m, int n) {
  return mode_coupling_residual(assemble_full(cone, grid, kappa), grid, m, n);
}

double angular_variation(const Eigen::VectorXd& perron, const Grid& grid) {
  if (perron.size() != grid.size()) throw Error(ErrorKind::misuse, "angular_variation: vector does not match grid");
  const double total = perron.squaredNorm();
  if (total == 0.0) return 0.0;
  double worst = 0.0;
  for (int i = 0; i < grid.n_r; ++i) {
    const auto shell = perron.segment(static_cast<Eigen::Index>(i) * grid.n_s, grid.n_s);
    const double mean = shell.mean();
    worst = std::max(worst, (shell.array() - mean).square().sum());
  }
  return worst / total;
}

}  // namespace conebs
