#include "podopt/pod.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "podopt/errors.hpp"

namespace podopt {

namespace {

constexpr double kRankRel = 1e-13;
constexpr double kRankAbs = 1e-300;

// Largest-magnitude coefficient made positive; first occurrence wins ties.
void fix_signs(Mat& psi) {
  for (int c = 0; c < psi.cols(); ++c) {
    int arg = 0;
    double best = std::abs(psi(0, c));
    for (int i = 1; i < psi.rows(); ++i) {
      const double a = std::abs(psi(i, c));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (psi(arg, c) < 0.0) psi.col(c) = -psi.col(c);
  }
}

// Modified Gram-Schmidt in the W inner product; preserves column order and
// span while restoring orthonormality lost to conditioning near the rank
// cutoff. Columns collapsing below drop_tol (relative) are removed.
Mat w_orthonormalize(const WeightedSpace& space, Mat v, double drop_tol = 1e-8) {
  std::vector<int> keep;
  for (int c = 0; c < v.cols(); ++c) {
    Vec col = v.col(c);
    const double norm0 = space.norm(col);
    if (norm0 <= 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (int kidx : keep) col -= space.inner(v.col(kidx), col) * v.col(kidx);
    const double norm1 = space.norm(col);
    if (norm1 <= drop_tol * norm0) continue;
    v.col(c) = col / norm1;
    keep.push_back(c);
  }
  Mat out(v.rows(), static_cast<int>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) out.col(i) = v.col(keep[i]);
  return out;
}

struct Decomposition {
  Vec lambda;  // descending, clamped at zero
  Mat psi;     // columns paired with lambda entries
};

Decomposition decompose(const SnapshotSet& snaps, PodStrategy strategy) {
  const Mat y = snaps.stacked();
  const Vec dsq = snaps.column_weights_sqrt();
  const WeightedSpace& space = *snaps.space;
  const int m = snaps.m();
  const Eigen::Index ncols = y.cols();

  if (strategy == PodStrategy::Auto)
    strategy = ncols < m ? PodStrategy::GramSnapshots : PodStrategy::GramM;

  Decomposition dec;
  if (strategy == PodStrategy::Svd) {
    Mat ytil = space.apply_Lt(y);
    for (Eigen::Index c = 0; c < ncols; ++c) ytil.col(c) *= dsq(c);
    Eigen::BDCSVD<Mat> svd(ytil, Eigen::ComputeThinU);
    const Vec sv = svd.singularValues();
    const Eigen::Index r = sv.size();
    dec.lambda = sv.array().square();
    dec.psi = space.solve_Lt(Mat(svd.matrixU().leftCols(r)));
  } else if (strategy == PodStrategy::GramM) {
    Mat ytil = space.apply_Lt(y);
    for (Eigen::Index c = 0; c < ncols; ++c) ytil.col(c) *= dsq(c);
    const Mat R = ytil * ytil.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(R);
    if (eig.info() != Eigen::Success)
      throw SolverError("symmetric eigensolver failed in POD (gram_m)");
    const Eigen::Index r = std::min<Eigen::Index>(m, ncols);
    dec.lambda.resize(r);
    Mat util(m, r);
    for (Eigen::Index i = 0; i < r; ++i) {
      dec.lambda(i) = std::max(0.0, eig.eigenvalues()(m - 1 - i));
      util.col(i) = eig.eigenvectors().col(m - 1 - i);
    }
    dec.psi = space.solve_Lt(util);
  } else {
    Mat g = y.transpose() * space.apply_W(y);
    for (Eigen::Index a = 0; a < ncols; ++a)
      for (Eigen::Index b = 0; b < ncols; ++b) g(a, b) *= dsq(a) * dsq(b);
    g = 0.5 * (g + g.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(g);
    if (eig.info() != Eigen::Success)
      throw SolverError("symmetric eigensolver failed in POD (gram_snapshots)");
    dec.lambda.resize(ncols);
    dec.psi.resize(m, ncols);
    for (Eigen::Index i = 0; i < ncols; ++i) {
      const double lam = std::max(0.0, eig.eigenvalues()(ncols - 1 - i));
      dec.lambda(i) = lam;
      Vec phi = eig.eigenvectors().col(ncols - 1 - i);
      if (lam > 0.0) {
        Vec scaled = phi.cwiseProduct(dsq);
        dec.psi.col(i) = y * scaled / std::sqrt(lam);
      } else {
        dec.psi.col(i).setZero();
      }
    }
  }
  return dec;
}

}  // namespace

Mat PodBasis::basis(int l) const {
  if (l < 0) l = ell;
  if (l > d) throw ConfigError("requested more basis columns than the rank");
  return Psi.leftCols(l);
}

double PodBasis::energy_ratio(int l) const {
  if (total_energy <= 0.0) return 0.0;
  l = std::min<int>(l, static_cast<int>(lambda.size()));
  double s = 0.0;
  for (int i = 0; i < l; ++i) s += lambda(i);
  return s / total_energy;
}

double PodBasis::tail(int l) const {
  double s = 0.0;
  for (int i = l; i < d; ++i) s += lambda(i);
  return s;
}

PodBasis compute_pod(const SnapshotSet& snaps, RankOrTol sel,
                     PodStrategy strategy) {
  snaps.validate();
  const bool by_rank = sel.rank >= 0;
  if (!by_rank && !(sel.eps > 0.0 && sel.eps < 1.0))
    throw ConfigError("POD selection needs a rank >= 0 or a tolerance in (0,1)");
  if (by_rank && sel.rank > std::min(snaps.m(), snaps.total_columns()))
    throw ConfigError("requested POD rank exceeds min(m, nK)");

  Decomposition dec = decompose(snaps, strategy);
  const double lam1 = dec.lambda.size() > 0 ? dec.lambda(0) : 0.0;
  if (!(lam1 > 0.0))
    throw EmptyBasisError("all-zero snapshots admit no POD basis");

  const double cutoff = std::max(kRankRel * lam1, kRankAbs);
  int d = 0;
  while (d < dec.lambda.size() && dec.lambda(d) > cutoff) ++d;

  PodBasis basis;
  basis.space = snaps.space;
  basis.lambda = dec.lambda;
  basis.total_energy = snaps.total_energy();
  basis.Psi = w_orthonormalize(*snaps.space, Mat(dec.psi.leftCols(d)));
  basis.d = static_cast<int>(basis.Psi.cols());
  d = basis.d;
  fix_signs(basis.Psi);

  if (by_rank) {
    basis.ell = std::min(sel.rank, d);
    basis.truncated = sel.rank > d;
  } else {
    int l = 1;
    while (l < d && !(basis.energy_ratio(l) > 1.0 - sel.eps)) ++l;
    basis.ell = l;
  }
  return basis;
}

double projection_error(const SnapshotSet& snaps, const PodBasis& basis,
                        int ell) {
  if (ell > basis.d) throw ConfigError("ell exceeds the basis rank");
  const WeightedSpace& space = *snaps.space;
  const Mat psi = basis.Psi.leftCols(ell);
  double total = 0.0;
  for (int k = 0; k < snaps.num_blocks(); ++k) {
    const Mat& y = snaps.blocks[k];
    const Mat wy = space.apply_W(y);
    const Mat coeff = psi.transpose() * wy;       // ell x n
    const Mat resid = y - psi * coeff;            // m x n
    const Mat wresid = space.apply_W(resid);
    for (int j = 0; j < snaps.n(); ++j)
      total += snaps.omega[k] * snaps.alpha(j) * resid.col(j).dot(wresid.col(j));
  }
  return total;
}

double pointwise_error_bound(const PodBasis& basis, double omega_k,
                             double alpha_j, int ell) {
  if (!(omega_k * alpha_j > 0.0))
    throw ConfigError("pointwise bound needs positive weights");
  if (ell >= basis.d) return 0.0;
  return basis.lambda(ell) / (omega_k * alpha_j);
}

PodBasis pod_greedy(const std::vector<Mat>& trajectories, const Vec& alpha,
                    std::shared_ptr<const WeightedSpace> space, double eps_pod,
                    int ell_max) {
  if (trajectories.empty()) throw ConfigError("pod_greedy needs trajectories");
  if (!(eps_pod > 0.0 && eps_pod < 1.0))
    throw ConfigError("eps_pod must lie in (0,1)");
  if (ell_max < 1) throw ConfigError("ell_max must be >= 1");
  const int K = static_cast<int>(trajectories.size());
  const int m = static_cast<int>(trajectories[0].rows());
  const WeightedSpace& W = *space;

  auto traj_energy = [&](const Mat& y) {
    double e = 0.0;
    const Mat wy = W.apply_W(y);
    for (int j = 0; j < y.cols(); ++j) e += alpha(j) * y.col(j).dot(wy.col(j));
    return e;
  };
  auto traj_error = [&](const Mat& y, const Mat& psi) {
    if (psi.cols() == 0) return traj_energy(y);
    const Mat resid = y - psi * (psi.transpose() * W.apply_W(y));
    return traj_energy(resid);
  };

  std::vector<double> energy(K);
  for (int k = 0; k < K; ++k) energy[k] = traj_energy(trajectories[k]);

  Mat psi(m, 0);
  std::vector<bool> used(K, false);
  for (int round = 0; round < K; ++round) {
    int pick = -1;
    double worst = 0.0;
    for (int k = 0; k < K; ++k) {
      if (used[k] || energy[k] <= 0.0) continue;
      const double rel = traj_error(trajectories[k], psi) / energy[k];
      if (rel > worst) {
        worst = rel;
        pick = k;
      }
    }
    if (pick < 0 || worst <= eps_pod || psi.cols() >= ell_max) break;
    used[pick] = true;

    const Mat& y = trajectories[pick];
    Mat resid = y;
    if (psi.cols() > 0) resid -= psi * (psi.transpose() * W.apply_W(y));

    SnapshotSet rs = make_snapshot_set({resid}, {1.0}, alpha, space);
    PodBasis rb;
    try {
      rb = compute_pod(rs, RankOrTol::Rank(std::min<int>(
                               static_cast<int>(std::min<Eigen::Index>(
                                   resid.rows(), resid.cols())),
                               ell_max - static_cast<int>(psi.cols()))));
    } catch (const EmptyBasisError&) {
      continue;
    }
    // Smallest mode count making this trajectory's relative error <= eps_pod.
    const double res_energy = rb.total_energy;
    double captured = 0.0;
    int take = 0;
    for (int i = 0; i < rb.d && take < rb.ell; ++i) {
      if ((res_energy - captured) / energy[pick] <= eps_pod) break;
      captured += rb.lambda(i);
      ++take;
    }
    if (take == 0) take = std::min(1, rb.d);
    Mat grown(m, psi.cols() + take);
    grown << psi, rb.Psi.leftCols(take);
    psi = w_orthonormalize(W, std::move(grown));
  }

  // Package as a PodBasis: per-mode captured energies sorted descending.
  const int cols = static_cast<int>(psi.cols());
  if (cols == 0) throw EmptyBasisError("greedy selection produced no basis");
  Vec captured = Vec::Zero(cols);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    total += energy[k];
    const Mat c = psi.transpose() * W.apply_W(trajectories[k]);  // cols x n
    for (int j = 0; j < c.cols(); ++j)
      captured += alpha(j) * c.col(j).array().square().matrix();
  }
  std::vector<int> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return captured(a) > captured(b);
  });
  PodBasis basis;
  basis.space = space;
  basis.Psi.resize(m, cols);
  basis.lambda.resize(cols);
  for (int i = 0; i < cols; ++i) {
    basis.Psi.col(i) = psi.col(order[i]);
    basis.lambda(i) = captured(order[i]);
  }
  fix_signs(basis.Psi);
  basis.total_energy = total;
  basis.d = cols;
  basis.ell = cols;
  return basis;
}

Vec project(const PodBasis& basis, const Vec& v, ProjectMode mode, int ell,
            const WeightedSpace* cross_space) {
  if (ell < 0) ell = basis.ell;
  if (ell > basis.d) throw ConfigError("ell exceeds the basis rank");
  const Mat psi = basis.Psi.leftCols(ell);
  if (mode == ProjectMode::WOrthogonal)
    return psi.transpose() * basis.space->apply_W(v);
  if (!cross_space)
    throw ConfigError("cross-space projection needs the other space");
  const Mat wpsi = cross_space->apply_W(psi);
  const Mat gram = psi.transpose() * wpsi;
  Eigen::LLT<Mat> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::logic_error("cross Gram matrix is not positive definite");
  return llt.solve(wpsi.transpose() * v);
}

}  // namespace podopt
