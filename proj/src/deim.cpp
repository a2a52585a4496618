#include "podopt/deim.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "podopt/errors.hpp"

namespace podopt {

namespace {

// First occurrence wins on ties, matching the written algorithms.
int argmax_abs(const Vec& v) {
  int best = 0;
  double val = std::abs(v(0));
  for (int i = 1; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    if (a > val) {
      val = a;
      best = i;
    }
  }
  return best;
}

Mat rows_at(const Mat& a, const std::vector<int>& idx, int cols) {
  Mat r(static_cast<int>(idx.size()), cols);
  for (int i = 0; i < static_cast<int>(idx.size()); ++i)
    r.row(i) = a.row(idx[i]).head(cols);
  return r;
}

// Hager-style 1-norm condition estimate through the LU solves.
double cond1_estimate(const Mat& a, const Eigen::PartialPivLU<Mat>& lu) {
  const int p = static_cast<int>(a.rows());
  double norm_a = 0.0;
  for (int j = 0; j < p; ++j)
    norm_a = std::max(norm_a, a.col(j).cwiseAbs().sum());
  Vec x = Vec::Constant(p, 1.0 / p);
  double est = 0.0;
  for (int it = 0; it < 5; ++it) {
    Vec y = lu.solve(x);
    est = y.cwiseAbs().sum();
    Vec xi(p);
    for (int i = 0; i < p; ++i) xi(i) = y(i) >= 0.0 ? 1.0 : -1.0;
    Vec z = lu.transpose().solve(xi);
    int k = argmax_abs(z);
    if (std::abs(z(k)) <= z.dot(x)) break;
    x.setZero();
    x(k) = 1.0;
  }
  return norm_a * est;
}

DeimInterpolant build_deim(const Mat& F, int p) {
  Eigen::BDCSVD<Mat> svd(F, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > std::max(1e-13 * s(0), 1e-300)) ++rank;
  if (rank == 0) throw EmptyBasisError("zero nonlinearity snapshot matrix");
  if (p > rank) throw ConfigError("requested more DEIM modes than rank");

  Mat phi = svd.matrixU().leftCols(p);
  DeimInterpolant d;
  d.variant = DeimVariant::Deim;
  d.Phi = Mat(phi.rows(), p);
  d.idx.reserve(p);

  d.Phi.col(0) = phi.col(0);
  d.idx.push_back(argmax_abs(phi.col(0)));
  for (int i = 1; i < p; ++i) {
    Mat u_rows = rows_at(d.Phi, d.idx, i);
    Vec rhs(i);
    for (int k = 0; k < i; ++k) rhs(k) = phi(d.idx[k], i);
    Vec c = u_rows.partialPivLu().solve(rhs);
    Vec r = phi.col(i) - d.Phi.leftCols(i) * c;
    d.idx.push_back(argmax_abs(r));
    d.Phi.col(i) = phi.col(i);
  }
  return d;
}

DeimInterpolant build_eim(const Mat& F, int p) {
  const int n = static_cast<int>(F.cols());
  if (p > n) throw ConfigError("requested more EIM modes than snapshots");
  if (F.cwiseAbs().maxCoeff() == 0.0)
    throw EmptyBasisError("zero nonlinearity snapshot matrix");

  DeimInterpolant d;
  d.variant = DeimVariant::Eim;
  d.Phi = Mat(F.rows(), p);
  d.idx.reserve(p);

  int k = 0;
  double best = -1.0;
  for (int j = 0; j < n; ++j) {
    const double a = F.col(j).cwiseAbs().maxCoeff();
    if (a > best) {
      best = a;
      k = j;
    }
  }
  Vec xi = F.col(k);
  int i0 = argmax_abs(xi);
  d.idx.push_back(i0);
  d.Phi.col(0) = xi / xi(i0);

  for (int i = 1; i < p; ++i) {
    Mat phi_rows = rows_at(d.Phi, d.idx, i);
    auto plu = phi_rows.partialPivLu();
    int kb = 0;
    double worst = -1.0;
    Mat coeff(i, n);
    for (int j = 0; j < n; ++j) {
      Vec rhs(i);
      for (int l = 0; l < i; ++l) rhs(l) = F(d.idx[l], j);
      coeff.col(j) = plu.solve(rhs);
      const double err =
          (F.col(j) - d.Phi.leftCols(i) * coeff.col(j)).cwiseAbs().maxCoeff();
      if (err > worst) {
        worst = err;
        kb = j;
      }
    }
    Vec r = F.col(kb) - d.Phi.leftCols(i) * coeff.col(kb);
    int ii = argmax_abs(r);
    if (r(ii) == 0.0)
      throw ConfigError("EIM stalled: snapshots exhausted before p modes");
    d.idx.push_back(ii);
    d.Phi.col(i) = r / r(ii);
  }
  return d;
}

}  // namespace

DeimInterpolant deim_build(const Mat& F, int p, DeimVariant variant) {
  if (p < 1) throw ConfigError("deim_build requires p >= 1");
  if (F.size() == 0) throw ConfigError("empty nonlinearity snapshot matrix");
  DeimInterpolant d = variant == DeimVariant::Deim ? build_deim(F, p)
                                                   : build_eim(F, p);
  for (size_t a = 0; a < d.idx.size(); ++a)
    for (size_t b = a + 1; b < d.idx.size(); ++b)
      if (d.idx[a] == d.idx[b])
        throw SolverError("duplicate interpolation index");
  Mat pt_phi = rows_at(d.Phi, d.idx, p);
  d.lu = pt_phi.partialPivLu();
  d.cond_estimate = cond1_estimate(pt_phi, d.lu);
  d.near_singular = !(d.cond_estimate < 1e12);
  return d;
}

Vec DeimInterpolant::reconstruct(const Vec& v_at_idx) const {
  return Phi * lu.solve(v_at_idx);
}

void DeimInterpolant::attach(const FeModel& full, const Mat& psi) {
  if (psi.rows() != Phi.rows())
    throw ConfigError("basis/interpolant dimension mismatch");
  Mat mphi = full.M * Phi;
  // Psi^T M Phi (P^T Phi)^{-1}: solve on the right through the transpose.
  Mat t = lu.transpose().solve(Mat((psi.transpose() * mphi).transpose()));
  Cmat = t.transpose();
  PtPsi = rows_at(psi, idx, static_cast<int>(psi.cols()));
}

Vec DeimInterpolant::apply(const Vec& yhat) const {
  Vec v = PtPsi * yhat;
  return Cmat * Vec(v.array().cube());
}

Mat DeimInterpolant::jacobian(const Vec& yhat) const {
  Vec v = PtPsi * yhat;
  Vec w = 3.0 * v.array().square();
  return Cmat * w.asDiagonal() * PtPsi;
}

}  // namespace podopt
