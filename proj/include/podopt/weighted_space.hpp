#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>

#include "podopt/util.hpp"

namespace podopt {

using SpMat = Eigen::SparseMatrix<double>;

// Discrete inner-product space on coefficient vectors: <u,v>_W = u'Wv with W
// symmetric positive definite. The Cholesky factorization P'LL'P = W realizes
// the square-root map u -> L'(Pu), which preserves all singular values.
class WeightedSpace {
 public:
  enum class Tag { Identity, MassH, EnergyV, Custom };

  explicit WeightedSpace(SpMat W, Tag tag = Tag::Custom);
  explicit WeightedSpace(const Mat& W, Tag tag = Tag::Custom);

  int dim() const { return static_cast<int>(W_.rows()); }
  Tag tag() const { return tag_; }
  const SpMat& W() const { return W_; }

  double inner(const Vec& u, const Vec& v) const { return u.dot(W_ * v); }
  double norm2(const Vec& u) const { return inner(u, u); }
  double norm(const Vec& u) const;

  Vec apply_W(const Vec& v) const { return W_ * v; }
  Mat apply_W(const Mat& y) const { return W_ * y; }

  // u -> L'(Pu); column-wise for matrices.
  Vec apply_Lt(const Vec& v) const;
  Mat apply_Lt(const Mat& y) const;
  // Inverse of apply_Lt (basis recovery).
  Vec solve_Lt(const Vec& v) const;
  Mat solve_Lt(const Mat& y) const;
  // W^{-1} r (Riesz representative).
  Vec solve_W(const Vec& r) const;
  Mat solve_W(const Mat& r) const;

 private:
  void factorize();
  SpMat W_;
  Tag tag_;
  Eigen::SimplicialLLT<SpMat> llt_;
};

}  // namespace podopt
