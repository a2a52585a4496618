#include "podopt/weighted_space.hpp"

#include <cmath>

#include "podopt/errors.hpp"

namespace podopt {

WeightedSpace::WeightedSpace(SpMat W, Tag tag) : W_(std::move(W)), tag_(tag) {
  factorize();
}

WeightedSpace::WeightedSpace(const Mat& W, Tag tag)
    : W_(W.sparseView()), tag_(tag) {
  factorize();
}

void WeightedSpace::factorize() {
  if (W_.rows() != W_.cols()) throw ConfigError("weight matrix must be square");
  const double nw = W_.norm();
  SpMat diff = SpMat(W_.transpose()) - W_;
  if (diff.norm() > 1e-13 * std::max(1.0, nw))
    throw ConfigError("weight matrix must be symmetric");
  W_.makeCompressed();
  llt_.compute(W_);
  if (llt_.info() != Eigen::Success)
    throw ConfigError("weight matrix must be positive definite (Cholesky failed)");
}

double WeightedSpace::norm(const Vec& u) const {
  return std::sqrt(std::max(0.0, norm2(u)));
}

Vec WeightedSpace::apply_Lt(const Vec& v) const {
  return llt_.matrixU() * (llt_.permutationP() * v);
}

Mat WeightedSpace::apply_Lt(const Mat& y) const {
  Mat out(y.rows(), y.cols());
  for (int j = 0; j < y.cols(); ++j) out.col(j) = apply_Lt(Vec(y.col(j)));
  return out;
}

Vec WeightedSpace::solve_Lt(const Vec& v) const {
  Vec z = v;
  llt_.matrixU().solveInPlace(z);
  return llt_.permutationPinv() * z;
}

Mat WeightedSpace::solve_Lt(const Mat& y) const {
  Mat out(y.rows(), y.cols());
  for (int j = 0; j < y.cols(); ++j) out.col(j) = solve_Lt(Vec(y.col(j)));
  return out;
}

Vec WeightedSpace::solve_W(const Vec& r) const { return llt_.solve(r); }

Mat WeightedSpace::solve_W(const Mat& r) const { return llt_.solve(r); }

}  // namespace podopt
