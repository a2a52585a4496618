#pragma once

#include <Eigen/Dense>
#include <vector>

#include "podopt/fe_model.hpp"
#include "podopt/util.hpp"

namespace podopt {

enum class DeimVariant { Eim, Deim };

// Greedy pointwise interpolant of the nodal cubic nonlinearity in a
// collateral basis: N(y) is evaluated only at the p interpolation rows.
struct DeimInterpolant {
  Mat Phi;               // m x p collateral basis
  std::vector<int> idx;  // interpolation rows, distinct
  Eigen::PartialPivLU<Mat> lu;  // factorization of P^T Phi
  DeimVariant variant = DeimVariant::Deim;
  double cond_estimate = 0.0;
  bool near_singular = false;

  // Filled by attach(): C = Psi^T M Phi (P^T Phi)^{-1} and P^T Psi.
  Mat Cmat;
  Mat PtPsi;

  int p() const { return static_cast<int>(idx.size()); }
  int m() const { return static_cast<int>(Phi.rows()); }

  // Reconstruct a vector in span(Phi) from its entries at idx.
  Vec reconstruct(const Vec& v_at_idx) const;

  void attach(const FeModel& full, const Mat& psi);

  // C * N(PtPsi * yhat) for the nodal cubic N_i(v) = v_i^3.
  Vec apply(const Vec& yhat) const;
  // C * diag(3 (PtPsi yhat)^2) * PtPsi.
  Mat jacobian(const Vec& yhat) const;
};

DeimInterpolant deim_build(const Mat& F, int p, DeimVariant variant);

}  // namespace podopt
