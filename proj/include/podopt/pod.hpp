#pragma once

#include <memory>
#include <vector>

#include "podopt/snapshots.hpp"
#include "podopt/util.hpp"
#include "podopt/weighted_space.hpp"

namespace podopt {

enum class PodStrategy { Auto, Svd, GramM, GramSnapshots };

// Rank selection: either a fixed rank or an energy tolerance eps in (0,1)
// choosing the smallest ell with E(ell) > 1 - eps.
struct RankOrTol {
  int rank = -1;
  double eps = -1.0;
  static RankOrTol Rank(int r) { return {r, -1.0}; }
  static RankOrTol Tol(double e) { return {-1, e}; }
};

// W-orthonormal POD basis with full numerical-rank bookkeeping: Psi keeps all
// d columns above the rank cutoff so that error tails can be evaluated for
// any ell <= d; ell is the selected rank.
struct PodBasis {
  Mat Psi;              // m x d
  Vec lambda;           // all computed eigenvalues, descending (length >= d)
  double total_energy = 0.0;
  int d = 0;            // numerical rank
  int ell = 0;          // selected rank
  bool truncated = false;  // requested rank exceeded d
  std::shared_ptr<const WeightedSpace> space;

  Mat basis(int l = -1) const;          // leading l columns (default ell)
  double energy_ratio(int l) const;     // E(l) = sum_{i<=l} lambda_i / total
  double tail(int l) const;             // sum_{i=l+1..d} lambda_i
};

PodBasis compute_pod(const SnapshotSet& snaps, RankOrTol sel,
                     PodStrategy strategy = PodStrategy::Auto);

// Direct weighted projection error sum_k omega_k sum_j alpha_j
// ||y_j^k - Pi_ell y_j^k||_W^2 evaluated column by column.
double projection_error(const SnapshotSet& snaps, const PodBasis& basis, int ell);

// Elementwise bound lambda_{ell+1} / (omega_k alpha_j); zero when ell >= d.
double pointwise_error_bound(const PodBasis& basis, double omega_k,
                             double alpha_j, int ell);

// Greedy multi-trajectory basis construction. eps_pod thresholds the relative
// squared projection error of each trajectory (consistent with compute_pod's
// energy-ratio rule).
PodBasis pod_greedy(const std::vector<Mat>& trajectories, const Vec& alpha,
                    std::shared_ptr<const WeightedSpace> space, double eps_pod,
                    int ell_max);

enum class ProjectMode { WOrthogonal, CrossGram };

// Reduced coefficients of v in span(Psi_ell): W-orthogonal expansion
// c_i = <v, psi_i>_W, or the cross-space Gram system solved in cross_space.
Vec project(const PodBasis& basis, const Vec& v, ProjectMode mode, int ell = -1,
            const WeightedSpace* cross_space = nullptr);

}  // namespace podopt
