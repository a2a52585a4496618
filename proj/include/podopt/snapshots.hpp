#pragma once

#include <memory>
#include <vector>

#include "podopt/time_grid.hpp"
#include "podopt/util.hpp"
#include "podopt/weighted_space.hpp"

namespace podopt {

// Weighted snapshot ensemble: K blocks of m x n coefficient columns with
// trajectory weights omega_k and temporal quadrature weights alpha_j, living
// in a WeightedSpace.
struct SnapshotSet {
  std::vector<Mat> blocks;
  std::vector<double> omega;
  Vec alpha;
  std::shared_ptr<const WeightedSpace> space;
  bool include_dq = false;

  int m() const { return blocks.empty() ? 0 : static_cast<int>(blocks[0].rows()); }
  int n() const { return blocks.empty() ? 0 : static_cast<int>(blocks[0].cols()); }
  int num_blocks() const { return static_cast<int>(blocks.size()); }
  int total_columns() const { return num_blocks() * n(); }

  void validate() const;

  // Total weighted energy sum_k omega_k sum_j alpha_j ||y_j^k||_W^2.
  double total_energy() const;

  // Stacked m x (nK) matrix [Y^1 ... Y^K].
  Mat stacked() const;
  // Column weights sqrt(omega_k * alpha_j) aligned with stacked().
  Vec column_weights_sqrt() const;

  // Appends, for each existing block, a difference-quotient block whose first
  // column is zero and column j >= 2 equals (y_j - y_{j-1}) / dt_j; the new
  // blocks inherit their source block's omega.
  void append_difference_quotients(const TimeGrid& grid);
};

SnapshotSet make_snapshot_set(std::vector<Mat> blocks, std::vector<double> omega,
                              Vec alpha,
                              std::shared_ptr<const WeightedSpace> space);

}  // namespace podopt
