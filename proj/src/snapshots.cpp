#include "podopt/snapshots.hpp"

#include <cmath>

#include "podopt/errors.hpp"

namespace podopt {

void SnapshotSet::validate() const {
  if (blocks.empty()) throw ConfigError("snapshot set has no blocks");
  if (!space) throw ConfigError("snapshot set has no weighted space");
  const int mm = m(), nn = n();
  if (space->dim() != mm)
    throw ConfigError("weight matrix dimension does not match snapshots");
  for (const auto& b : blocks)
    if (b.rows() != mm || b.cols() != nn)
      throw ConfigError("all snapshot blocks must share dimensions");
  if (static_cast<int>(omega.size()) != num_blocks())
    throw ConfigError("one trajectory weight per block required");
  for (double w : omega)
    if (!(w > 0.0)) throw ConfigError("trajectory weights must be positive");
  if (alpha.size() != nn)
    throw ConfigError("one temporal weight per column required");
  for (int j = 0; j < nn; ++j)
    if (!(alpha(j) > 0.0)) throw ConfigError("temporal weights must be positive");
}

double SnapshotSet::total_energy() const {
  double total = 0.0;
  for (int k = 0; k < num_blocks(); ++k) {
    const Mat wy = space->apply_W(blocks[k]);
    for (int j = 0; j < n(); ++j)
      total += omega[k] * alpha(j) * blocks[k].col(j).dot(wy.col(j));
  }
  return total;
}

Mat SnapshotSet::stacked() const {
  Mat y(m(), total_columns());
  for (int k = 0; k < num_blocks(); ++k)
    y.middleCols(k * n(), n()) = blocks[k];
  return y;
}

Vec SnapshotSet::column_weights_sqrt() const {
  Vec w(total_columns());
  int c = 0;
  for (int k = 0; k < num_blocks(); ++k)
    for (int j = 0; j < n(); ++j) w(c++) = std::sqrt(omega[k] * alpha(j));
  return w;
}

void SnapshotSet::append_difference_quotients(const TimeGrid& grid) {
  if (grid.n() != n())
    throw ConfigError("time grid does not match snapshot columns");
  const int base = num_blocks();
  for (int k = 0; k < base; ++k) {
    Mat dq = Mat::Zero(m(), n());
    for (int j = 1; j < n(); ++j)
      dq.col(j) = (blocks[k].col(j) - blocks[k].col(j - 1)) / grid.dt[j];
    blocks.push_back(std::move(dq));
    omega.push_back(omega[k]);
  }
  include_dq = true;
}

SnapshotSet make_snapshot_set(std::vector<Mat> blocks, std::vector<double> omega,
                              Vec alpha,
                              std::shared_ptr<const WeightedSpace> space) {
  SnapshotSet s;
  s.blocks = std::move(blocks);
  s.omega = std::move(omega);
  s.alpha = std::move(alpha);
  s.space = std::move(space);
  s.validate();
  return s;
}

}  // namespace podopt
