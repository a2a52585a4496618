#pragma once

#include "podopt/time_grid.hpp"
#include "podopt/util.hpp"

namespace podopt {

enum class TrajKind { State, Adjoint };

// Time-node-aligned coefficient matrix: column j holds the coefficients at
// grid node j.
struct Trajectory {
  Mat y;
  TimeGrid grid;
  TrajKind kind = TrajKind::State;

  int m() const { return static_cast<int>(y.rows()); }
  int n() const { return static_cast<int>(y.cols()); }
  void validate() const;
};

// Control values per time node, with optional box bounds attached.
struct ControlTrajectory {
  Mat u;        // m_c x n
  Mat ua, ub;   // same shape when present; empty means unbounded

  int mc() const { return static_cast<int>(u.rows()); }
  int n() const { return static_cast<int>(u.cols()); }
  bool has_bounds() const { return ua.size() > 0 || ub.size() > 0; }
  void validate() const;

  static ControlTrajectory zero(int mc, int n);
  static ControlTrajectory constant(const Vec& value, int n);
};

}  // namespace podopt
