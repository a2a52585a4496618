#pragma once

#include <vector>

namespace podopt {

// Time grid t_1=0 < ... < t_n=T with trapezoidal quadrature weights.
// 0-based storage: t[0..n-1]; dt[j] = t[j]-t[j-1] for j>=1 (dt[0]=0 placeholder).
// Weights: alpha[0] = dt[1]/2, alpha[j] = (dt[j]+dt[j+1])/2 interior,
// alpha[n-1] = dt[n-1]/2, so that sum(alpha) = T.
struct TimeGrid {
  std::vector<double> t;
  std::vector<double> dt;
  std::vector<double> alpha;
  double T = 0.0;
  double dt_min = 0.0;
  double dt_max = 0.0;
  double zeta_ratio = 1.0;

  int n() const { return static_cast<int>(t.size()); }
  bool same_nodes(const TimeGrid& other, double tol = 1e-14) const;
  // Sub-grid over node indices [first, last] (inclusive), keeping absolute times.
  TimeGrid subgrid(int first, int last) const;
};

TimeGrid make_time_grid(double T, int n);
TimeGrid make_time_grid(std::vector<double> nodes);

}  // namespace podopt
