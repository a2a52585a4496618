#include "podopt/time_grid.hpp"

#include <algorithm>
#include <cmath>

#include "podopt/errors.hpp"

namespace podopt {

static TimeGrid finalize(std::vector<double> nodes) {
  const int n = static_cast<int>(nodes.size());
  if (n < 2) throw ConfigError("time grid needs at least 2 nodes");
  for (int j = 1; j < n; ++j)
    if (!(nodes[j] > nodes[j - 1]))
      throw ConfigError("time grid nodes must be strictly increasing");

  TimeGrid g;
  g.t = std::move(nodes);
  g.T = g.t.back() - g.t.front();
  g.dt.assign(n, 0.0);
  for (int j = 1; j < n; ++j) g.dt[j] = g.t[j] - g.t[j - 1];
  g.dt_min = *std::min_element(g.dt.begin() + 1, g.dt.end());
  g.dt_max = *std::max_element(g.dt.begin() + 1, g.dt.end());
  g.zeta_ratio = g.dt_max / g.dt_min;

  g.alpha.assign(n, 0.0);
  g.alpha[0] = 0.5 * g.dt[1];
  for (int j = 1; j < n - 1; ++j) g.alpha[j] = 0.5 * (g.dt[j] + g.dt[j + 1]);
  g.alpha[n - 1] = 0.5 * g.dt[n - 1];
  return g;
}

TimeGrid make_time_grid(double T, int n) {
  if (!(T > 0.0)) throw ConfigError("time horizon must be positive");
  if (n < 2) throw ConfigError("time grid needs at least 2 nodes");
  std::vector<double> nodes(n);
  for (int j = 0; j < n; ++j) nodes[j] = T * static_cast<double>(j) / (n - 1);
  nodes[0] = 0.0;
  nodes[n - 1] = T;
  return finalize(std::move(nodes));
}

TimeGrid make_time_grid(std::vector<double> nodes) {
  return finalize(std::move(nodes));
}

bool TimeGrid::same_nodes(const TimeGrid& other, double tol) const {
  if (t.size() != other.t.size()) return false;
  for (std::size_t j = 0; j < t.size(); ++j)
    if (std::abs(t[j] - other.t[j]) > tol * (1.0 + std::abs(t[j]))) return false;
  return true;
}

TimeGrid TimeGrid::subgrid(int first, int last) const {
  if (first < 0 || last >= n() || last - first < 1)
    throw ConfigError("invalid subgrid range");
  std::vector<double> nodes(t.begin() + first, t.begin() + last + 1);
  return finalize(std::move(nodes));
}

}  // namespace podopt
