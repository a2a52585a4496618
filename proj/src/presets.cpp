#include "podopt/presets.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "podopt/errors.hpp"
#include "podopt/estimators.hpp"

namespace podopt {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::shared_ptr<FeModel> build_guiding_model(int resolution, bool cubic) {
  Mesh mesh = build_mesh(2, resolution);

  VelocityField vel;
  vel.magnitude = 1.0;
  vel.time_scale = [](double t) { return 0.1 + 0.1 * t; };

  BoundaryCoeff q;
  q.by_label = {0.01, 0.1, 0.1, 0.0, 0.0};

  ControlShape heater;
  heater.boundary = false;
  heater.value = [](double x, double y) {
    bool in_x = (x >= 0.2 && x <= 0.4) || (x >= 0.6 && x <= 0.8);
    return (in_x && y <= 0.1) ? 0.1 : 0.0;
  };
  ControlShape vent;
  vent.boundary = true;
  vent.boundary_label = 1;
  vent.value = [](double, double) { return 0.1; };

  LoadSpec loads;
  loads.y_out = [](double t) { return 13.0 + 5.0 * std::cos(2.0 * kPi * t / 5.0); };

  double y0_value = cubic ? 1.7 : 17.0;
  auto y0 = [y0_value](double, double) { return y0_value; };

  auto model = std::make_shared<FeModel>(assemble_model(
      mesh, 0.5, vel, q, {heater, vent}, loads, y0, cubic));
  return model;
}

}  // namespace

double guiding_gamma1(const FeModel& model, double T, int resolution, int n,
                      bool cubic) {
  static std::map<std::tuple<int, int, bool>, double> cache;
  static std::mutex mu;
  auto key = std::make_tuple(resolution, n, cubic);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  double g1 = estimate_gamma1(model, 0.0, T);
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, g1);
  return g1;
}

GuidingPreset make_guiding(int resolution, int n, bool cubic) {
  if (resolution < 2 || n < 2) throw ConfigError("make_guiding: resolution and n must be >= 2");
  GuidingPreset p;
  p.model = build_guiding_model(resolution, cubic);
  p.grid = make_time_grid(5.0, n);
  p.model->gamma1 = guiding_gamma1(*p.model, p.grid.T, resolution, n, cubic);
  p.model->c_V = 1.0;

  int m = p.model->m();
  double amp = cubic ? 0.1 : 1.0;
  Vec u2c(2);
  u2c << 1.8 * amp, 4.5 * amp;
  p.u1 = ControlTrajectory::zero(2, n);
  p.u2 = ControlTrajectory::constant(u2c, n);
  p.u3 = ControlTrajectory::zero(2, n);
  for (int j = 0; j < n; ++j) {
    double s = 1.0 - std::cos(2.0 * kPi * p.grid.t[j] / p.grid.T);
    p.u3.u.col(j) = s * u2c;
  }

  double target = cubic ? 1.7 : 17.0;
  p.ocp.sigma1 = 1.0;
  p.ocp.sigma2 = 0.1;
  p.ocp.sigma = 0.1;
  p.ocp.yd1 = Mat::Constant(m, n, target);
  p.ocp.yd2 = Vec::Constant(m, target);
  p.ocp.u_nom = Mat::Zero(2, n);
  return p;
}

SnapshotSet cos_example(int which, int mx, int nt) {
  if (which < 1 || which > 3) throw ConfigError("cos_example: which must be 1, 2 or 3");
  if (mx < 2 || nt < 2) throw ConfigError("cos_example: need mx, nt >= 2");
  double x_len = 2.0 * kPi;
  double t_len = (which == 3) ? 1.0 : 2.0 * kPi;

  Mesh mesh = build_mesh(1, mx, {0.0, x_len});
  VelocityField no_vel;
  BoundaryCoeff no_q;
  LoadSpec no_loads;
  FeModel line = assemble_model(mesh, 1.0, no_vel, no_q, {}, no_loads,
                                [](double, double) { return 0.0; });

  TimeGrid grid = make_time_grid(t_len, nt);
  Mat y(mx, nt);
  for (int j = 0; j < nt; ++j) {
    double t = grid.t[j];
    for (int i = 0; i < mx; ++i) {
      double x = mesh.vertices(i, 0);
      double v = 0.0;
      switch (which) {
        case 1: v = std::cos(t) * std::cos(x); break;
        case 2: v = std::cos(t + x); break;
        default: v = std::cos(t * x); break;
      }
      y(i, j) = v;
    }
  }
  Vec alpha = Eigen::Map<const Vec>(grid.alpha.data(), nt);
  return make_snapshot_set({y}, {1.0}, alpha, line.spaceH);
}

}  // namespace podopt
