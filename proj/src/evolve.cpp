#include "podopt/evolve.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <limits>
#include <sstream>

#include "podopt/errors.hpp"

namespace podopt {

void Trajectory::validate() const {
  if (y.cols() != static_cast<Eigen::Index>(grid.n()))
    throw ConfigError("trajectory column count does not match the time grid");
  if (!y.allFinite()) throw SolverError("trajectory contains NaN/Inf entries");
}

void ControlTrajectory::validate() const {
  if (!u.allFinite()) throw ConfigError("control contains non-finite entries");
  if (ua.size() > 0 && (ua.rows() != u.rows() || ua.cols() != u.cols()))
    throw ConfigError("control lower bound shape mismatch");
  if (ub.size() > 0 && (ub.rows() != u.rows() || ub.cols() != u.cols()))
    throw ConfigError("control upper bound shape mismatch");
  if (ua.size() > 0 && ((u - ua).minCoeff() < -1e-12))
    throw ConfigError("control violates its lower bound");
  if (ub.size() > 0 && ((ub - u).minCoeff() < -1e-12))
    throw ConfigError("control violates its upper bound");
}

ControlTrajectory ControlTrajectory::zero(int mc, int n) {
  return ControlTrajectory{Mat::Zero(mc, n), {}, {}};
}

ControlTrajectory ControlTrajectory::constant(const Vec& value, int n) {
  ControlTrajectory c;
  c.u = value.replicate(1, n);
  return c;
}

Vec OcpSpec::yd1_at(int j, int m) const {
  if (yd1.size() == 0) return Vec::Zero(m);
  return yd1.col(j);
}

Vec OcpSpec::yd2_at(int m) const {
  if (yd2.size() == 0) return Vec::Zero(m);
  return yd2;
}

Vec OcpSpec::unom_at(int j, int mc) const {
  if (u_nom.size() == 0) return Vec::Zero(mc);
  return u_nom.col(j);
}

Mat OcpSpec::unom_full(int mc, int n) const {
  if (u_nom.size() == 0) return Mat::Zero(mc, n);
  return u_nom;
}

Mat OcpSpec::clip(const Mat& u) const {
  Mat v = u;
  if (ua.size() > 0) v = v.cwiseMax(ua);
  if (ub.size() > 0) v = v.cwiseMin(ub);
  return v;
}

void OcpSpec::validate(int m, int mc, int n) const {
  if (sigma1 < 0 || sigma2 < 0) throw ConfigError("negative cost weight");
  if (!has_bounds() && sigma <= 0)
    throw ConfigError("sigma must be positive without control bounds");
  if (sigma < 0) throw ConfigError("negative control regularization");
  if (yd1.size() > 0 && (yd1.rows() != m || yd1.cols() != n))
    throw ConfigError("yd1 shape mismatch");
  if (yd2.size() > 0 && yd2.size() != m) throw ConfigError("yd2 size mismatch");
  if (u_nom.size() > 0 && (u_nom.rows() != mc || u_nom.cols() != n))
    throw ConfigError("u_nom shape mismatch");
  if (ua.size() > 0 && (ua.rows() != mc || ua.cols() != n))
    throw ConfigError("ua shape mismatch");
  if (ub.size() > 0 && (ub.rows() != mc || ub.cols() != n))
    throw ConfigError("ub shape mismatch");
  if (ua.size() > 0 && ub.size() > 0 && (ub - ua).minCoeff() < 0)
    throw ConfigError("ua exceeds ub");
}

void MixedConstraintSpec::validate(int m, int n) const {
  if (eps <= 0 || sigma_w <= 0)
    throw ConfigError("eps and sigma_w must be positive");
  if (ya.size() > 0 && (ya.rows() != m || ya.cols() != n))
    throw ConfigError("ya shape mismatch");
  if (yb.size() > 0 && (yb.rows() != m || yb.cols() != n))
    throw ConfigError("yb shape mismatch");
  if (ya.size() > 0 && yb.size() > 0 && (yb - ya).minCoeff() < 0)
    throw ConfigError("ya exceeds yb");
}

namespace {

void check_control(const FeModel& model, const TimeGrid& grid,
                   const ControlTrajectory& u) {
  if (u.mc() != model.mc() || u.n() != grid.n())
    throw ConfigError("control trajectory shape does not match model/grid");
}

}  // namespace

Trajectory solve_theta(const FeModel& model, const TimeGrid& grid,
                       const ControlTrajectory& u, double theta) {
  if (theta < 0.0 || theta > 1.0) throw ConfigError("theta must lie in [0,1]");
  check_control(model, grid, u);
  const int m = model.m();
  const int n = grid.n();
  Mat y(m, n);
  y.col(0) = model.y0;

  Eigen::SparseLU<SpMat> lu;
  double cached_dt = -1.0;
  double cached_scale = std::numeric_limits<double>::quiet_NaN();
  for (int j = 1; j < n; ++j) {
    const double dtj = grid.dt[j];
    const double tj = grid.t[j];
    const double tp = grid.t[j - 1];
    const double scale = model.advection_scale(tj);
    if (dtj != cached_dt || scale != cached_scale) {
      SpMat lhs = model.M + (theta * dtj) * model.A_at(tj);
      lhs.makeCompressed();
      lu.compute(lhs);
      if (lu.info() != Eigen::Success) {
        std::ostringstream os;
        os << "singular step matrix at node " << j + 1;
        throw SolverError(os.str());
      }
      cached_dt = dtj;
      cached_scale = scale;
    }
    Vec g = model.load_at(tj) + model.B * u.u.col(j);
    Vec rhs = model.M * y.col(j - 1) + (theta * dtj) * g;
    if (theta != 1.0) {
      Vec gp = model.load_at(tp) + model.B * u.u.col(j - 1);
      rhs += (theta - 1.0) * dtj * (model.A_at(tp) * y.col(j - 1)) +
             (1.0 - theta) * dtj * gp;
    }
    y.col(j) = lu.solve(rhs);
    if (lu.info() != Eigen::Success) {
      std::ostringstream os;
      os << "linear solve failed at node " << j + 1;
      throw SolverError(os.str());
    }
  }
  Trajectory traj{std::move(y), grid, TrajKind::State};
  traj.validate();
  return traj;
}

Trajectory solve_semilinear(const FeModel& model, const TimeGrid& grid,
                            const ControlTrajectory& u) {
  if (!model.cubic)
    throw ConfigError("solve_semilinear requires a cubic model");
  check_control(model, grid, u);
  const int m = model.m();
  const int n = grid.n();
  Mat y(m, n);
  y.col(0) = model.y0;

  Eigen::SparseLU<SpMat> lu;
  for (int j = 1; j < n; ++j) {
    const double dtj = grid.dt[j];
    const double tj = grid.t[j];
    SpMat E = model.M + dtj * model.A_at(tj);
    Vec rhs = model.M * y.col(j - 1) +
              dtj * (model.load_at(tj) + model.B * u.u.col(j));
    const double tol = 1e-11 * (1.0 + rhs.lpNorm<Eigen::Infinity>());

    Vec yj = y.col(j - 1);
    double res = std::numeric_limits<double>::infinity();
    bool done = false;
    for (int it = 0; it < 50; ++it) {
      Vec nl = yj.array().cube();
      Vec f = E * yj + dtj * (model.M * nl) - rhs;
      res = f.lpNorm<Eigen::Infinity>();
      if (res <= tol) {
        done = true;
        break;
      }
      Vec w = 3.0 * yj.array().square();
      SpMat jac = E + dtj * SpMat(model.M * w.asDiagonal());
      jac.makeCompressed();
      lu.compute(jac);
      if (lu.info() != Eigen::Success)
        throw SolverError("singular Newton matrix in semilinear step");
      yj -= lu.solve(f);
    }
    if (!done) {
      std::ostringstream os;
      os << "Newton stalled at node " << j + 1 << ", residual " << res;
      throw SolverError(os.str());
    }
    y.col(j) = yj;
  }
  Trajectory traj{std::move(y), grid, TrajKind::State};
  traj.validate();
  return traj;
}

Trajectory solve_state(const FeModel& model, const TimeGrid& grid,
                       const ControlTrajectory& u) {
  return model.cubic ? solve_semilinear(model, grid, u)
                     : solve_theta(model, grid, u, 1.0);
}

Trajectory solve_adjoint(const FeModel& model, const TimeGrid& grid,
                         const Trajectory& state, const OcpSpec& spec) {
  if (!state.grid.same_nodes(grid))
    throw std::invalid_argument("state trajectory lives on a different grid");
  const int m = model.m();
  const int n = grid.n();
  if (state.m() != m) throw ConfigError("state dimension mismatch");
  Mat p = Mat::Zero(m, n);

  Eigen::SparseLU<SpMat> lu;
  double cached_dt = -1.0;
  double cached_scale = std::numeric_limits<double>::quiet_NaN();
  for (int j = n - 1; j >= 1; --j) {
    const double dtj = grid.dt[j];
    const double tj = grid.t[j];
    const double aj = grid.alpha[j];
    const double scale = model.advection_scale(tj);

    if (model.cubic) {
      Vec w = 3.0 * state.y.col(j).array().square();
      SpMat jt = SpMat((model.M + dtj * model.A_at(tj)).transpose()) +
                 dtj * SpMat(w.asDiagonal() * model.M);
      jt.makeCompressed();
      lu.compute(jt);
      cached_dt = -1.0;
    } else if (dtj != cached_dt || scale != cached_scale) {
      SpMat et = SpMat((model.M + dtj * model.A_at(tj)).transpose());
      et.makeCompressed();
      lu.compute(et);
      cached_dt = dtj;
      cached_scale = scale;
    }
    if (lu.info() != Eigen::Success)
      throw SolverError("singular adjoint step matrix");

    Vec src = spec.sigma1 * aj * (spec.yd1_at(j, m) - state.y.col(j));
    if (j == n - 1 && spec.sigma2 != 0.0)
      src += spec.sigma2 * (spec.yd2_at(m) - state.y.col(j));
    Vec rhs = model.M * src;
    if (j < n - 1) rhs += model.M * p.col(j + 1);
    p.col(j) = lu.solve(rhs);
    if (lu.info() != Eigen::Success)
      throw SolverError("adjoint linear solve failed");
  }
  if (n >= 2) p.col(0) = p.col(1);
  Trajectory traj{std::move(p), grid, TrajKind::Adjoint};
  traj.validate();
  return traj;
}

CostParts discrete_cost(const FeModel& model, const TimeGrid& grid,
                        const Trajectory& state, const ControlTrajectory& u,
                        const OcpSpec& spec) {
  const int m = model.m();
  const int n = grid.n();
  CostParts parts;
  for (int j = 0; j < n; ++j) {
    Vec dy = state.y.col(j) - spec.yd1_at(j, m);
    parts.tracking += grid.alpha[j] * dy.dot(model.M * dy);
    Vec du = u.u.col(j) - spec.unom_at(j, u.mc());
    parts.control += grid.alpha[j] * du.squaredNorm();
  }
  Vec dT = state.y.col(n - 1) - spec.yd2_at(m);
  parts.tracking *= 0.5;
  parts.control *= 0.5;
  parts.terminal = 0.5 * dT.dot(model.M * dT);
  parts.total = spec.sigma1 * parts.tracking + spec.sigma2 * parts.terminal +
                spec.sigma * parts.control;
  return parts;
}

double u_inner(const TimeGrid& grid, const Mat& a, const Mat& b) {
  double s = 0.0;
  for (int j = 0; j < static_cast<int>(a.cols()); ++j)
    s += grid.alpha[j] * a.col(j).dot(b.col(j));
  return s;
}

double u_norm(const TimeGrid& grid, const Mat& a) {
  return std::sqrt(std::max(0.0, u_inner(grid, a, a)));
}

}  // namespace podopt
