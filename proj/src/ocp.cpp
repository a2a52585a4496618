#include "podopt/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "podopt/errors.hpp"
#include "podopt/pod.hpp"
#include "podopt/snapshots.hpp"

namespace podopt {

namespace {

void check_control(ModelRef model, const TimeGrid& grid,
                   const ControlTrajectory& u) {
  if (u.mc() != model.mc()) throw ConfigError("control dimension mismatch");
  if (u.n() != grid.n()) throw ConfigError("control node count mismatch");
}

// U-gradient assembled from an adjoint trajectory (full or reduced).
Mat gradient_from_adjoint(ModelRef model, const TimeGrid& grid,
                          const ControlTrajectory& u, const OcpSpec& spec,
                          const Trajectory& adjoint) {
  const int mc = model.mc();
  const int n = grid.n();
  Mat g = spec.sigma * (u.u - spec.unom_full(mc, n));
  for (int j = 1; j < n; ++j) {
    const double scale = grid.dt[j] / grid.alpha[j];
    if (model.reduced())
      g.col(j) -= scale * (model.rom->Bl.transpose() * adjoint.y.col(j));
    else
      g.col(j) -= scale * (model.full->B.transpose() * adjoint.y.col(j));
  }
  return g;
}

struct Evaluation {
  Trajectory state;
  CostParts cost;
};

Evaluation evaluate(ModelRef model, const TimeGrid& grid,
                    const ControlTrajectory& u, const OcpSpec& spec) {
  Evaluation ev;
  ev.state = ocp_state(model, grid, u);
  ev.cost = ocp_cost(model, grid, ev.state, u, spec);
  return ev;
}

ControlTrajectory with_u(const ControlTrajectory& proto, Mat values) {
  ControlTrajectory c = proto;
  c.u = std::move(values);
  return c;
}

// Shared exit packaging for the two first-order solvers.
ControlSolution finish_solution(ModelRef model, const TimeGrid& grid,
                                const OcpSpec& spec, ControlTrajectory u,
                                const Trajectory& state, const Mat& grad,
                                CostParts cost, double stationarity,
                                int iterations, bool converged,
                                std::vector<IterationRecord> log) {
  ControlSolution sol;
  sol.state = ocp_lift(model, state);
  sol.adjoint = ocp_lift(model, ocp_adjoint(model, grid, state, spec));
  sol.u = std::move(u);
  sol.mu = -grad;
  sol.cost = cost;
  sol.kkt_residual = stationarity;
  sol.iterations = iterations;
  sol.converged = converged;
  sol.log = std::move(log);
  sol.ell = model.reduced() ? model.rom->ell() : 0;
  return sol;
}

}  // namespace

Trajectory ocp_state(ModelRef model, const TimeGrid& grid,
                     const ControlTrajectory& u) {
  check_control(model, grid, u);
  return model.reduced() ? solve_rom(*model.rom, grid, u)
                         : solve_state(*model.full, grid, u);
}

Trajectory ocp_adjoint(ModelRef model, const TimeGrid& grid,
                       const Trajectory& state, const OcpSpec& spec) {
  return model.reduced() ? rom_adjoint(*model.rom, grid, state, spec)
                         : solve_adjoint(*model.full, grid, state, spec);
}

CostParts ocp_cost(ModelRef model, const TimeGrid& grid,
                   const Trajectory& state, const ControlTrajectory& u,
                   const OcpSpec& spec) {
  if (!model.reduced())
    return discrete_cost(*model.full, grid, state, u, spec);
  Trajectory lifted = lift(*model.rom, state);
  return discrete_cost(*model.rom->full, grid, lifted, u, spec);
}

Trajectory ocp_lift(ModelRef model, const Trajectory& traj) {
  return model.reduced() ? lift(*model.rom, traj) : traj;
}

Mat reduced_gradient(ModelRef model, const TimeGrid& grid,
                     const ControlTrajectory& u, const OcpSpec& spec,
                     Trajectory* state_out, Trajectory* adjoint_out) {
  check_control(model, grid, u);
  spec.validate(model.full_model().m(), model.mc(), grid.n());
  Trajectory y = ocp_state(model, grid, u);
  Trajectory p = ocp_adjoint(model, grid, y, spec);
  Mat g = gradient_from_adjoint(model, grid, u, spec, p);
  if (state_out) *state_out = std::move(y);
  if (adjoint_out) *adjoint_out = std::move(p);
  return g;
}

ControlSolution projected_gradient_solve(ModelRef model, const TimeGrid& grid,
                                         const OcpSpec& spec,
                                         const ControlTrajectory& u0,
                                         const PgOptions& opts) {
  check_control(model, grid, u0);
  spec.validate(model.full_model().m(), model.mc(), grid.n());
  if (spec.sigma <= 0.0) throw ConfigError("projected gradient needs sigma > 0");
  const double eta0 = opts.eta0 > 0.0 ? opts.eta0 : 1.0 / spec.sigma;

  ControlTrajectory u = with_u(u0, spec.clip(u0.u));
  Evaluation ev = evaluate(model, grid, u, spec);

  ControlTrajectory best_u = u;
  Evaluation best_ev = ev;
  Mat best_grad;
  double best_stat = std::numeric_limits<double>::infinity();

  std::vector<IterationRecord> log;
  bool converged = false;
  int iter = 0;
  Mat grad;
  double stat = 0.0;

  for (iter = 0; iter < opts.max_iter; ++iter) {
    Trajectory adj = ocp_adjoint(model, grid, ev.state, spec);
    grad = gradient_from_adjoint(model, grid, u, spec, adj);
    stat = u_norm(grid, u.u - spec.clip(u.u - grad));
    if (stat < best_stat) {
      best_stat = stat;
      best_u = u;
      best_ev = ev;
      best_grad = grad;
    }
    const double tol = opts.tol_stat * (1.0 + u_norm(grid, u.u));
    log.push_back({iter, ev.cost.total, stat, 0.0, -1, -1.0});
    if (stat <= tol) {
      converged = true;
      break;
    }

    double eta = eta0;
    bool accepted = false;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      Mat trial = spec.clip(u.u - eta * grad);
      Mat d = trial - u.u;
      const double slope = u_inner(grid, grad, d);
      if (slope >= 0.0) break;  // stationary up to rounding
      ControlTrajectory cand = with_u(u, std::move(trial));
      Evaluation cand_ev = evaluate(model, grid, cand, spec);
      if (cand_ev.cost.total <=
          ev.cost.total + opts.armijo_c * slope +
              1e-14 * (1.0 + std::abs(ev.cost.total))) {
        u = std::move(cand);
        ev = std::move(cand_ev);
        log.back().step = eta;
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;  // no admissible descent step at this precision
  }

  if (!converged) {
    u = best_u;
    ev = best_ev;
    grad = best_grad;
    stat = best_stat;
  }
  if (grad.size() == 0) {
    grad = reduced_gradient(model, grid, u, spec);
    stat = u_norm(grid, u.u - spec.clip(u.u - grad));
  }
  return finish_solution(model, grid, spec, u, ev.state, grad, ev.cost, stat,
                         iter, converged, std::move(log));
}

ControlSolution accelerated_solve(ModelRef model, const TimeGrid& grid,
                                  const OcpSpec& spec,
                                  const ControlTrajectory& u0,
                                  const PgOptions& opts) {
  check_control(model, grid, u0);
  spec.validate(model.full_model().m(), model.mc(), grid.n());
  if (spec.sigma <= 0.0) throw ConfigError("accelerated solve needs sigma > 0");

  ControlTrajectory u = with_u(u0, spec.clip(u0.u));
  ControlTrajectory v = u;
  double t = 1.0;
  double eta = opts.eta0 > 0.0 ? opts.eta0 : 1.0 / spec.sigma;

  Evaluation ev_u = evaluate(model, grid, u, spec);
  ControlTrajectory best_u = u;
  Evaluation best_ev = ev_u;
  double best_stat = std::numeric_limits<double>::infinity();
  Mat best_grad;

  std::vector<IterationRecord> log;
  bool converged = false;
  int iter = 0;

  for (iter = 0; iter < opts.max_iter; ++iter) {
    Evaluation ev_v = evaluate(model, grid, v, spec);
    Trajectory adj_v = ocp_adjoint(model, grid, ev_v.state, spec);
    Mat g_v = gradient_from_adjoint(model, grid, v, spec, adj_v);

    const double stat_v =
        u_norm(grid, v.u - spec.clip(v.u - g_v)) / (1.0 + u_norm(grid, v.u));
    if (stat_v <= opts.tol_stat) {
      // Confirm at the forward point with its own gradient.
      Mat g_u = reduced_gradient(model, grid, u, spec);
      const double stat_u = u_norm(grid, u.u - spec.clip(u.u - g_u));
      log.push_back({iter, ev_u.cost.total, stat_u, eta, -1, -1.0});
      if (stat_u <= opts.tol_stat * (1.0 + u_norm(grid, u.u))) {
        best_u = u;
        best_ev = ev_u;
        best_stat = stat_u;
        best_grad = g_u;
        converged = true;
        break;
      }
    }

    // Backtracked proximal step from v with the quadratic upper model.
    Mat u_new;
    Evaluation ev_new;
    bool accepted = false;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      u_new = spec.clip(v.u - eta * g_v);
      Mat d = u_new - v.u;
      ControlTrajectory cand = with_u(u, u_new);
      ev_new = evaluate(model, grid, cand, spec);
      const double model_bound = ev_v.cost.total + u_inner(grid, g_v, d) +
                                 u_inner(grid, d, d) / (2.0 * eta) +
                                 1e-14 * (1.0 + std::abs(ev_v.cost.total));
      if (ev_new.cost.total <= model_bound) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;

    // Momentum with gradient-based adaptive restart.
    const bool restart = u_inner(grid, g_v, u_new - u.u) > 0.0;
    const double t_next = restart ? 1.0 : 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Mat v_next = restart ? u_new
                         : u_new + ((t - 1.0) / t_next) * (u_new - u.u);
    u.u = u_new;
    ev_u = ev_new;
    v = with_u(v, spec.clip(std::move(v_next)));
    t = t_next;

    if (ev_u.cost.total < best_ev.cost.total) {
      best_u = u;
      best_ev = ev_u;
    }
    log.push_back({iter, ev_u.cost.total, stat_v, eta, -1, -1.0});
    eta = std::min(eta * 1.3, opts.eta0 > 0.0 ? opts.eta0 : 1.0 / spec.sigma);
  }

  ControlTrajectory u_ret = best_u;
  Evaluation ev_ret = best_ev;
  Mat g_ret = best_grad;
  double stat_ret = best_stat;
  if (!std::isfinite(stat_ret) || g_ret.size() == 0) {
    g_ret = reduced_gradient(model, grid, u_ret, spec);
    stat_ret = u_norm(grid, u_ret.u - spec.clip(u_ret.u - g_ret));
  }
  return finish_solution(model, grid, spec, u_ret, ev_ret.state, g_ret,
                         ev_ret.cost, stat_ret, iter, converged, std::move(log));
}

Mat zeta_from_gradient(const Mat& xi, const Mat& value, const Mat& lo,
                       const Mat& hi, double atol) {
  const bool has_lo = lo.size() > 0;
  const bool has_hi = hi.size() > 0;
  Mat zeta(xi.rows(), xi.cols());
  for (int j = 0; j < xi.cols(); ++j) {
    for (int i = 0; i < xi.rows(); ++i) {
      const double x = xi(i, j);
      if (has_lo && value(i, j) <= lo(i, j) + atol)
        zeta(i, j) = -std::min(0.0, x);
      else if (has_hi && value(i, j) >= hi(i, j) - atol)
        zeta(i, j) = -std::max(0.0, x);
      else
        zeta(i, j) = -x;
    }
  }
  return zeta;
}

Certificate aposteriori_control(const FeModel& model, const TimeGrid& grid,
                                const ControlTrajectory& u_cand,
                                const OcpSpec& spec, Trajectory* state_out,
                                Trajectory* adjoint_out) {
  if (spec.sigma <= 0.0) throw ConfigError("certificate needs sigma > 0");
  Mat xi = reduced_gradient(ModelRef(model), grid, u_cand, spec, state_out,
                            adjoint_out);
  const double scale = u_cand.u.size()
                           ? u_cand.u.array().abs().maxCoeff()
                           : 0.0;
  const double atol = 1e-9 * (1.0 + scale);
  Certificate cert;
  cert.zeta = zeta_from_gradient(xi, u_cand.u, spec.ua, spec.ub, atol);
  cert.zeta_norm = u_norm(grid, cert.zeta);
  cert.bound = cert.zeta_norm / spec.sigma;
  return cert;
}

ControlSolution certified_pod_optimize(const FeModel& model,
                                       const TimeGrid& grid,
                                       const OcpSpec& spec,
                                       const CertifiedOptions& opts) {
  const int mc = model.mc();
  const int n = grid.n();
  spec.validate(model.m(), mc, n);
  if (opts.ell0 < 1 || opts.ell0 > opts.ell_max)
    throw ConfigError("need 1 <= ell0 <= ell_max");
  if (opts.eps_apo <= 0.0) throw ConfigError("eps_apo must be positive");

  Mat u_init = opts.u_init.size() ? opts.u_init : spec.unom_full(mc, n);
  if (u_init.rows() != mc || u_init.cols() != n)
    throw ConfigError("u_init has the wrong shape");
  ControlTrajectory u0{spec.clip(u_init), spec.ua, spec.ub};

  // Snapshot pair at the initial control: state and adjoint, equal weights.
  Trajectory y0 = solve_state(model, grid, u0);
  Trajectory p0 = solve_adjoint(model, grid, y0, spec);
  Vec alpha = Eigen::Map<const Vec>(grid.alpha.data(), n);
  SnapshotSet snaps =
      make_snapshot_set({y0.y, p0.y}, {1.0, 1.0}, alpha, model.spaceH);
  if (opts.include_dq) snaps.append_difference_quotients(grid);
  const int col_cap = std::min(model.m(), snaps.total_columns());
  PodBasis basis =
      compute_pod(snaps, RankOrTol::Rank(std::min(opts.ell_max, col_cap)));

  // Non-owning handle for the projection; the ROM never outlives this call.
  std::shared_ptr<const FeModel> handle(std::shared_ptr<const FeModel>(), &model);

  const int ell_cap = std::min(opts.ell_max, basis.d);
  int ell = std::min(opts.ell0, ell_cap);

  ControlSolution out;
  ControlTrajectory warm = u0;
  std::vector<IterationRecord> trail;
  int rounds = 0;
  while (true) {
    ++rounds;
    RomModel rom = galerkin_project(handle, basis, ell);
    ControlSolution sol = projected_gradient_solve(ModelRef(rom), grid, spec,
                                                   warm, opts.pg);
    Trajectory y_full, p_full;
    Certificate cert =
        aposteriori_control(model, grid, sol.u, spec, &y_full, &p_full);
    trail.push_back({rounds - 1, sol.cost.total, sol.kkt_residual, 0.0, ell,
                     cert.bound});
    warm = sol.u;

    const bool ok = cert.bound < opts.eps_apo;
    if (ok || ell >= ell_cap) {
      out = std::move(sol);
      out.state = std::move(y_full);
      out.adjoint = std::move(p_full);
      out.cost = discrete_cost(model, grid, out.state, out.u, spec);
      out.certificate = std::move(cert);
      out.certified = ok;
      out.ell = ell;
      out.iterations = rounds;
      out.log = trail;
      break;
    }
    ell += 1;
  }
  return out;
}

}  // namespace podopt
