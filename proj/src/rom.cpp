#include "podopt/rom.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <sstream>

#include "podopt/errors.hpp"

namespace podopt {

Mat RomModel::Al_at(double t) const {
  const double s = full->advection_scale(t);
  if (Al_adv.size() == 0 || s == 0.0) return Al_base;
  return Al_base + s * Al_adv;
}

Vec RomModel::load_at(double t) const {
  Vec g = Vec::Zero(ell());
  if (full->y_out) g += full->y_out(t) * b_robin_l;
  if (f_l.size() > 0) g += (full->f_time ? full->f_time(t) : 1.0) * f_l;
  return g;
}

RomModel galerkin_project(std::shared_ptr<const FeModel> model,
                          const PodBasis& basis, int ell, ProjectMode y0_mode,
                          const DeimInterpolant* deim) {
  if (!model) throw ConfigError("galerkin_project requires a model");
  if (ell < 1 || ell > basis.d)
    throw ConfigError("reduced rank outside the basis range");
  if (basis.Psi.rows() != model->M.rows())
    throw ConfigError("basis/model dimension mismatch");

  RomModel rom;
  rom.full = model;
  rom.Psi = basis.basis(ell);
  const Mat& psi = rom.Psi;
  rom.Ml = psi.transpose() * (model->M * psi);
  rom.Al_base = psi.transpose() * ((model->kappa * model->K + model->Q) * psi);
  if (model->Cv.nonZeros() > 0)
    rom.Al_adv = psi.transpose() * (model->Cv * psi);
  rom.Bl = psi.transpose() * model->B;
  rom.b_robin_l = psi.transpose() * model->b_robin;
  if (model->f_vec.size() > 0) rom.f_l = psi.transpose() * model->f_vec;
  rom.y0l = project(basis, model->y0, y0_mode, ell, model->spaceH.get());
  rom.cubic = model->cubic;
  if (deim) {
    rom.deim = *deim;
    rom.deim->attach(*model, psi);
  }
  return rom;
}

namespace {

Vec reduced_cubic(const RomModel& rom, const Vec& yhat) {
  if (rom.deim) return rom.deim->apply(yhat);
  Vec y = rom.Psi * yhat;
  return rom.Psi.transpose() * (rom.full->M * Vec(y.array().cube()));
}

Mat reduced_cubic_jacobian(const RomModel& rom, const Vec& yhat) {
  if (rom.deim) return rom.deim->jacobian(yhat);
  Vec y = rom.Psi * yhat;
  Vec w = 3.0 * y.array().square();
  return rom.Psi.transpose() * (rom.full->M * w.asDiagonal() * rom.Psi);
}

}  // namespace

Trajectory solve_rom(const RomModel& rom, const TimeGrid& grid,
                     const ControlTrajectory& u) {
  const int l = rom.ell();
  const int n = grid.n();
  if (u.mc() != rom.mc() || u.n() != n)
    throw ConfigError("control trajectory shape does not match rom/grid");
  Mat y(l, n);
  y.col(0) = rom.y0l;

  for (int j = 1; j < n; ++j) {
    const double dtj = grid.dt[j];
    const double tj = grid.t[j];
    Mat e = rom.Ml + dtj * rom.Al_at(tj);
    Vec rhs = rom.Ml * y.col(j - 1) +
              dtj * (rom.load_at(tj) + rom.Bl * u.u.col(j));
    if (!rom.cubic) {
      y.col(j) = e.partialPivLu().solve(rhs);
      continue;
    }
    const double tol = 1e-11 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    Vec yj = y.col(j - 1);
    double res = std::numeric_limits<double>::infinity();
    bool done = false;
    for (int it = 0; it < 50; ++it) {
      Vec f = e * yj + dtj * reduced_cubic(rom, yj) - rhs;
      res = f.lpNorm<Eigen::Infinity>();
      if (res <= tol) {
        done = true;
        break;
      }
      Mat jac = e + dtj * reduced_cubic_jacobian(rom, yj);
      yj -= jac.partialPivLu().solve(f);
    }
    if (!done) {
      std::ostringstream os;
      os << "reduced Newton stalled at node " << j + 1 << ", residual " << res;
      throw SolverError(os.str());
    }
    y.col(j) = yj;
  }
  Trajectory traj{std::move(y), grid, TrajKind::State};
  traj.validate();
  return traj;
}

Trajectory lift(const RomModel& rom, const Trajectory& reduced) {
  Trajectory full{rom.Psi * reduced.y, reduced.grid, reduced.kind};
  return full;
}

Trajectory rom_adjoint(const RomModel& rom, const TimeGrid& grid,
                       const Trajectory& reduced_state, const OcpSpec& spec) {
  if (!reduced_state.grid.same_nodes(grid))
    throw std::invalid_argument("reduced state lives on a different grid");
  const int l = rom.ell();
  const int n = grid.n();
  const int m = rom.full->m();
  const Mat& psi = rom.Psi;
  Mat p = Mat::Zero(l, n);

  for (int j = n - 1; j >= 1; --j) {
    const double dtj = grid.dt[j];
    const double tj = grid.t[j];
    const double aj = grid.alpha[j];
    Mat et = (rom.Ml + dtj * rom.Al_at(tj)).transpose();
    if (rom.cubic)
      et += dtj * reduced_cubic_jacobian(rom, reduced_state.y.col(j)).transpose();

    // Reduced tracking source: Psi^T M (yd1 - Psi yhat).
    Vec src = spec.sigma1 * aj *
              (psi.transpose() * (rom.full->M * spec.yd1_at(j, m)) -
               rom.Ml * reduced_state.y.col(j));
    if (j == n - 1 && spec.sigma2 != 0.0)
      src += spec.sigma2 * (psi.transpose() * (rom.full->M * spec.yd2_at(m)) -
                            rom.Ml * reduced_state.y.col(j));
    Vec rhs = src;
    if (j < n - 1) rhs += rom.Ml * p.col(j + 1);
    p.col(j) = et.partialPivLu().solve(rhs);
  }
  if (n >= 2) p.col(0) = p.col(1);
  Trajectory traj{std::move(p), grid, TrajKind::Adjoint};
  traj.validate();
  return traj;
}

}  // namespace podopt
