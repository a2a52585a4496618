#pragma once

#include <memory>
#include <optional>

#include "podopt/deim.hpp"
#include "podopt/evolve.hpp"
#include "podopt/fe_model.hpp"
#include "podopt/pod.hpp"

namespace podopt {

// Galerkin projection of an FeModel onto the leading ell basis columns.
// Operators are grid-free: A^l(t) = Al_base + scale(t) * Al_adv, so one
// RomModel serves any time grid (MPC horizons included).
struct RomModel {
  Mat Psi;             // m x ell
  Mat Ml, Bl;          // ell x ell, ell x m_c
  Mat Al_base, Al_adv; // Psi^T (kappa K + Q) Psi and Psi^T Cv Psi
  Vec y0l;
  Vec b_robin_l, f_l;
  std::shared_ptr<const FeModel> full;
  std::optional<DeimInterpolant> deim;
  bool cubic = false;

  int ell() const { return static_cast<int>(Psi.cols()); }
  int mc() const { return static_cast<int>(Bl.cols()); }
  Mat Al_at(double t) const;
  Vec load_at(double t) const;
  Vec lift(const Vec& yhat) const { return Psi * yhat; }
  Mat lift(const Mat& yhat) const { return Psi * yhat; }
};

RomModel galerkin_project(std::shared_ptr<const FeModel> model,
                          const PodBasis& basis, int ell,
                          ProjectMode y0_mode = ProjectMode::WOrthogonal,
                          const DeimInterpolant* deim = nullptr);

// Reduced implicit Euler (linear) or Newton (cubic) solve; the returned
// trajectory holds the ell-dimensional coefficients.
Trajectory solve_rom(const RomModel& rom, const TimeGrid& grid,
                     const ControlTrajectory& u);

Trajectory lift(const RomModel& rom, const Trajectory& reduced);

// Exact transpose of the reduced discrete cost; mirrors solve_adjoint.
Trajectory rom_adjoint(const RomModel& rom, const TimeGrid& grid,
                       const Trajectory& reduced_state, const OcpSpec& spec);

}  // namespace podopt
