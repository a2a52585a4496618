#pragma once

#include <optional>
#include <vector>

#include "podopt/evolve.hpp"
#include "podopt/ocp_spec.hpp"
#include "podopt/rom.hpp"
#include "podopt/trajectory.hpp"

namespace podopt {

// Dispatch handle over the two model orders: exactly one pointer is set.
// Functions taking a ModelRef run the full-order evolve path or the reduced
// path and agree on the discrete cost (the reduced cost is the full cost of
// the lifted trajectory, which is what the reduced adjoint transposes).
struct ModelRef {
  const FeModel* full = nullptr;
  const RomModel* rom = nullptr;

  ModelRef(const FeModel& f) : full(&f) {}
  ModelRef(const RomModel& r) : rom(&r) {}

  bool reduced() const { return rom != nullptr; }
  const FeModel& full_model() const { return reduced() ? *rom->full : *full; }
  int mc() const { return reduced() ? rom->mc() : full->mc(); }
  int state_dim() const { return reduced() ? rom->ell() : full->m(); }
};

// Forward state / backward adjoint / discrete cost through either path. The
// trajectories carry reduced coefficients for a ROM handle; ocp_lift maps
// them to full coefficients (identity for a full handle).
Trajectory ocp_state(ModelRef model, const TimeGrid& grid,
                     const ControlTrajectory& u);
Trajectory ocp_adjoint(ModelRef model, const TimeGrid& grid,
                       const Trajectory& state, const OcpSpec& spec);
CostParts ocp_cost(ModelRef model, const TimeGrid& grid,
                   const Trajectory& state, const ControlTrajectory& u,
                   const OcpSpec& spec);
Trajectory ocp_lift(ModelRef model, const Trajectory& traj);

// U-gradient of the reduced cost u -> J(y(u), u): per node
//   g_j = sigma (u_j - u^n_j) - (dt_j / alpha_j) B^T p_j   (j >= 1),
//   g_0 = sigma (u_0 - u^n_0),
// the exact transpose of the implicit Euler scheme against the discrete cost
// (node 0 carries no dynamics, so only the control term survives there).
// Optionally returns the state/adjoint used (reduced coefficients for a ROM).
Mat reduced_gradient(ModelRef model, const TimeGrid& grid,
                     const ControlTrajectory& u, const OcpSpec& spec,
                     Trajectory* state_out = nullptr,
                     Trajectory* adjoint_out = nullptr);

struct IterationRecord {
  int iter = 0;
  double cost = 0.0;
  double stationarity = 0.0;
  double step = 0.0;
  int ell = -1;         // basis rank (certified runs), -1 otherwise
  double bound = -1.0;  // certificate bound (certified runs), -1 otherwise
};

// Perturbation certificate: for a candidate control u^c and the full-order
// optimum u*, ||u* - u^c||_U <= ||zeta||_U / sigma, with zeta built from the
// full-order U-gradient xi at u^c by the three-case rule (lower-active:
// -min(0, xi); upper-active: -max(0, xi); inactive: -xi).
struct Certificate {
  Mat zeta;               // m_c x n perturbation
  double zeta_norm = 0.0; // ||zeta||_U
  double bound = 0.0;     // zeta_norm / sigma
};

struct ControlSolution {
  ControlTrajectory u;
  Trajectory state;    // full-order coefficients (lifted for reduced runs)
  Trajectory adjoint;  // same convention
  Mat w;               // m x n virtual control (mixed-constraint runs)
  Mat mu;              // m_c x n control multiplier (dt/alpha) B^T p - sigma(u - u^n)
  Mat nu;              // m x n state multiplier -sigma_w w / eps (mixed-constraint runs)
  CostParts cost;
  double kkt_residual = 0.0;  // projected-gradient stationarity at exit
  int iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> log;
  std::optional<Certificate> certificate;
  int ell = 0;  // basis rank of the solve (0 = full order)
  bool certified = false;
};

struct PgOptions {
  double tol_stat = 1e-8;  // relative: stops at tol_stat * (1 + ||u||_U)
  int max_iter = 500;
  double armijo_c = 1e-4;
  double eta0 = -1.0;      // initial step; <= 0 means 1 / sigma
  int max_backtracks = 60;
};

// Projected gradient u <- clip(u - eta g) with Armijo backtracking on the
// discrete cost. Stops at stationarity ||u - clip(u - g)||_U <= tol_stat *
// (1 + ||u||_U); hitting max_iter returns the best iterate not converged.
ControlSolution projected_gradient_solve(ModelRef model, const TimeGrid& grid,
                                         const OcpSpec& spec,
                                         const ControlTrajectory& u0,
                                         const PgOptions& opts = {});

// Accelerated projected gradient (momentum with adaptive restart and a
// backtracked quadratic-model step). Solves the same problem to the same
// stationarity measure; kept as an algorithmically independent cross-check
// and for tight-tolerance reference solves.
ControlSolution accelerated_solve(ModelRef model, const TimeGrid& grid,
                                  const OcpSpec& spec,
                                  const ControlTrajectory& u0,
                                  const PgOptions& opts = {});

// Three-case perturbation from a U-gradient xi and the box geometry at the
// candidate value: entries at the lower bound take -min(0, xi), entries at
// the upper bound take -max(0, xi), interior entries take -xi. Empty bound
// matrices mean that side is unbounded. atol is the at-bound tolerance.
Mat zeta_from_gradient(const Mat& xi, const Mat& value, const Mat& lo,
                       const Mat& hi, double atol);

// Certificate for a candidate control: computes the full-order state and
// adjoint at u_cand, the U-gradient xi, and the three-case zeta; the bound
// ||zeta||_U / sigma dominates ||u* - u_cand||_U for the full optimum u*.
// Optionally returns the full-order state/adjoint used.
Certificate aposteriori_control(const FeModel& model, const TimeGrid& grid,
                                const ControlTrajectory& u_cand,
                                const OcpSpec& spec,
                                Trajectory* state_out = nullptr,
                                Trajectory* adjoint_out = nullptr);

struct CertifiedOptions {
  int ell0 = 2;
  int ell_max = 20;
  double eps_apo = 1e-4;
  Mat u_init;          // initial control for snapshot generation; empty = clip(u^n)
  PgOptions pg;        // inner reduced-problem solver options
  bool include_dq = false;  // enrich snapshots with difference quotients
};

// Reduced-basis optimization with certification: builds state+adjoint
// snapshots at the initial control, computes one basis at ell_max, then for
// ell = ell0, ell0+1, ... solves the reduced problem and certifies the
// candidate with aposteriori_control until bound < eps_apo or ell = ell_max.
// The returned solution carries the certificate trail in its log; certified
// stays false if the target was not reached at ell_max.
ControlSolution certified_pod_optimize(const FeModel& model,
                                       const TimeGrid& grid,
                                       const OcpSpec& spec,
                                       const CertifiedOptions& opts = {});

}  // namespace podopt
