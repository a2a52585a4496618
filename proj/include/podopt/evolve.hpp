#pragma once

#include "podopt/fe_model.hpp"
#include "podopt/ocp_spec.hpp"
#include "podopt/trajectory.hpp"

namespace podopt {

// theta-scheme time stepping of the linear parabolic system; theta = 1 is
// implicit Euler, theta = 0.5 Crank-Nicolson.
Trajectory solve_theta(const FeModel& model, const TimeGrid& grid,
                       const ControlTrajectory& u, double theta = 1.0);

// Implicit Euler with the nodal cubic term, Newton per step.
Trajectory solve_semilinear(const FeModel& model, const TimeGrid& grid,
                            const ControlTrajectory& u);

// Dispatch on model.cubic.
Trajectory solve_state(const FeModel& model, const TimeGrid& grid,
                       const ControlTrajectory& u);

// Backward adjoint sweep: the exact transpose of the implicit Euler forward
// scheme against the discrete cost, so adjoint gradients match finite
// differences of the discrete cost to machine precision.
Trajectory solve_adjoint(const FeModel& model, const TimeGrid& grid,
                         const Trajectory& state, const OcpSpec& spec);

struct CostParts {
  double total = 0.0;
  double tracking = 0.0;  // 1/2 sum_j alpha_j |y_j - yd1_j|_M^2
  double terminal = 0.0;  // 1/2 |y_n - yd2|_M^2
  double control = 0.0;   // 1/2 sum_j alpha_j |u_j - u_nom_j|^2
};

CostParts discrete_cost(const FeModel& model, const TimeGrid& grid,
                        const Trajectory& state, const ControlTrajectory& u,
                        const OcpSpec& spec);

// Control-space inner product sum_j alpha_j a_j . b_j and its norm.
double u_inner(const TimeGrid& grid, const Mat& a, const Mat& b);
double u_norm(const TimeGrid& grid, const Mat& a);

}  // namespace podopt
