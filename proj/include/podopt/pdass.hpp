#pragma once

#include "podopt/ocp.hpp"

namespace podopt {

struct PdassOptions {
  int max_iter = 50;      // active-set iterations (subproblem solves)
  double cg_tol = 1e-10;  // relative tolerance of the inner subproblem solve
  int cg_max_iter = 0;    // cap on inner iterations; 0 = automatic
  double kkt_tol = 1e-9;  // relative control-space residual audited at exit
  Mat u0;                 // warm-start control; empty = clip(u^n)
  Mat w0;                 // warm-start virtual control; empty = 0
};

// Primal-dual active-set solve of the box- and mixed-constrained problem
//   min  sigma1/2 sum_j alpha_j |y_j - yd1_j|_M^2 + sigma2/2 |y_N - yd2|_M^2
//      + sigma/2 ||u - u^n||_U^2 + sigma_w/2 ||w||_W^2
//   s.t. implicit Euler dynamics,  u_a <= u <= u_b,
//        y_a <= y + eps w <= y_b  nodewise (j >= 1),
// where ||w||_W^2 = sum_j alpha_j w_j^T M w_j. Each iteration classifies the
// nodal constraints by the NCP rules with eta = sigma_w / eps^2
//   lower-active control:  mu + sigma (u - u_a) < 0
//   upper-active control:  mu + sigma (u - u_b) > 0
//   lower-active state:    nu + eta (y + eps w - y_a) < 0
//   upper-active state:    nu + eta (y + eps w - y_b) > 0
// and solves the resulting equality-constrained quadratic subproblem through
// backward-forward sweeps of the coupled state/adjoint system (active state
// nodes contribute the reaction source eta D M D (y - g) to the adjoint),
// accelerated by conjugate gradients in the control-space U-inner product
// over the inactive entries. Terminates when the active sets repeat; hitting
// max_iter returns the last iterate with converged = false.
//
// The returned solution carries the virtual control w (zero off the active
// state nodes), the multipliers mu = (dt/alpha) B^T p - sigma (u - u^n) and
// nu = -sigma_w w / eps, and the full-order (lifted) state and adjoint; the
// adjoint includes the active-set reaction sources. cost holds the standard
// tracking/terminal/control parts; the sigma_w/2 ||w||_W^2 penalty is not
// part of CostParts. A reduced model handle runs the same iteration with
// reduced sweeps while the constraint classification, w and nu live on the
// full nodal grid (the reduced state is lifted for the mask tests).
//
// Requires a linear model (no cubic reaction term) and sigma > 0.
ControlSolution pdass_solve(ModelRef model, const TimeGrid& grid,
                            const OcpSpec& spec,
                            const MixedConstraintSpec& mixed,
                            const PdassOptions& opts = {});

}  // namespace podopt
