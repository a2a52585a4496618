#pragma once

#include "podopt/rom.hpp"

namespace podopt {

// Tail expressions of the reduced-order a-priori error bounds; the unknown
// analytic constant is excluded, so the values are comparable across cases.
enum class TailCase {
  HBasisVNorm = 1,   // sum_{i>l} lambda_i^H |psi_i^H|_V^2
  HBasisVProj = 2,   // sum_{i>l} lambda_i^H |psi_i^H - P_V^l psi_i^H|_V^2
  VBasisHProj = 3,   // sum_{i>l} lambda_i^V |psi_i^V - Q_H^l psi_i^V|_V^2
  VBasisPlain = 4    // sum_{i>l} lambda_i^V
};

double apriori_tail_sum(const PodBasis& basis, TailCase tail_case,
                        const FeModel& model, int ell);

// |r|_{(V^h)'} = sqrt(r' W_V^{-1} r).
double riesz_dual_norm(const FeModel& model, const Vec& r);

struct StateErrorReport {
  Vec rho;           // residual dual norms per node, rho(0) = 0
  Vec h_bound2;      // squared H-norm error bound per node
  double v_bound2 = 0.0;  // bound on sum_j alpha_j |e_j|_V^2
  Vec true_h_error;  // filled when a reference trajectory is supplied
  Vec efficiency;    // bound/error where the error is positive
  double gamma1 = 0.0, c_V = 1.0, zeta = 1.0;
};

// Residual-based bounds for a lifted reduced trajectory against the full
// scheme; rigor is checked by assert_rigor when a reference is attached.
StateErrorReport aposteriori_state(const FeModel& full, const RomModel& rom,
                                   const Trajectory& reduced,
                                   const ControlTrajectory& u,
                                   const Trajectory* reference = nullptr,
                                   double c_hat = 0.0);

void assert_rigor(const StateErrorReport& report);

// Bound on |grad jhat(u) - grad jhat_rom(u)|_U for the linear-quadratic
// problem, from state and dual residuals of the reduced pair.
double aposteriori_gradient(const FeModel& full, const RomModel& rom,
                            const TimeGrid& grid, const ControlTrajectory& u,
                            const OcpSpec& spec);

// 0.9 * min over the advection-scale range of the smallest generalized
// eigenvalue of sym(A(t)) against W_V.
double estimate_gamma1(const FeModel& model, double t_begin, double t_end);

// |B'| = sqrt(lambda_max(B' W_V^{-1} B)).
double control_operator_norm(const FeModel& model);

}  // namespace podopt
