#pragma once

#include <memory>

#include "podopt/evolve.hpp"
#include "podopt/ocp_spec.hpp"
#include "podopt/snapshots.hpp"

namespace podopt {

// Desk-scale room model on the unit square: diffusion kappa=0.5, rotating
// velocity about the center ramped by (0.1 + 0.1 t), Robin heat exchange with
// a periodic outside temperature, one volume heater and one boundary heater.
// Ships the three reference inputs (off / constant / periodic) and the
// temperature-holding cost data used across the control experiments.
struct GuidingPreset {
  std::shared_ptr<FeModel> model;
  TimeGrid grid;
  ControlTrajectory u1, u2, u3;
  OcpSpec ocp;
};

// resolution = vertices per axis (m = resolution^2), n = time nodes on [0,5].
// cubic adds the y^3 reaction term to the same geometry (with a milder initial
// state so the reaction stays in a sane range).
GuidingPreset make_guiding(int resolution = 27, int n = 100, bool cubic = false);

// Coercivity constant for a preset model over its time horizon, memoized per
// (resolution, n, cubic) key so repeated preset construction stays cheap.
double guiding_gamma1(const FeModel& model, double T, int resolution, int n,
                      bool cubic);

// 1D mass-weighted sample sets of closed-form fields used by the spectral
// regression studies: which = 1 -> cos(t)cos(x) on [0,2pi]^2 (rank 1),
// 2 -> cos(t+x) on [0,2pi]^2 (rank 2), 3 -> cos(t*x) on [0,1]x[0,2pi].
SnapshotSet cos_example(int which, int mx = 50, int nt = 50);

}  // namespace podopt
