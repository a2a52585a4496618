#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "podopt/mesh.hpp"
#include "podopt/weighted_space.hpp"

namespace podopt {

// Scalar field on the domain, called as f(x, y); 1D passes y = 0.
using SpaceFunc = std::function<double(double, double)>;

// Analytic advection field: 2D rigid rotation about the domain center
// v(x) = magnitude * (y - yc, xc - x), optionally scaled in time; 1D constant
// transport speed = magnitude.
struct VelocityField {
  double magnitude = 0.0;
  std::function<double(double)> time_scale;  // null -> 1
};

// Robin coefficient per boundary label; index 0 is the unlabeled remainder.
struct BoundaryCoeff {
  std::array<double, 5> by_label{0.0, 0.0, 0.0, 0.0, 0.0};
};

// Control actuator: volume shape chi (integrated against hat functions) or a
// boundary shape xi supported on one labeled segment.
struct ControlShape {
  bool boundary = false;
  int boundary_label = 1;
  SpaceFunc value;
};

struct LoadSpec {
  SpaceFunc f;                            // volume source, null -> 0
  std::function<double(double)> f_time;   // null -> 1
  std::function<double(double)> y_out;    // outside data entering via Robin terms, null -> 0
};

// Assembled P1 model of d/dt <y,phi>_H + a(t; y, phi) = <g(t) + Bu(t), phi>.
struct FeModel {
  Mesh mesh;
  SpMat M, K, Cv, Q;                       // mass, stiffness, advection (unit scale), Robin
  std::function<double(double)> c_scale;   // advection time factor, null -> 1
  Mat B;                                   // m x m_c
  Vec b_robin;                             // boundary load shape (integral of q phi_i)
  Vec f_vec;
  std::function<double(double)> f_time;
  std::function<double(double)> y_out;
  Vec y0;
  SpMat W_V;                               // M + K
  double kappa = 1.0;
  bool cubic = false;
  double gamma1 = 1.0, gamma2 = 0.0, c_V = 1.0;  // coercivity metadata
  std::shared_ptr<const WeightedSpace> spaceH, spaceV;

  int m() const { return static_cast<int>(M.rows()); }
  int mc() const { return static_cast<int>(B.cols()); }
  double advection_scale(double t) const { return c_scale ? c_scale(t) : 1.0; }
  SpMat A_at(double t) const;
  Vec load_at(double t) const;
};

FeModel assemble_model(const Mesh& mesh, double kappa,
                       const VelocityField& velocity, const BoundaryCoeff& q,
                       const std::vector<ControlShape>& shapes,
                       const LoadSpec& loads, const SpaceFunc& y0_func,
                       bool cubic = false);

}  // namespace podopt
