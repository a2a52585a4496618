#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace podopt {

// Structured P1 mesh of an interval (1D) or an axis-aligned rectangle split
// into two triangles per cell (2D). Boundary segments of the rectangle carry
// labels following the guiding geometry:
//   1: left edge, upper quarter (y-fraction in [0.75, 1])
//   2: right edge, lower quarter (y-fraction in [0, 0.25])
//   3: bottom edge, 4: top edge, 0: remaining left/right parts.
// 1D: vertex 0 has label 1, the last vertex label 2.
struct Mesh {
  int dimension = 1;
  Eigen::MatrixXd vertices;   // m x dimension
  Eigen::MatrixXi elements;   // ne x (dimension+1)
  double h = 0.0;             // max element diameter

  struct BoundaryEdge {
    int a = 0, b = 0;  // vertex indices (2D edges; 1D: a==b, a point)
    int label = 0;
  };
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<int> vertex_label;  // -1 interior, else boundary label

  std::array<double, 2> xb{0.0, 1.0};
  std::array<double, 2> yb{0.0, 1.0};

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_elements() const { return static_cast<int>(elements.rows()); }
  double domain_measure() const;
};

Mesh build_mesh(int dimension, int resolution,
                std::array<double, 2> xb = {0.0, 1.0},
                std::array<double, 2> yb = {0.0, 1.0});

}  // namespace podopt
