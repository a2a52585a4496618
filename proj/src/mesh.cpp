#include "podopt/mesh.hpp"

#include <cmath>

#include "podopt/errors.hpp"

namespace podopt {

double Mesh::domain_measure() const {
  if (dimension == 1) return xb[1] - xb[0];
  return (xb[1] - xb[0]) * (yb[1] - yb[0]);
}

static Mesh build_mesh_1d(int r, std::array<double, 2> xb) {
  Mesh mesh;
  mesh.dimension = 1;
  mesh.xb = xb;
  mesh.vertices.resize(r, 1);
  const double len = xb[1] - xb[0];
  for (int i = 0; i < r; ++i)
    mesh.vertices(i, 0) = xb[0] + len * static_cast<double>(i) / (r - 1);
  mesh.elements.resize(r - 1, 2);
  for (int e = 0; e < r - 1; ++e) {
    mesh.elements(e, 0) = e;
    mesh.elements(e, 1) = e + 1;
  }
  mesh.h = len / (r - 1);
  mesh.vertex_label.assign(r, -1);
  mesh.vertex_label[0] = 1;
  mesh.vertex_label[r - 1] = 2;
  mesh.boundary_edges.push_back({0, 0, 1});
  mesh.boundary_edges.push_back({r - 1, r - 1, 2});
  return mesh;
}

static Mesh build_mesh_2d(int r, std::array<double, 2> xb,
                          std::array<double, 2> yb) {
  Mesh mesh;
  mesh.dimension = 2;
  mesh.xb = xb;
  mesh.yb = yb;
  const int m = r * r;
  mesh.vertices.resize(m, 2);
  const double lx = xb[1] - xb[0];
  const double ly = yb[1] - yb[0];
  auto vid = [r](int i, int j) { return j * r + i; };
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < r; ++i) {
      mesh.vertices(vid(i, j), 0) = xb[0] + lx * static_cast<double>(i) / (r - 1);
      mesh.vertices(vid(i, j), 1) = yb[0] + ly * static_cast<double>(j) / (r - 1);
    }

  const int nc = r - 1;
  mesh.elements.resize(2 * nc * nc, 3);
  int e = 0;
  for (int j = 0; j < nc; ++j)
    for (int i = 0; i < nc; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      mesh.elements.row(e++) << v00, v10, v11;
      mesh.elements.row(e++) << v00, v11, v01;
    }
  const double hx = lx / nc, hy = ly / nc;
  mesh.h = std::sqrt(hx * hx + hy * hy);

  mesh.vertex_label.assign(m, -1);
  // side: 3 bottom, 2 right half-labeled, 4 top, 1 left half-labeled; the
  // left/right sides classify each edge by its midpoint's y-fraction.
  auto add_edge = [&](int a, int b, int side) {
    int label = side;
    if (side == 1 || side == 2) {
      const double my = 0.5 * (mesh.vertices(a, 1) + mesh.vertices(b, 1));
      const double fy = (my - yb[0]) / (yb[1] - yb[0]);
      if (side == 1) label = fy >= 0.75 ? 1 : 0;
      if (side == 2) label = fy <= 0.25 ? 2 : 0;
    }
    mesh.boundary_edges.push_back({a, b, label});
  };
  for (int i = 0; i < nc; ++i) add_edge(vid(i, 0), vid(i + 1, 0), 3);
  for (int j = 0; j < nc; ++j) add_edge(vid(r - 1, j), vid(r - 1, j + 1), 2);
  for (int i = nc; i > 0; --i) add_edge(vid(i, r - 1), vid(i - 1, r - 1), 4);
  for (int j = nc; j > 0; --j) add_edge(vid(0, j), vid(0, j - 1), 1);

  // Vertex labels: bottom/top first, then the labeled quarters, else 0.
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < r; ++i) {
      if (i > 0 && i < r - 1 && j > 0 && j < r - 1) continue;
      const int v = vid(i, j);
      const double fy = static_cast<double>(j) / (r - 1);
      if (j == 0)
        mesh.vertex_label[v] = 3;
      else if (j == r - 1)
        mesh.vertex_label[v] = 4;
      else if (i == 0)
        mesh.vertex_label[v] = fy >= 0.75 ? 1 : 0;
      else
        mesh.vertex_label[v] = fy <= 0.25 ? 2 : 0;
    }
  return mesh;
}

Mesh build_mesh(int dimension, int resolution, std::array<double, 2> xb,
                std::array<double, 2> yb) {
  if (resolution < 2) throw ConfigError("mesh resolution must be >= 2");
  if (!(xb[1] > xb[0]) || (dimension == 2 && !(yb[1] > yb[0])))
    throw ConfigError("degenerate domain bounds");
  if (dimension == 1) return build_mesh_1d(resolution, xb);
  if (dimension == 2) return build_mesh_2d(resolution, xb, yb);
  throw ConfigError("mesh dimension must be 1 or 2");
}

}  // namespace podopt
