#include "podopt/fe_model.hpp"

#include <cmath>

#include "podopt/errors.hpp"

namespace podopt {

using Triplet = Eigen::Triplet<double>;

SpMat FeModel::A_at(double t) const {
  SpMat a = kappa * K + Q;
  const double cs = advection_scale(t);
  if (Cv.nonZeros() > 0 && cs != 0.0) a += cs * Cv;
  return a;
}

Vec FeModel::load_at(double t) const {
  Vec g = Vec::Zero(m());
  if (y_out) g += y_out(t) * b_robin;
  if (f_vec.size() > 0) g += (f_time ? f_time(t) : 1.0) * f_vec;
  return g;
}

namespace {

struct Assembler {
  const Mesh& mesh;
  int m;
  std::vector<Triplet> tm, tk, tc, tq;
  Vec b_robin;

  explicit Assembler(const Mesh& me)
      : mesh(me), m(me.num_vertices()), b_robin(Vec::Zero(m)) {}

  void volume_1d(const VelocityField& vel) {
    for (int e = 0; e < mesh.num_elements(); ++e) {
      const int a = mesh.elements(e, 0), b = mesh.elements(e, 1);
      const double xa = mesh.vertices(a, 0), xb = mesh.vertices(b, 0);
      const double h = xb - xa;
      const int id[2] = {a, b};
      const double me[2][2] = {{h / 3.0, h / 6.0}, {h / 6.0, h / 3.0}};
      const double ke[2][2] = {{1.0 / h, -1.0 / h}, {-1.0 / h, 1.0 / h}};
      const double dphi[2] = {-1.0 / h, 1.0 / h};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          tm.emplace_back(id[i], id[j], me[i][j]);
          tk.emplace_back(id[i], id[j], ke[i][j]);
          if (vel.magnitude != 0.0)
            tc.emplace_back(id[i], id[j], vel.magnitude * dphi[j] * 0.5 * h);
        }
    }
  }

  void volume_2d(const VelocityField& vel) {
    const double xc = 0.5 * (mesh.xb[0] + mesh.xb[1]);
    const double yc = 0.5 * (mesh.yb[0] + mesh.yb[1]);
    for (int e = 0; e < mesh.num_elements(); ++e) {
      const int id[3] = {mesh.elements(e, 0), mesh.elements(e, 1),
                         mesh.elements(e, 2)};
      double px[3], py[3];
      for (int i = 0; i < 3; ++i) {
        px[i] = mesh.vertices(id[i], 0);
        py[i] = mesh.vertices(id[i], 1);
      }
      const double det = (px[1] - px[0]) * (py[2] - py[0]) -
                         (px[2] - px[0]) * (py[1] - py[0]);
      const double area = 0.5 * std::abs(det);
      double gx[3], gy[3];
      for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3, k = (i + 2) % 3;
        gx[i] = (py[j] - py[k]) / det;
        gy[i] = (px[k] - px[j]) / det;
      }
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          tm.emplace_back(id[i], id[j], area / 12.0 * (i == j ? 2.0 : 1.0));
          tk.emplace_back(id[i], id[j], area * (gx[i] * gx[j] + gy[i] * gy[j]));
        }
      if (vel.magnitude != 0.0) {
        const double mx = (px[0] + px[1] + px[2]) / 3.0;
        const double my = (py[0] + py[1] + py[2]) / 3.0;
        const double vx = vel.magnitude * (my - yc);
        const double vy = vel.magnitude * (xc - mx);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            tc.emplace_back(id[i], id[j],
                            area / 3.0 * (vx * gx[j] + vy * gy[j]));
      }
    }
  }

  void robin(const BoundaryCoeff& q) {
    for (const auto& be : mesh.boundary_edges) {
      const double qv = q.by_label[static_cast<std::size_t>(be.label)];
      if (qv == 0.0) continue;
      if (mesh.dimension == 1) {
        tq.emplace_back(be.a, be.a, qv);
        b_robin(be.a) += qv;
      } else {
        const double dx = mesh.vertices(be.b, 0) - mesh.vertices(be.a, 0);
        const double dy = mesh.vertices(be.b, 1) - mesh.vertices(be.a, 1);
        const double len = std::sqrt(dx * dx + dy * dy);
        tq.emplace_back(be.a, be.a, qv * len / 3.0);
        tq.emplace_back(be.b, be.b, qv * len / 3.0);
        tq.emplace_back(be.a, be.b, qv * len / 6.0);
        tq.emplace_back(be.b, be.a, qv * len / 6.0);
        b_robin(be.a) += qv * len / 2.0;
        b_robin(be.b) += qv * len / 2.0;
      }
    }
  }

  Vec volume_functional(const SpaceFunc& f) const {
    Vec out = Vec::Zero(m);
    if (!f) return out;
    if (mesh.dimension == 1) {
      for (int e = 0; e < mesh.num_elements(); ++e) {
        const int a = mesh.elements(e, 0), b = mesh.elements(e, 1);
        const double xa = mesh.vertices(a, 0), xb = mesh.vertices(b, 0);
        const double h = xb - xa;
        const double fv = f(0.5 * (xa + xb), 0.0);
        out(a) += fv * h / 2.0;
        out(b) += fv * h / 2.0;
      }
    } else {
      for (int e = 0; e < mesh.num_elements(); ++e) {
        const int id[3] = {mesh.elements(e, 0), mesh.elements(e, 1),
                           mesh.elements(e, 2)};
        double px[3], py[3];
        for (int i = 0; i < 3; ++i) {
          px[i] = mesh.vertices(id[i], 0);
          py[i] = mesh.vertices(id[i], 1);
        }
        const double det = (px[1] - px[0]) * (py[2] - py[0]) -
                           (px[2] - px[0]) * (py[1] - py[0]);
        const double area = 0.5 * std::abs(det);
        const double fv =
            f((px[0] + px[1] + px[2]) / 3.0, (py[0] + py[1] + py[2]) / 3.0);
        for (int i = 0; i < 3; ++i) out(id[i]) += fv * area / 3.0;
      }
    }
    return out;
  }

  Vec boundary_functional(const SpaceFunc& xi, int label) const {
    Vec out = Vec::Zero(m);
    for (const auto& be : mesh.boundary_edges) {
      if (be.label != label) continue;
      if (mesh.dimension == 1) {
        out(be.a) += xi(mesh.vertices(be.a, 0), 0.0);
      } else {
        const double ax = mesh.vertices(be.a, 0), ay = mesh.vertices(be.a, 1);
        const double bx = mesh.vertices(be.b, 0), by = mesh.vertices(be.b, 1);
        const double len = std::hypot(bx - ax, by - ay);
        const double xv = xi(0.5 * (ax + bx), 0.5 * (ay + by));
        out(be.a) += xv * len / 2.0;
        out(be.b) += xv * len / 2.0;
      }
    }
    return out;
  }
};

SpMat from_triplets(int m, const std::vector<Triplet>& trip) {
  SpMat a(m, m);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  return a;
}

}  // namespace

FeModel assemble_model(const Mesh& mesh, double kappa,
                       const VelocityField& velocity, const BoundaryCoeff& q,
                       const std::vector<ControlShape>& shapes,
                       const LoadSpec& loads, const SpaceFunc& y0_func,
                       bool cubic) {
  if (!(kappa > 0.0)) throw ConfigError("diffusion coefficient must be positive");
  for (double qv : q.by_label)
    if (qv < 0.0) throw ConfigError("Robin coefficients must be nonnegative");

  Assembler as(mesh);
  if (mesh.dimension == 1)
    as.volume_1d(velocity);
  else
    as.volume_2d(velocity);
  as.robin(q);

  FeModel model;
  model.mesh = mesh;
  model.kappa = kappa;
  model.cubic = cubic;
  const int m = as.m;
  model.M = from_triplets(m, as.tm);
  model.K = from_triplets(m, as.tk);
  model.Cv = from_triplets(m, as.tc);
  model.Q = from_triplets(m, as.tq);
  model.c_scale = velocity.time_scale;
  model.b_robin = as.b_robin;
  model.f_vec = as.volume_functional(loads.f);
  model.f_time = loads.f_time;
  model.y_out = loads.y_out;

  model.B.resize(m, static_cast<int>(shapes.size()));
  for (std::size_t c = 0; c < shapes.size(); ++c) {
    const auto& sh = shapes[c];
    Vec col = sh.boundary ? as.boundary_functional(sh.value, sh.boundary_label)
                          : as.volume_functional(sh.value);
    if (col.norm() == 0.0)
      throw ConfigError("control shape " + std::to_string(c) +
                        " vanishes on the mesh");
    model.B.col(static_cast<int>(c)) = col;
  }

  model.y0 = Vec::Zero(m);
  if (y0_func)
    for (int i = 0; i < m; ++i)
      model.y0(i) = y0_func(mesh.vertices(i, 0),
                            mesh.dimension == 2 ? mesh.vertices(i, 1) : 0.0);

  model.W_V = model.M + model.K;
  model.W_V.makeCompressed();
  model.spaceH =
      std::make_shared<WeightedSpace>(model.M, WeightedSpace::Tag::MassH);
  model.spaceV =
      std::make_shared<WeightedSpace>(model.W_V, WeightedSpace::Tag::EnergyV);
  return model;
}

}  // namespace podopt
