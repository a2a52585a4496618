#include "podopt/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "podopt/errors.hpp"

namespace podopt {

double apriori_tail_sum(const PodBasis& basis, TailCase tail_case,
                        const FeModel& model, int ell) {
  if (ell < 0 || ell > basis.d) throw ConfigError("tail rank out of range");
  const SpMat& wv = model.W_V;
  double sum = 0.0;
  for (int i = ell; i < basis.d; ++i) {
    const double lam = basis.lambda(i);
    switch (tail_case) {
      case TailCase::HBasisVNorm: {
        Vec psi = basis.Psi.col(i);
        sum += lam * psi.dot(wv * psi);
        break;
      }
      case TailCase::HBasisVProj: {
        Vec psi = basis.Psi.col(i);
        Vec c = project(basis, psi, ProjectMode::CrossGram, ell,
                        model.spaceV.get());
        Vec d = psi - basis.Psi.leftCols(ell) * c;
        sum += lam * d.dot(wv * d);
        break;
      }
      case TailCase::VBasisHProj: {
        Vec psi = basis.Psi.col(i);
        Vec c = project(basis, psi, ProjectMode::CrossGram, ell,
                        model.spaceH.get());
        Vec d = psi - basis.Psi.leftCols(ell) * c;
        sum += lam * d.dot(wv * d);
        break;
      }
      case TailCase::VBasisPlain:
        sum += lam;
        break;
    }
  }
  return sum;
}

double riesz_dual_norm(const FeModel& model, const Vec& r) {
  return std::sqrt(std::max(0.0, r.dot(model.spaceV->solve_W(r))));
}

namespace {

// Residual of the full implicit Euler step at the lifted reduced solution:
// r_j = M d(y)_j + A_j y_j (+ M N(y_j)) - g_j - B u_j for j >= 2.
Mat full_residuals(const FeModel& full, const Mat& y, const TimeGrid& grid,
                   const ControlTrajectory& u) {
  const int n = grid.n();
  Mat r = Mat::Zero(full.m(), n);
  for (int j = 1; j < n; ++j) {
    const double dtj = grid.dt[j];
    const double tj = grid.t[j];
    Vec rj = full.M * ((y.col(j) - y.col(j - 1)) / dtj) +
             full.A_at(tj) * y.col(j) - full.load_at(tj) -
             full.B * u.u.col(j);
    if (full.cubic) rj += full.M * Vec(y.col(j).array().cube());
    r.col(j) = rj;
  }
  return r;
}

}  // namespace

StateErrorReport aposteriori_state(const FeModel& full, const RomModel& rom,
                                   const Trajectory& reduced,
                                   const ControlTrajectory& u,
                                   const Trajectory* reference, double c_hat) {
  if (full.gamma1 <= 0.0)
    throw ConfigError("aposteriori_state requires a positive gamma1");
  if (full.c_V <= 0.0) throw ConfigError("aposteriori_state requires c_V");
  const TimeGrid& grid = reduced.grid;
  const int n = grid.n();

  StateErrorReport rep;
  rep.gamma1 = full.gamma1;
  rep.c_V = full.c_V;
  rep.zeta = grid.zeta_ratio;

  Mat y = rom.lift(reduced.y);
  Mat res = full_residuals(full, y, grid, u);
  rep.rho = Vec::Zero(n);
  for (int j = 1; j < n; ++j) rep.rho(j) = riesz_dual_norm(full, res.col(j));

  const double g1 = full.gamma1;
  const double cv2 = full.c_V * full.c_V;
  const double dt_min = grid.dt_min;
  const double dt_max = grid.dt_max;

  rep.h_bound2 = Vec::Zero(n);
  Vec e0 = y.col(0) - full.y0;
  const double init2 = e0.dot(full.M * e0);
  rep.h_bound2(0) = init2;
  if (!full.cubic) {
    double acc = 0.0;
    for (int j = 1; j < n; ++j) {
      acc += rep.rho(j) * rep.rho(j);
      rep.h_bound2(j) =
          std::exp(-2.0 * g1 * j * dt_min / cv2) / g1 * dt_max * acc;
    }
  } else {
    const double growth = 1.0 + c_hat * dt_max;
    for (int j = 1; j < n; ++j) {
      double acc = std::pow(growth, j) * init2;
      for (int l = 1; l <= j; ++l)
        acc += std::pow(growth, j + 1 - l) * grid.dt[l] * rep.rho(l) *
               rep.rho(l) / g1;
      rep.h_bound2(j) = acc;
    }
  }

  double vsum = 0.0;
  for (int j = 1; j < n; ++j) vsum += grid.dt[j] * rep.rho(j) * rep.rho(j);
  rep.v_bound2 = rep.zeta / (g1 * g1) * vsum;

  if (reference) {
    if (!reference->grid.same_nodes(grid))
      throw std::invalid_argument("reference lives on a different grid");
    rep.true_h_error = Vec::Zero(n);
    rep.efficiency = Vec::Zero(n);
    for (int j = 0; j < n; ++j) {
      Vec e = reference->y.col(j) - y.col(j);
      rep.true_h_error(j) = std::sqrt(std::max(0.0, e.dot(full.M * e)));
      if (rep.true_h_error(j) > 0.0)
        rep.efficiency(j) =
            std::sqrt(std::max(0.0, rep.h_bound2(j))) / rep.true_h_error(j);
    }
  }
  return rep;
}

void assert_rigor(const StateErrorReport& rep) {
  if (rep.true_h_error.size() == 0) return;
  double scale = 0.0;
  for (int j = 0; j < rep.true_h_error.size(); ++j)
    scale = std::max(scale, rep.true_h_error(j));
  for (int j = 0; j < rep.true_h_error.size(); ++j) {
    const double bound = std::sqrt(std::max(0.0, rep.h_bound2(j)));
    if (rep.true_h_error(j) > bound * (1.0 + 1e-6) + 1e-12 * scale) {
      std::ostringstream os;
      os << "a-posteriori bound " << bound << " underestimates error "
         << rep.true_h_error(j) << " at node " << j + 1;
      throw RigorError(os.str());
    }
  }
}

double aposteriori_gradient(const FeModel& full, const RomModel& rom,
                            const TimeGrid& grid, const ControlTrajectory& u,
                            const OcpSpec& spec) {
  if (full.cubic)
    throw ConfigError("gradient estimator covers the linear model only");
  if (full.gamma1 <= 0.0)
    throw ConfigError("aposteriori_gradient requires a positive gamma1");
  const int n = grid.n();
  const int m = full.m();
  const double g1 = full.gamma1;
  const double cv2 = full.c_V * full.c_V;

  Trajectory yr = solve_rom(rom, grid, u);
  Trajectory pr = rom_adjoint(rom, grid, yr, spec);
  Mat y = rom.lift(yr.y);
  Mat p = rom.lift(pr.y);

  // State residual partial sums drive the H-norm bounds H2_j on the lifted
  // state error.
  Mat res = full_residuals(full, y, grid, u);
  Vec e0 = y.col(0) - full.y0;
  const double r0 = e0.dot(full.M * e0);
  Vec h2 = Vec::Zero(n);
  h2(0) = r0;
  double acc = 0.0;
  for (int j = 1; j < n; ++j) {
    const double rho = riesz_dual_norm(full, res.col(j));
    acc += grid.dt[j] * rho * rho;
    h2(j) = r0 + acc / g1;
  }

  // Dual residual of the lifted reduced adjoint against the full backward
  // scheme.
  double dsum = 0.0;
  for (int j = 1; j < n; ++j) {
    const double dtj = grid.dt[j];
    const double aj = grid.alpha[j];
    Vec lhs = full.M * p.col(j) + dtj * (full.A_at(grid.t[j]).transpose() * p.col(j));
    Vec src = spec.sigma1 * aj * (full.M * (spec.yd1_at(j, m) - y.col(j)));
    if (j == n - 1 && spec.sigma2 != 0.0)
      src += spec.sigma2 * (full.M * (spec.yd2_at(m) - y.col(j)));
    Vec q = lhs - src;
    if (j < n - 1) q -= full.M * p.col(j + 1);
    q /= dtj;
    const double qn = riesz_dual_norm(full, q);
    dsum += dtj * qn * qn;
  }

  double mid = 0.0;
  for (int j = 1; j < n; ++j)
    mid += grid.alpha[j] * grid.alpha[j] / grid.dt[j] * h2(j);
  const double s1 = spec.sigma1;
  const double s2 = spec.sigma2;
  const double total = 2.0 / g1 * s2 * s2 * h2(n - 1) +
                       2.0 * s1 * s1 * cv2 / (g1 * g1) * mid +
                       2.0 / (g1 * g1) * dsum;

  double r_max = 0.0;
  for (int j = 1; j < n; ++j)
    r_max = std::max(r_max, grid.dt[j] / grid.alpha[j]);

  return control_operator_norm(full) * std::sqrt(r_max * total);
}

double estimate_gamma1(const FeModel& model, double t_begin, double t_end) {
  double s_min = std::numeric_limits<double>::infinity();
  double s_max = -s_min;
  for (int k = 0; k <= 4; ++k) {
    const double t = t_begin + (t_end - t_begin) * k / 4.0;
    const double s = model.advection_scale(t);
    s_min = std::min(s_min, s);
    s_max = std::max(s_max, s);
  }
  Mat wv = Mat(model.W_V);
  double lam = std::numeric_limits<double>::infinity();
  for (double s : {s_min, s_max}) {
    Mat a = Mat(model.kappa * model.K + model.Q);
    if (model.Cv.nonZeros() > 0) a += s * Mat(model.Cv);
    Mat sym = 0.5 * (a + a.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> eig(sym, wv,
                                                      Eigen::EigenvaluesOnly);
    lam = std::min(lam, eig.eigenvalues()(0));
    if (s_min == s_max) break;
  }
  return 0.9 * lam;
}

double control_operator_norm(const FeModel& model) {
  Mat winv_b = model.spaceV->solve_W(Mat(model.B));
  Mat g = model.B.transpose() * winv_b;
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (g + g.transpose()));
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

}  // namespace podopt
