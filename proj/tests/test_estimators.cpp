#include "podopt/estimators.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "doctest.h"
#include "podopt/errors.hpp"
#include "podopt/presets.hpp"

using namespace podopt;

namespace {

std::shared_ptr<FeModel> line_model(int mx, bool cubic) {
  Mesh mesh = build_mesh(1, mx);
  VelocityField no_vel;
  BoundaryCoeff q;
  q.by_label = {0.0, 0.2, 0.1, 0.0, 0.0};
  ControlShape shape;
  shape.boundary = false;
  shape.value = [](double x, double) { return 1.0 + x; };
  LoadSpec loads;
  loads.f = [](double x, double) { return 0.4 * std::sin(3.0 * x); };
  loads.f_time = [](double t) { return 1.0 + 0.5 * std::cos(t); };
  loads.y_out = [](double t) { return 0.3 + 0.1 * std::sin(t); };
  auto y0 = [](double x, double) { return std::sin(3.14159265358979323846 * x); };
  return std::make_shared<FeModel>(
      assemble_model(mesh, 1.0, no_vel, q, {shape}, loads, y0, cubic));
}

ControlTrajectory wiggly_control(int mc, const TimeGrid& grid, double scale,
                                 unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  ControlTrajectory u = ControlTrajectory::zero(mc, grid.n());
  for (int c = 0; c < mc; ++c) {
    double a = nd(gen), b = nd(gen), w = 1.0 + std::abs(nd(gen));
    for (int j = 0; j < grid.n(); ++j)
      u.u(c, j) = scale * (a * std::cos(w * grid.t[j]) + b);
  }
  return u;
}

PodBasis identity_basis(int m) {
  PodBasis b;
  b.Psi = Mat::Identity(m, m);
  b.lambda = Vec::Ones(m);
  b.total_energy = static_cast<double>(m);
  b.d = m;
  b.ell = m;
  b.space = std::make_shared<WeightedSpace>(
      SpMat(Mat::Identity(m, m).sparseView()), WeightedSpace::Tag::Identity);
  return b;
}

PodBasis basis_in_space(const std::shared_ptr<FeModel>& model,
                        const TimeGrid& grid, const ControlTrajectory& u,
                        const std::shared_ptr<const WeightedSpace>& space,
                        bool with_dq) {
  Trajectory y = solve_state(*model, grid, u);
  Vec alpha = Eigen::Map<const Vec>(grid.alpha.data(), grid.n());
  SnapshotSet snaps = make_snapshot_set({y.y}, {1.0}, alpha, space);
  if (with_dq) snaps.append_difference_quotients(grid);
  return compute_pod(snaps, RankOrTol::Tol(1e-14));
}

// W-orthogonal projection coefficients by dense normal equations, formed
// independently of the library's projector.
Vec dense_proj_coeffs(const Mat& psi_l, const Mat& w, const Vec& v) {
  Mat gram = psi_l.transpose() * w * psi_l;
  Vec rhs = psi_l.transpose() * (w * v);
  return gram.ldlt().solve(rhs);
}

double h_node_error2(const FeModel& model, const Vec& a, const Vec& b) {
  Vec d = a - b;
  return d.dot(model.M * d);
}

}  // namespace

TEST_CASE("estimators: tail sums match direct oracles and vanish at full rank") {
  GuidingPreset gp = make_guiding(8, 20);
  const FeModel& model = *gp.model;

  PodBasis bh = basis_in_space(gp.model, gp.grid, gp.u3, model.spaceH, false);
  PodBasis bv = basis_in_space(gp.model, gp.grid, gp.u3, model.spaceV, false);
  REQUIRE(bh.d >= 4);
  REQUIRE(bv.d >= 4);

  for (TailCase tc : {TailCase::HBasisVNorm, TailCase::HBasisVProj}) {
    CHECK(apriori_tail_sum(bh, tc, model, bh.d) == 0.0);
  }
  for (TailCase tc : {TailCase::VBasisHProj, TailCase::VBasisPlain}) {
    CHECK(apriori_tail_sum(bv, tc, model, bv.d) == 0.0);
  }

  const Mat wv = Mat(model.W_V);
  const Mat wh = Mat(model.M);

  for (int ell : {1, bh.d / 2}) {
    double got1 = apriori_tail_sum(bh, TailCase::HBasisVNorm, model, ell);
    double oracle1 = 0.0;
    for (int i = ell; i < bh.d; ++i) {
      Vec psi = bh.Psi.col(i);
      oracle1 += bh.lambda(i) * psi.dot(wv * psi);
    }
    CHECK(got1 == doctest::Approx(oracle1).epsilon(1e-10));

    double got2 = apriori_tail_sum(bh, TailCase::HBasisVProj, model, ell);
    double oracle2 = 0.0;
    for (int i = ell; i < bh.d; ++i) {
      Vec psi = bh.Psi.col(i);
      Vec c = dense_proj_coeffs(bh.Psi.leftCols(ell), wv, psi);
      Vec d = psi - bh.Psi.leftCols(ell) * c;
      oracle2 += bh.lambda(i) * d.dot(wv * d);
    }
    CHECK(got2 == doctest::Approx(oracle2).epsilon(1e-8));
    CHECK(got2 <= got1 * (1.0 + 1e-10));

    double got3 = apriori_tail_sum(bv, TailCase::VBasisHProj, model, ell);
    double oracle3 = 0.0;
    for (int i = ell; i < bv.d; ++i) {
      Vec psi = bv.Psi.col(i);
      Vec c = dense_proj_coeffs(bv.Psi.leftCols(ell), wh, psi);
      Vec d = psi - bv.Psi.leftCols(ell) * c;
      oracle3 += bv.lambda(i) * d.dot(wv * d);
    }
    CHECK(got3 == doctest::Approx(oracle3).epsilon(1e-8));

    double got4 = apriori_tail_sum(bv, TailCase::VBasisPlain, model, ell);
    double oracle4 = 0.0;
    for (int i = ell; i < bv.d; ++i) oracle4 += bv.lambda(i);
    CHECK(got4 == doctest::Approx(oracle4).epsilon(1e-12));
    CHECK(got4 == doctest::Approx(bv.tail(ell)).epsilon(1e-12));
  }

  CHECK_THROWS_AS(apriori_tail_sum(bh, TailCase::HBasisVNorm, model, -1),
                  ConfigError);
  CHECK_THROWS_AS(apriori_tail_sum(bh, TailCase::HBasisVNorm, model, bh.d + 1),
                  ConfigError);
}

TEST_CASE("estimators: riesz dual norm is the supremum over test directions") {
  auto model = line_model(30, false);
  const int m = model->m();
  const Mat wv = Mat(model->W_V);

  CHECK(riesz_dual_norm(*model, Vec::Zero(m)) == 0.0);

  std::mt19937 gen(123u);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 3; ++trial) {
    Vec r(m);
    for (int i = 0; i < m; ++i) r(i) = nd(gen);

    double got = riesz_dual_norm(*model, r);
    Vec winv_r = wv.ldlt().solve(r);
    double direct = std::sqrt(r.dot(winv_r));
    CHECK(got == doctest::Approx(direct).epsilon(1e-10));

    auto wnorm = [&](const Vec& x) { return std::sqrt(x.dot(wv * x)); };
    double sampled = 0.0;
    for (int k = 0; k < 200; ++k) {
      Vec v(m);
      for (int i = 0; i < m; ++i) v(i) = nd(gen);
      if (k % 2 == 0) v = winv_r + 0.05 * (wnorm(winv_r) / wnorm(v)) * v;
      double ratio = r.dot(v) / wnorm(v);
      CHECK(ratio <= got * (1.0 + 1e-10) + 1e-12);
      sampled = std::max(sampled, ratio);
    }
    CHECK(sampled >= 0.98 * got);
  }
}

TEST_CASE("estimators: identity basis gives vanishing residuals and bounds") {
  auto model = line_model(24, false);
  model->gamma1 = estimate_gamma1(*model, 0.0, 1.5);
  REQUIRE(model->gamma1 > 0.0);
  TimeGrid grid = make_time_grid(1.5, 30);
  ControlTrajectory u = wiggly_control(1, grid, 0.8, 5u);

  PodBasis basis = identity_basis(model->m());
  RomModel rom = galerkin_project(model, basis, model->m());
  Trajectory red = solve_rom(rom, grid, u);
  Trajectory full = solve_state(*model, grid, u);

  StateErrorReport rep = aposteriori_state(*model, rom, red, u, &full);
  double yscale = 0.0;
  for (int j = 0; j < grid.n(); ++j)
    yscale = std::max(yscale, std::sqrt(h_node_error2(*model, full.y.col(j),
                                                      Vec::Zero(model->m()))));
  CHECK(rep.rho.maxCoeff() <= 1e-9 * (1.0 + yscale));
  CHECK(rep.h_bound2.maxCoeff() <= 1e-16 * (1.0 + yscale * yscale));
  CHECK(rep.v_bound2 <= 1e-16 * (1.0 + yscale * yscale));
  CHECK(rep.true_h_error.maxCoeff() <= 1e-9 * (1.0 + yscale));
  CHECK_NOTHROW(assert_rigor(rep));
}

TEST_CASE("estimators: state bounds dominate the true error on the guiding preset") {
  GuidingPreset gp = make_guiding(8, 25);
  REQUIRE(gp.model->gamma1 > 0.0);
  PodBasis basis = basis_in_space(gp.model, gp.grid, gp.u3, gp.model->spaceH, true);
  Trajectory full = solve_state(*gp.model, gp.grid, gp.u3);
  const Mat wv = Mat(gp.model->W_V);

  for (int ell : {2, 4, 6}) {
    if (ell > basis.d) continue;
    RomModel rom = galerkin_project(gp.model, basis, ell);
    Trajectory red = solve_rom(rom, gp.grid, gp.u3);
    StateErrorReport rep = aposteriori_state(*gp.model, rom, red, gp.u3, &full);
    CHECK_NOTHROW(assert_rigor(rep));

    Mat lifted = rom.lift(red.y);
    double vsum_true = 0.0;
    for (int j = 1; j < gp.grid.n(); ++j) {
      Vec e = full.y.col(j) - lifted.col(j);
      vsum_true += gp.grid.alpha[j] * e.dot(wv * e);
    }
    CHECK(vsum_true <= rep.v_bound2 * (1.0 + 1e-6) + 1e-12);

    double max_eff = 0.0;
    for (int j = 0; j < rep.efficiency.size(); ++j)
      max_eff = std::max(max_eff, rep.efficiency(j));
    MESSAGE("ell=" << ell << " max efficiency " << max_eff);
  }
}

TEST_CASE("estimators: semilinear growth recursion stays rigorous") {
  auto model = line_model(16, true);
  model->gamma1 = estimate_gamma1(*model, 0.0, 1.0);
  REQUIRE(model->gamma1 > 0.0);
  TimeGrid grid = make_time_grid(1.0, 20);
  ControlTrajectory u = wiggly_control(1, grid, 0.5, 9u);

  PodBasis ib = identity_basis(model->m());
  RomModel irom = galerkin_project(model, ib, model->m());
  Trajectory ired = solve_rom(irom, grid, u);
  Trajectory full = solve_state(*model, grid, u);
  StateErrorReport irep = aposteriori_state(*model, irom, ired, u, &full);
  CHECK(irep.rho.maxCoeff() <= 1e-8);
  CHECK_NOTHROW(assert_rigor(irep));

  PodBasis basis = basis_in_space(model, grid, u, model->spaceH, false);
  int ell = std::min(basis.d, 3);
  RomModel rom = galerkin_project(model, basis, ell);
  Trajectory red = solve_rom(rom, grid, u);

  StateErrorReport rep0 = aposteriori_state(*model, rom, red, u, &full, 0.0);
  CHECK_NOTHROW(assert_rigor(rep0));
  StateErrorReport rep2 = aposteriori_state(*model, rom, red, u, &full, 2.0);
  CHECK_NOTHROW(assert_rigor(rep2));
  for (int j = 0; j < grid.n(); ++j)
    CHECK(rep2.h_bound2(j) >= rep0.h_bound2(j) * (1.0 - 1e-12));
}

TEST_CASE("estimators: state estimator rejects bad configuration") {
  auto model = line_model(12, false);
  model->gamma1 = 0.0;
  TimeGrid grid = make_time_grid(1.0, 8);
  ControlTrajectory u = ControlTrajectory::zero(1, grid.n());
  PodBasis basis = identity_basis(model->m());
  RomModel rom = galerkin_project(model, basis, model->m());
  Trajectory red = solve_rom(rom, grid, u);

  CHECK_THROWS_AS(aposteriori_state(*model, rom, red, u), ConfigError);
  model->gamma1 = 0.5;
  model->c_V = 0.0;
  CHECK_THROWS_AS(aposteriori_state(*model, rom, red, u), ConfigError);
  model->c_V = 1.0;

  TimeGrid other = make_time_grid(1.0, 9);
  Trajectory ref = solve_state(*model, other, ControlTrajectory::zero(1, other.n()));
  CHECK_THROWS_AS(aposteriori_state(*model, rom, red, u, &ref),
                  std::invalid_argument);
}

TEST_CASE("estimators: gradient bound vanishes in trivial cases") {
  auto model = line_model(20, false);
  model->gamma1 = estimate_gamma1(*model, 0.0, 1.2);
  REQUIRE(model->gamma1 > 0.0);
  TimeGrid grid = make_time_grid(1.2, 15);
  ControlTrajectory u = wiggly_control(1, grid, 0.6, 21u);

  OcpSpec spec;
  spec.sigma1 = 1.3;
  spec.sigma2 = 0.7;
  spec.sigma = 0.05;
  spec.yd1 = Mat::Constant(model->m(), grid.n(), 0.4);

  PodBasis basis = identity_basis(model->m());
  RomModel rom = galerkin_project(model, basis, model->m());
  double bound = aposteriori_gradient(*model, rom, grid, u, spec);
  CHECK(bound >= 0.0);
  CHECK(bound <= 1e-7);

  OcpSpec off = spec;
  off.sigma1 = 0.0;
  off.sigma2 = 0.0;
  CHECK(aposteriori_gradient(*model, rom, grid, u, off) == 0.0);
}

TEST_CASE("estimators: gradient bound dominates the gap on seeded configurations") {
  GuidingPreset gp = make_guiding(7, 15);
  REQUIRE(gp.model->gamma1 > 0.0);
  PodBasis basis = basis_in_space(gp.model, gp.grid, gp.u3, gp.model->spaceH, true);
  const TimeGrid& grid = gp.grid;
  const int n = grid.n();
  const int mc = static_cast<int>(gp.model->B.cols());

  auto u_gap = [&](const Mat& a) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += grid.alpha[j] * a.col(j).squaredNorm();
    return std::sqrt(s);
  };

  for (unsigned seed = 0; seed < 10; ++seed) {
    std::mt19937 gen(seed);
    std::uniform_int_distribution<int> lpick(2, std::min(6, basis.d));
    std::uniform_real_distribution<double> ud(0.2, 2.0);
    int ell = lpick(gen);

    OcpSpec spec = gp.ocp;
    spec.sigma1 = ud(gen);
    spec.sigma2 = (seed % 3 == 0) ? 0.0 : 0.5 * ud(gen);
    spec.sigma = 0.1;

    ControlTrajectory u = wiggly_control(mc, grid, 2.0, 100 + seed);
    RomModel rom = galerkin_project(gp.model, basis, ell);

    double bound = aposteriori_gradient(*gp.model, rom, grid, u, spec);
    CHECK(std::isfinite(bound));

    Trajectory yf = solve_state(*gp.model, grid, u);
    Trajectory pf = solve_adjoint(*gp.model, grid, yf, spec);
    Trajectory yr = solve_rom(rom, grid, u);
    Trajectory pr = rom_adjoint(rom, grid, yr, spec);

    Mat diff = Mat::Zero(mc, n);
    for (int j = 1; j < n; ++j)
      diff.col(j) = (grid.dt[j] / grid.alpha[j]) *
                    (gp.model->B.transpose() * pf.y.col(j) -
                     rom.Bl.transpose() * pr.y.col(j));
    double gap = u_gap(diff);
    CHECK(gap <= bound * (1.0 + 1e-9) + 1e-14);
    if (gap > 0.0) MESSAGE("seed " << seed << " overestimation " << bound / gap);
  }
}

TEST_CASE("estimators: gradient estimator rejects unsupported models") {
  auto cubic = line_model(10, true);
  cubic->gamma1 = 0.4;
  TimeGrid grid = make_time_grid(1.0, 6);
  ControlTrajectory u = ControlTrajectory::zero(1, grid.n());
  PodBasis basis = identity_basis(cubic->m());
  RomModel rom = galerkin_project(cubic, basis, cubic->m());
  CHECK_THROWS_AS(aposteriori_gradient(*cubic, rom, grid, u, OcpSpec{}),
                  ConfigError);

  auto linear = line_model(10, false);
  linear->gamma1 = -1.0;
  RomModel lrom = galerkin_project(linear, identity_basis(linear->m()),
                                   linear->m());
  CHECK_THROWS_AS(aposteriori_gradient(*linear, lrom, grid, u, OcpSpec{}),
                  ConfigError);
}

TEST_CASE("estimators: gamma1 estimate and control operator norm behave") {
  GuidingPreset gp = make_guiding(8, 10);
  double g = estimate_gamma1(*gp.model, 0.0, 5.0);
  CHECK(g > 0.0);
  CHECK(std::isfinite(g));

  auto line = line_model(14, false);
  CHECK(estimate_gamma1(*line, 0.0, 1.0) > 0.0);

  Mesh mesh = build_mesh(1, 14);
  VelocityField no_vel;
  BoundaryCoeff q0;
  ControlShape shape;
  shape.boundary = false;
  shape.value = [](double, double) { return 1.0; };
  auto neumann = std::make_shared<FeModel>(assemble_model(
      mesh, 1.0, no_vel, q0, {shape}, LoadSpec{},
      [](double, double) { return 0.0; }, false));
  CHECK(std::abs(estimate_gamma1(*neumann, 0.0, 1.0)) <= 1e-10);

  const Mat wv = Mat(line->W_V);
  Mat bmat = Mat(line->B);
  Mat gram = bmat.transpose() * wv.ldlt().solve(bmat);
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (gram + gram.transpose()));
  double oracle = std::sqrt(eig.eigenvalues().maxCoeff());
  CHECK(control_operator_norm(*line) == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(control_operator_norm(*gp.model) > 0.0);
}
