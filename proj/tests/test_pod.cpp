#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "podopt/errors.hpp"
#include "podopt/fe_model.hpp"
#include "podopt/mesh.hpp"
#include "podopt/pod.hpp"
#include "podopt/snapshots.hpp"
#include "podopt/time_grid.hpp"
#include "podopt/util.hpp"

using namespace podopt;

namespace {

std::shared_ptr<WeightedSpace> identity_space(int m) {
  SpMat w(m, m);
  w.setIdentity();
  return std::make_shared<WeightedSpace>(w, WeightedSpace::Tag::Identity);
}

// 1D P1 consistent mass matrix on a uniform grid over [a, b].
std::shared_ptr<WeightedSpace> mass_space_1d(int m, double a, double b) {
  auto mesh = build_mesh(1, m, {a, b});
  auto model = assemble_model(mesh, 1.0, VelocityField{}, BoundaryCoeff{},
                              {ControlShape{false, 1,
                                            [](double, double) { return 1.0; }}},
                              LoadSpec{}, nullptr);
  return std::make_shared<WeightedSpace>(model.M, WeightedSpace::Tag::MassH);
}

SnapshotSet sampled_set(const std::function<double(double, double)>& f,
                        int mx, int nt, double xa, double xb, double ta,
                        double tb) {
  auto space = mass_space_1d(mx, xa, xb);
  std::vector<double> tn(nt);
  for (int j = 0; j < nt; ++j)
    tn[j] = ta + (tb - ta) * static_cast<double>(j) / (nt - 1);
  auto grid = make_time_grid(tn);
  Mat y(mx, nt);
  for (int j = 0; j < nt; ++j)
    for (int i = 0; i < mx; ++i) {
      const double x = xa + (xb - xa) * static_cast<double>(i) / (mx - 1);
      y(i, j) = f(tn[j], x);
    }
  Vec alpha = Eigen::Map<const Vec>(grid.alpha.data(), nt);
  return make_snapshot_set({y}, {1.0}, alpha, space);
}

// Brute-force weighted projection error, written independently of the library
// internals: explicit per-column residual against the lifted W-projection.
double oracle_projection_error(const SnapshotSet& s, const Mat& psi) {
  Mat w = Mat(s.space->W());
  double total = 0.0;
  for (int k = 0; k < s.num_blocks(); ++k)
    for (int j = 0; j < s.n(); ++j) {
      Vec y = s.blocks[k].col(j);
      Vec proj = Vec::Zero(y.size());
      for (int i = 0; i < psi.cols(); ++i)
        proj += (psi.col(i).dot(w * y)) * psi.col(i);
      Vec r = y - proj;
      total += s.omega[k] * s.alpha(j) * r.dot(w * r);
    }
  return total;
}

double projector_gap(const Mat& psi1, const Mat& psi2, const Mat& w) {
  Mat p1 = psi1 * psi1.transpose() * w;
  Mat p2 = psi2 * psi2.transpose() * w;
  return (p1 - p2).norm();
}

SnapshotSet random_set(Rng& rng, int m, int n, int K,
                       std::shared_ptr<const WeightedSpace> space) {
  std::vector<Mat> blocks;
  std::vector<double> omega;
  for (int k = 0; k < K; ++k) {
    blocks.push_back(rng.normal_matrix(m, n));
    omega.push_back(rng.uniform(0.5, 2.0));
  }
  Vec alpha(n);
  for (int j = 0; j < n; ++j) alpha(j) = rng.uniform(0.2, 1.5);
  return make_snapshot_set(std::move(blocks), std::move(omega), alpha,
                           std::move(space));
}

}  // namespace

TEST_CASE("rank-1 snapshot (2,0) with identity weight: lambda=4, psi=e1") {
  Mat y(2, 1);
  y << 2.0, 0.0;
  auto s = make_snapshot_set({y}, {1.0}, Vec::Ones(1), identity_space(2));
  auto b = compute_pod(s, RankOrTol::Rank(1), PodStrategy::Svd);
  REQUIRE(b.d == 1);
  CHECK(b.lambda(0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(b.Psi(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(b.Psi(1, 0)) <= 1e-12);
}

TEST_CASE("identity snapshots: tied eigenvalues, deterministic sign fix") {
  Mat y = Mat::Identity(2, 2);
  auto s = make_snapshot_set({y}, {1.0}, Vec::Ones(2), identity_space(2));
  for (auto strat :
       {PodStrategy::Svd, PodStrategy::GramM, PodStrategy::GramSnapshots}) {
    auto b = compute_pod(s, RankOrTol::Rank(2), strat);
    REQUIRE(b.d == 2);
    CHECK(b.lambda(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.lambda(1) == doctest::Approx(1.0).epsilon(1e-12));
    for (int c = 0; c < 2; ++c) {
      int arg;
      b.Psi.col(c).cwiseAbs().maxCoeff(&arg);
      CHECK(b.Psi(arg, c) > 0.0);
    }
    Mat gram = b.Psi.transpose() * b.Psi;
    CHECK((gram - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("cos(t)cos(x) collapses to one mode; lambda1 matches Gram oracle") {
  auto s = sampled_set([](double t, double x) { return std::cos(t) * std::cos(x); },
                       50, 50, 0.0, 2.0 * M_PI, 0.0, 2.0 * M_PI);
  auto b = compute_pod(s, RankOrTol::Rank(5));
  CHECK(b.lambda(1) / b.lambda(0) < 1e-10);

  // Independent dense eigensolve of the weighted snapshot Gram matrix.
  const Mat y = s.blocks[0];
  const Mat w = Mat(s.space->W());
  const int n = s.n();
  Mat g(n, n);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c)
      g(a, c) = std::sqrt(s.alpha(a) * s.alpha(c)) * y.col(a).dot(w * y.col(c));
  Eigen::SelfAdjointEigenSolver<Mat> eig(g);
  const double lam1_oracle = eig.eigenvalues()(n - 1);
  CHECK(b.lambda(0) == doctest::Approx(lam1_oracle).epsilon(1e-9));
}

TEST_CASE("cos(t+x) needs exactly two modes") {
  auto s = sampled_set([](double t, double x) { return std::cos(t + x); }, 50,
                       50, 0.0, 2.0 * M_PI, 0.0, 2.0 * M_PI);
  auto b = compute_pod(s, RankOrTol::Rank(5));
  CHECK(b.lambda(2) / b.lambda(0) < 1e-10);
  CHECK(b.lambda(1) / b.lambda(0) > 1e-6);

  // projection_error at ell=1 equals lambda2 of the same decomposition.
  const double err1 = projection_error(s, b, 1);
  CHECK(err1 == doctest::Approx(b.lambda(1)).epsilon(1e-8));
}

TEST_CASE("projection error: complete basis reproduces, brute force agrees") {
  Rng rng(11);
  auto s = random_set(rng, 5, 8, 1, identity_space(5));
  auto b = compute_pod(s, RankOrTol::Rank(5), PodStrategy::Svd);
  CHECK(projection_error(s, b, b.d) <= 1e-10 * b.total_energy);
  const double direct = projection_error(s, b, 2);
  const double oracle = oracle_projection_error(s, b.Psi.leftCols(2));
  CHECK(direct == doctest::Approx(oracle).epsilon(1e-10));
  // Tail identity through the rank.
  for (int l = 0; l <= b.d; ++l) {
    double tail = b.tail(l);
    CHECK(std::abs(projection_error(s, b, l) - tail) <=
          1e-8 * std::max(tail, 1e-30) + 1e-10 * b.total_energy);
  }
}

TEST_CASE("pointwise error bound dominates every weighted column error") {
  Rng rng(23);
  auto space = std::make_shared<WeightedSpace>(random_spd(rng, 6),
                                               WeightedSpace::Tag::Custom);
  auto s = random_set(rng, 6, 10, 1, space);
  auto b = compute_pod(s, RankOrTol::Rank(6));
  const Mat w = Mat(space->W());
  for (int ell = 0; ell <= b.d; ++ell) {
    for (int j = 0; j < s.n(); ++j) {
      Vec y = s.blocks[0].col(j);
      Vec proj = Vec::Zero(6);
      for (int i = 0; i < ell; ++i)
        proj += (b.Psi.col(i).dot(w * y)) * b.Psi.col(i);
      Vec r = y - proj;
      const double lhs = r.dot(w * r);
      const double bound =
          pointwise_error_bound(b, s.omega[0], s.alpha(j), ell);
      if (ell >= b.d)
        CHECK(bound == 0.0);
      else
        CHECK(lhs <= bound * (1.0 + 1e-9) + 1e-12 * b.total_energy);
    }
  }
  // Rank-1 special case: ell=0 bound equals lambda1 under unit weights.
  Mat y1(3, 1);
  y1 << 1.0, 2.0, -1.0;
  auto s1 = make_snapshot_set({y1}, {1.0}, Vec::Ones(1), identity_space(3));
  auto b1 = compute_pod(s1, RankOrTol::Rank(1));
  CHECK(pointwise_error_bound(b1, 1.0, 1.0, 0) ==
        doctest::Approx(b1.lambda(0)));
  CHECK(pointwise_error_bound(b1, 1.0, 1.0, b1.d) == 0.0);
}

TEST_CASE("energy identities hold on seeded weighted sets") {
  Rng rng(37);
  for (int trial = 0; trial < 5; ++trial) {
    const int m = 4 + static_cast<int>(rng.uniform(0, 5));
    const int n = 3 + static_cast<int>(rng.uniform(0, 6));
    const int K = 1 + static_cast<int>(rng.uniform(0, 3));
    auto space = std::make_shared<WeightedSpace>(random_spd(rng, m),
                                                 WeightedSpace::Tag::Custom);
    auto s = random_set(rng, m, n, K, space);
    auto b = compute_pod(s, RankOrTol::Rank(std::min(m, n * K)));
    double sum_lambda = 0.0;
    for (int i = 0; i < b.d; ++i) sum_lambda += b.lambda(i);
    CHECK(sum_lambda == doctest::Approx(b.total_energy).epsilon(1e-8));
    // Captured energy identity at each ell.
    const Mat w = Mat(space->W());
    for (int ell = 1; ell <= b.d; ++ell) {
      double captured = 0.0;
      for (int k = 0; k < K; ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < ell; ++i) {
            const double c = b.Psi.col(i).dot(w * s.blocks[k].col(j));
            captured += s.omega[k] * s.alpha(j) * c * c;
          }
      double lead = 0.0;
      for (int i = 0; i < ell; ++i) lead += b.lambda(i);
      CHECK(captured == doctest::Approx(lead).epsilon(1e-8));
    }
    // Orthonormality and energy-ratio range.
    Mat gram = b.Psi.transpose() * w * b.Psi;
    CHECK((gram - Mat::Identity(b.d, b.d)).cwiseAbs().maxCoeff() <= 1e-10);
    for (int ell = 0; ell <= b.d; ++ell) {
      CHECK(b.energy_ratio(ell) >= 0.0);
      CHECK(b.energy_ratio(ell) <= 1.0 + 1e-12);
    }
    for (int i = 1; i < b.lambda.size(); ++i)
      CHECK(b.lambda(i) <= b.lambda(i - 1) * (1 + 1e-12) + 1e-300);
  }
}

TEST_CASE("three strategies agree on eigenvalues and spans") {
  Rng rng(101);
  for (int trial = 0; trial < 6; ++trial) {
    const int m = 8, n = 6;
    auto space = std::make_shared<WeightedSpace>(random_spd(rng, m),
                                                 WeightedSpace::Tag::Custom);
    auto s = random_set(rng, m, n, 1, space);
    auto b1 = compute_pod(s, RankOrTol::Rank(6), PodStrategy::Svd);
    auto b2 = compute_pod(s, RankOrTol::Rank(6), PodStrategy::GramM);
    auto b3 = compute_pod(s, RankOrTol::Rank(6), PodStrategy::GramSnapshots);
    REQUIRE(b1.d == b2.d);
    REQUIRE(b1.d == b3.d);
    for (int i = 0; i < b1.d; ++i) {
      CHECK(b2.lambda(i) == doctest::Approx(b1.lambda(i)).epsilon(1e-9));
      CHECK(b3.lambda(i) == doctest::Approx(b1.lambda(i)).epsilon(1e-9));
    }
    const Mat w = Mat(space->W());
    // Random Gaussian data has well-separated spectra almost surely; compare
    // spans where the relative gap clears 1e-6.
    int sep = 0;
    while (sep < b1.d - 1 &&
           (b1.lambda(sep) - b1.lambda(sep + 1)) > 1e-6 * b1.lambda(0))
      ++sep;
    if (sep > 0) {
      CHECK(projector_gap(b1.Psi.leftCols(sep), b2.Psi.leftCols(sep), w) <= 1e-7);
      CHECK(projector_gap(b1.Psi.leftCols(sep), b3.Psi.leftCols(sep), w) <= 1e-7);
    }
  }
}

TEST_CASE("V-weight eigenvalues dominate H-weight eigenvalues") {
  auto mesh = build_mesh(1, 30);
  auto model = assemble_model(mesh, 1.0, VelocityField{}, BoundaryCoeff{},
                              {ControlShape{false, 1,
                                            [](double, double) { return 1.0; }}},
                              LoadSpec{}, nullptr);
  Rng rng(5);
  Mat y = rng.normal_matrix(30, 12);
  Vec alpha = Vec::Ones(12);
  auto sH = make_snapshot_set({y}, {1.0}, alpha, model.spaceH);
  auto sV = make_snapshot_set({y}, {1.0}, alpha, model.spaceV);
  auto bH = compute_pod(sH, RankOrTol::Rank(12));
  auto bV = compute_pod(sV, RankOrTol::Rank(12));
  for (int i = 0; i < std::min(bH.d, bV.d); ++i)
    CHECK(bV.lambda(i) >= bH.lambda(i) * (1.0 - 1e-12));
}

TEST_CASE("tolerance-based rank selection picks the smallest admissible ell") {
  Rng rng(13);
  auto s = random_set(rng, 10, 8, 1, identity_space(10));
  auto b = compute_pod(s, RankOrTol::Tol(1e-3));
  REQUIRE(b.ell >= 1);
  CHECK(b.energy_ratio(b.ell) > 1.0 - 1e-3);
  if (b.ell > 1) CHECK(b.energy_ratio(b.ell - 1) <= 1.0 - 1e-3);
}

TEST_CASE("degenerate snapshot inputs raise the documented errors") {
  auto s0 = make_snapshot_set({Mat::Zero(4, 3)}, {1.0}, Vec::Ones(3),
                              identity_space(4));
  CHECK_THROWS_AS(compute_pod(s0, RankOrTol::Rank(2)), EmptyBasisError);

  Mat y(3, 2);
  y << 1, 2, 0, 0, 0, 0;  // rank 1
  auto s1 = make_snapshot_set({y}, {1.0}, Vec::Ones(2), identity_space(3));
  auto b = compute_pod(s1, RankOrTol::Rank(2));
  CHECK(b.d == 1);
  CHECK(b.truncated);
  CHECK(b.ell == 1);
}

TEST_CASE("difference-quotient blocks satisfy their defining identity") {
  auto grid = make_time_grid(std::vector<double>{0.0, 0.25, 0.75, 1.0});
  Rng rng(3);
  Mat y = rng.normal_matrix(5, 4);
  Vec alpha = Eigen::Map<const Vec>(grid.alpha.data(), 4);
  auto s = make_snapshot_set({y}, {1.0}, alpha, identity_space(5));
  s.append_difference_quotients(grid);
  REQUIRE(s.num_blocks() == 2);
  CHECK(s.include_dq);
  CHECK(s.blocks[1].col(0).cwiseAbs().maxCoeff() == 0.0);
  for (int j = 1; j < 4; ++j) {
    Vec expect = (y.col(j) - y.col(j - 1)) / grid.dt[j];
    CHECK((s.blocks[1].col(j) - expect).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("pod_greedy: single trajectory reduces to compute_pod") {
  Rng rng(77);
  auto space = identity_space(12);
  Mat y = rng.normal_matrix(12, 3);  // rank 3
  Vec alpha = Vec::Ones(3);
  auto direct =
      compute_pod(make_snapshot_set({y}, {1.0}, alpha, space), RankOrTol::Rank(3));
  auto greedy = pod_greedy({y}, alpha, space, 1e-12, 10);
  REQUIRE(greedy.d == direct.d);
  CHECK(projector_gap(greedy.Psi, direct.Psi, Mat(space->W())) <= 1e-8);
}

TEST_CASE("pod_greedy: two orthogonal rank-1 trajectories give exact basis") {
  auto space = identity_space(4);
  Mat y1 = Mat::Zero(4, 2), y2 = Mat::Zero(4, 2);
  y1.col(0) << 1, 0, 0, 0;
  y1.col(1) << 2, 0, 0, 0;
  y2.col(0) << 0, 3, 0, 0;
  y2.col(1) << 0, 1, 0, 0;
  Vec alpha = Vec::Ones(2);
  auto b = pod_greedy({y1, y2}, alpha, space, 1e-10, 5);
  REQUIRE(b.d == 2);
  const double e1 = oracle_projection_error(
      make_snapshot_set({y1}, {1.0}, alpha, space), b.Psi);
  const double e2 = oracle_projection_error(
      make_snapshot_set({y2}, {1.0}, alpha, space), b.Psi);
  CHECK(e1 <= 1e-20);
  CHECK(e2 <= 1e-20);
}

TEST_CASE("pod_greedy: seeded multi-trajectory run meets the tolerance") {
  Rng rng(91);
  auto space = std::make_shared<WeightedSpace>(random_spd(rng, 9),
                                               WeightedSpace::Tag::Custom);
  std::vector<Mat> trajs;
  for (int k = 0; k < 4; ++k) trajs.push_back(rng.normal_matrix(9, 5));
  Vec alpha(5);
  for (int j = 0; j < 5; ++j) alpha(j) = rng.uniform(0.5, 1.5);
  const double eps = 1e-4;
  auto b = pod_greedy(trajs, alpha, space, eps, 30);
  for (const auto& y : trajs) {
    auto sk = make_snapshot_set({y}, {1.0}, alpha, space);
    const double rel =
        oracle_projection_error(sk, b.Psi) / sk.total_energy();
    CHECK(rel <= eps * (1.0 + 1e-9));
  }
  Mat gram = b.Psi.transpose() * Mat(space->W()) * b.Psi;
  CHECK((gram - Mat::Identity(b.d, b.d)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("project: orthonormal expansion and least-squares optimality") {
  Rng rng(55);
  auto space = std::make_shared<WeightedSpace>(random_spd(rng, 7),
                                               WeightedSpace::Tag::Custom);
  auto s = random_set(rng, 7, 5, 1, space);
  auto b = compute_pod(s, RankOrTol::Rank(3));

  Vec c1 = project(b, b.Psi.col(0), ProjectMode::WOrthogonal, 3);
  CHECK(c1(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(c1(1)) <= 1e-10);
  CHECK(std::abs(c1(2)) <= 1e-10);

  // A vector W-orthogonal to the span projects to zero.
  Vec v = rng.normal_matrix(7, 1);
  const Mat w = Mat(space->W());
  for (int i = 0; i < 3; ++i)
    v -= (b.Psi.col(i).dot(w * v)) * b.Psi.col(i);
  Vec cz = project(b, v, ProjectMode::WOrthogonal, 3);
  CHECK(cz.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + v.norm()));

  // Lifted projection minimizes the W-distance: least-squares oracle.
  Vec x = rng.normal_matrix(7, 1);
  Vec c = project(b, x, ProjectMode::WOrthogonal, 3);
  Mat psi = b.Psi.leftCols(3);
  Vec c_ls = (psi.transpose() * w * psi).ldlt().solve(psi.transpose() * w * x);
  CHECK((c - c_ls).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + c_ls.norm()));

  // Cross-space Gram projection solves the documented system.
  auto spaceH = std::make_shared<WeightedSpace>(random_spd(rng, 7),
                                                WeightedSpace::Tag::Custom);
  Vec cc = project(b, x, ProjectMode::CrossGram, 3, spaceH.get());
  const Mat wh = Mat(spaceH->W());
  Vec cc_ls =
      (psi.transpose() * wh * psi).ldlt().solve(psi.transpose() * wh * x);
  CHECK((cc - cc_ls).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + cc_ls.norm()));
}
