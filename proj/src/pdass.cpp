#include "podopt/pdass.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "podopt/errors.hpp"

namespace podopt {

namespace {

// Nodal constraint classification: -1 lower-active, 0 inactive, +1 upper.
struct Masks {
  Eigen::MatrixXi u;  // m_c x n
  Eigen::MatrixXi w;  // m x n; empty when no state bounds

  bool same(const Masks& o) const {
    if (u.rows() != o.u.rows() || u.cols() != o.u.cols()) return false;
    if (w.rows() != o.w.rows() || w.cols() != o.w.cols()) return false;
    if (u.size() > 0 && !(u.array() == o.u.array()).all()) return false;
    if (w.size() > 0 && !(w.array() == o.w.array()).all()) return false;
    return true;
  }
};

// Anti-cycling union for a detected two-cycle: a constraint flagged active
// in either of the alternating sets stays active for the next subproblem.
// The termination certificate (the subproblem solution at a mask reproduces
// that mask) is independent of how the mask was proposed, so merging is
// sound; it forces the chattering frontier nodes onto the bound, where the
// equality-constrained step can settle.
Eigen::MatrixXi merge_codes(const Eigen::MatrixXi& a,
                            const Eigen::MatrixXi& b) {
  Eigen::MatrixXi out = a;
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < a.rows(); ++i)
      if (out(i, j) == 0) out(i, j) = b(i, j);
  return out;
}

Masks merge_masks(const Masks& cur, const Masks& other) {
  Masks out;
  out.u = merge_codes(cur.u, other.u);
  if (cur.w.size() > 0) out.w = merge_codes(cur.w, other.w);
  return out;
}

// Active-set reaction eta D M D with D the nodal indicator and g the bound
// values on the active nodes. For a reduced handle the projected matrices
// Psi^T D M D Psi and source parts Psi^T D M D g are assembled per node.
struct Reaction {
  bool on = false;
  double eta = 0.0;
  Mat D;                // m x n indicator (0/1)
  Mat g;                // m x n active targets
  std::vector<char> col_active;
  std::vector<Mat> Rl;  // reduced reaction matrices (per node, reduced runs)
  std::vector<Vec> sl;  // reduced source parts eta Psi^T D M D g
};

// Per-node factorizations of E_j = M + dt_j A(t_j) and E_j^T (dense for a
// reduced handle) plus the small algebra the sweeps share.
struct Sweeper {
  ModelRef model;
  const TimeGrid& grid;
  int n;
  bool red;

  std::vector<std::unique_ptr<Eigen::SparseLU<SpMat>>> flu, blu;
  std::vector<Eigen::PartialPivLU<Mat>> fld, bld;

  Sweeper(ModelRef mdl, const TimeGrid& g)
      : model(mdl), grid(g), n(g.n()), red(mdl.reduced()) {
    if (red) {
      const RomModel& rom = *model.rom;
      fld.resize(n);
      bld.resize(n);
      for (int j = 1; j < n; ++j) {
        Mat e = rom.Ml + grid.dt[j] * rom.Al_at(grid.t[j]);
        fld[j].compute(e);
        bld[j].compute(Mat(e.transpose()));
      }
    } else {
      const FeModel& fe = *model.full;
      flu.resize(n);
      blu.resize(n);
      for (int j = 1; j < n; ++j) {
        SpMat e = SpMat(fe.M + grid.dt[j] * fe.A_at(grid.t[j]));
        e.makeCompressed();
        flu[j] = std::make_unique<Eigen::SparseLU<SpMat>>();
        flu[j]->compute(e);
        SpMat et = SpMat(e.transpose());
        et.makeCompressed();
        blu[j] = std::make_unique<Eigen::SparseLU<SpMat>>();
        blu[j]->compute(et);
        if (flu[j]->info() != Eigen::Success || blu[j]->info() != Eigen::Success)
          throw SolverError("singular time-step matrix");
      }
    }
  }

  int dim() const { return model.state_dim(); }
  const FeModel& fe() const { return model.full_model(); }

  Vec mass(const Vec& v) const {
    return red ? Vec(model.rom->Ml * v) : Vec(fe().M * v);
  }
  Vec solveF(int j, const Vec& r) const {
    return red ? Vec(fld[j].solve(r)) : Vec(flu[j]->solve(r));
  }
  Vec solveB(int j, const Vec& r) const {
    return red ? Vec(bld[j].solve(r)) : Vec(blu[j]->solve(r));
  }
  Vec Bu(const Vec& uj) const {
    return red ? Vec(model.rom->Bl * uj) : Vec(fe().B * uj);
  }
  Vec Bt(const Vec& pj) const {
    return red ? Vec(model.rom->Bl.transpose() * pj)
               : Vec(fe().B.transpose() * pj);
  }
  Vec load(double t) const {
    return red ? model.rom->load_at(t) : fe().load_at(t);
  }
  Vec y0() const { return red ? model.rom->y0l : fe().y0; }
  Mat lift(const Mat& y) const { return red ? Mat(model.rom->Psi * y) : y; }
};

// Classification deadband, relative to the bound magnitude.  A weakly
// active constraint (touching its bound with vanishing multiplier) has both
// sides of the complementarity test at zero, so the raw sign test dances on
// rounding noise and the sets never repeat.  Shifting the threshold by the
// deadband breaks the tie toward the equality branch: there the subproblem
// enforces the bound exactly and reproduces the same classification (the
// release test fails only when the multiplier is wrong-signed beyond the
// band), so repetition can fire.  Constraints whose margins clear the band
// are classified exactly as in the raw test.
constexpr double kMaskBand = 1e-9;

// One entry: active when the signed margin (positive means the bound's
// activity test fires) clears the shifted threshold.  Lower bound wins ties
// when both fire (only possible for equal or near-equal bounds).
int classify(double m_lo, double band_lo, double m_hi, double band_hi) {
  if (m_lo >= -band_lo) return -1;
  if (m_hi >= -band_hi) return 1;
  return 0;
}

Masks compute_masks(const Sweeper& sw, const OcpSpec& spec,
                    const MixedConstraintSpec& mixed, double eta, const Mat& u,
                    const Mat& mu, const Mat& yfull, const Mat& w,
                    const Mat& nu) {
  const int n = sw.n;
  const int mc = static_cast<int>(u.rows());
  const int m = static_cast<int>(yfull.rows());
  const double ninf = -std::numeric_limits<double>::infinity();
  Masks mk;
  mk.u = Eigen::MatrixXi::Zero(mc, n);
  const bool has_lo = spec.ua.size() > 0;
  const bool has_hi = spec.ub.size() > 0;
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < mc; ++i) {
      const double r = mu(i, j) + spec.sigma * u(i, j);
      const double lo = has_lo ? spec.ua(i, j) : 0.0;
      const double hi = has_hi ? spec.ub(i, j) : 0.0;
      const double m_lo = has_lo ? lo - r / spec.sigma : ninf;
      const double m_hi = has_hi ? r / spec.sigma - hi : ninf;
      mk.u(i, j) = classify(m_lo, kMaskBand * (1.0 + std::abs(lo)), m_hi,
                            kMaskBand * (1.0 + std::abs(hi)));
    }
  if (mixed.has_state_bounds()) {
    mk.w = Eigen::MatrixXi::Zero(m, n);
    const bool s_lo = mixed.ya.size() > 0;
    const bool s_hi = mixed.yb.size() > 0;
    for (int j = 1; j < n; ++j)
      for (int i = 0; i < m; ++i) {
        const double r = nu(i, j) + eta * (yfull(i, j) + mixed.eps * w(i, j));
        const double lo = s_lo ? mixed.ya(i, j) : 0.0;
        const double hi = s_hi ? mixed.yb(i, j) : 0.0;
        const double m_lo = s_lo ? lo - r / eta : ninf;
        const double m_hi = s_hi ? r / eta - hi : ninf;
        mk.w(i, j) = classify(m_lo, kMaskBand * (1.0 + std::abs(lo)), m_hi,
                              kMaskBand * (1.0 + std::abs(hi)));
      }
  }
  return mk;
}

Reaction build_reaction(const Sweeper& sw, const Eigen::MatrixXi& wmask,
                        const MixedConstraintSpec& mixed, double eta) {
  Reaction rx;
  if (wmask.size() == 0 || !(wmask.array() != 0).any()) return rx;
  const int m = static_cast<int>(wmask.rows());
  const int n = static_cast<int>(wmask.cols());
  rx.on = true;
  rx.eta = eta;
  rx.D = Mat::Zero(m, n);
  rx.g = Mat::Zero(m, n);
  rx.col_active.assign(n, 0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m; ++i) {
      if (wmask(i, j) == 0) continue;
      rx.D(i, j) = 1.0;
      rx.g(i, j) = wmask(i, j) < 0 ? mixed.ya(i, j) : mixed.yb(i, j);
      rx.col_active[j] = 1;
    }
  if (sw.red) {
    const Mat& psi = sw.model.rom->Psi;
    const SpMat& M = sw.fe().M;
    rx.Rl.resize(n);
    rx.sl.resize(n);
    for (int j = 1; j < n; ++j) {
      if (!rx.col_active[j]) continue;
      Mat dp = psi.array().colwise() * rx.D.col(j).array();
      rx.Rl[j] = eta * dp.transpose() * (M * dp);
      rx.sl[j] = eta * dp.transpose() *
                 (M * Vec(rx.D.col(j).cwiseProduct(rx.g.col(j))));
    }
  }
  return rx;
}

// eta D M D v at node j (full coefficients).
Vec react_full(const Sweeper& sw, const Reaction& rx, int j, const Vec& v) {
  Vec t = rx.D.col(j).cwiseProduct(v);
  t = sw.fe().M * t;
  return rx.eta * rx.D.col(j).cwiseProduct(t);
}

// Forward implicit Euler with the cached factorizations.
Mat forward(const Sweeper& sw, const Mat& u) {
  Mat y(sw.dim(), sw.n);
  y.col(0) = sw.y0();
  for (int j = 1; j < sw.n; ++j) {
    Vec rhs = sw.mass(y.col(j - 1)) +
              sw.grid.dt[j] * (sw.load(sw.grid.t[j]) + sw.Bu(u.col(j)));
    y.col(j) = sw.solveF(j, rhs);
  }
  return y;
}

// Backward sweep: the tracking/terminal sources of the plain adjoint plus
// the active-set reaction -alpha_j eta D M D (y_j - g_j).
Mat adjoint(const Sweeper& sw, const OcpSpec& spec, const Reaction& rx,
            const Mat& y) {
  const int n = sw.n;
  Mat p = Mat::Zero(sw.dim(), n);
  const int m = sw.fe().m();
  for (int j = n - 1; j >= 1; --j) {
    const double aj = sw.grid.alpha[j];
    Vec rhs;
    if (!sw.red) {
      Vec src = spec.sigma1 * aj * (spec.yd1_at(j, m) - y.col(j));
      if (j == n - 1 && spec.sigma2 != 0.0)
        src += spec.sigma2 * (spec.yd2_at(m) - y.col(j));
      rhs = sw.fe().M * src;
      if (rx.on && rx.col_active[j])
        rhs -= aj * react_full(sw, rx, j, Vec(y.col(j) - rx.g.col(j)));
    } else {
      const RomModel& rom = *sw.model.rom;
      const Mat& psi = rom.Psi;
      rhs = spec.sigma1 * aj *
            (psi.transpose() * (sw.fe().M * spec.yd1_at(j, m)) -
             rom.Ml * y.col(j));
      if (j == n - 1 && spec.sigma2 != 0.0)
        rhs += spec.sigma2 * (psi.transpose() * (sw.fe().M * spec.yd2_at(m)) -
                              rom.Ml * y.col(j));
      if (rx.on && rx.col_active[j])
        rhs -= aj * Vec(rx.Rl[j] * y.col(j) - rx.sl[j]);
    }
    if (j < n - 1) rhs += sw.mass(p.col(j + 1));
    p.col(j) = sw.solveB(j, rhs);
  }
  if (n >= 2) p.col(0) = p.col(1);
  return p;
}

// Zero the active entries and node 0 (the subproblem unknowns are the
// inactive control entries at nodes j >= 1).
void restrict_inactive(Mat& v, const Masks& mk) {
  v.col(0).setZero();
  for (int j = 1; j < static_cast<int>(v.cols()); ++j)
    for (int i = 0; i < static_cast<int>(v.rows()); ++i)
      if (mk.u(i, j) != 0) v(i, j) = 0.0;
}

// U-gradient of the subproblem objective at (u, p): sigma (u - u^n) -
// (dt/alpha) B^T p, restricted to the inactive entries.
Mat subproblem_residual(const Sweeper& sw, const OcpSpec& spec, const Mat& u,
                        const Mat& p, const Masks& mk) {
  const int n = sw.n;
  Mat r = Mat::Zero(u.rows(), n);
  for (int j = 1; j < n; ++j)
    r.col(j) = spec.sigma * (u.col(j) - spec.unom_at(j, static_cast<int>(u.rows()))) -
               (sw.grid.dt[j] / sw.grid.alpha[j]) * sw.Bt(p.col(j));
  restrict_inactive(r, mk);
  return r;
}

// Hessian of the subproblem in the inactive control entries: sigma v plus
// the tracking/terminal/reaction curvature through the linearized dynamics.
Mat hess_apply(const Sweeper& sw, const OcpSpec& spec, const Reaction& rx,
               const Masks& mk, const Mat& v) {
  const int n = sw.n;
  Mat dy(sw.dim(), n);
  dy.col(0).setZero();
  for (int j = 1; j < n; ++j) {
    Vec rhs = sw.mass(dy.col(j - 1)) + sw.grid.dt[j] * sw.Bu(v.col(j));
    dy.col(j) = sw.solveF(j, rhs);
  }
  Mat dp = Mat::Zero(sw.dim(), n);
  for (int j = n - 1; j >= 1; --j) {
    const double aj = sw.grid.alpha[j];
    Vec rhs;
    if (!sw.red) {
      Vec src = -spec.sigma1 * aj * dy.col(j);
      if (j == n - 1 && spec.sigma2 != 0.0) src -= spec.sigma2 * dy.col(j);
      rhs = sw.fe().M * src;
      if (rx.on && rx.col_active[j])
        rhs -= aj * react_full(sw, rx, j, Vec(dy.col(j)));
    } else {
      const RomModel& rom = *sw.model.rom;
      rhs = -spec.sigma1 * aj * (rom.Ml * dy.col(j));
      if (j == n - 1 && spec.sigma2 != 0.0)
        rhs -= spec.sigma2 * (rom.Ml * dy.col(j));
      if (rx.on && rx.col_active[j]) rhs -= aj * Vec(rx.Rl[j] * dy.col(j));
    }
    if (j < n - 1) rhs += sw.mass(dp.col(j + 1));
    dp.col(j) = sw.solveB(j, rhs);
  }
  Mat out = Mat::Zero(v.rows(), n);
  for (int j = 1; j < n; ++j)
    out.col(j) = spec.sigma * v.col(j) -
                 (sw.grid.dt[j] / sw.grid.alpha[j]) * sw.Bt(dp.col(j));
  restrict_inactive(out, mk);
  return out;
}

// Conjugate gradients in the U-inner product on the inactive subspace.
// Solves H x = b to a relative residual of tol; returns the iteration count.
int cg_solve(const Sweeper& sw, const OcpSpec& spec, const Reaction& rx,
             const Masks& mk, const Mat& b, Mat& x, double tol, int max_iter) {
  x = Mat::Zero(b.rows(), b.cols());
  Mat r = b;
  double rr = u_inner(sw.grid, r, r);
  if (rr == 0.0) return 0;
  const double stop2 = tol * tol * rr;
  Mat d = r;
  int it = 0;
  while (it < max_iter) {
    Mat hd = hess_apply(sw, spec, rx, mk, d);
    const double dhd = u_inner(sw.grid, d, hd);
    if (dhd <= 0.0) break;  // safeguard; the operator is positive definite
    const double step = rr / dhd;
    x += step * d;
    r -= step * hd;
    ++it;
    const double rr_new = u_inner(sw.grid, r, r);
    if (rr_new <= stop2) break;
    d = r + (rr_new / rr) * d;
    rr = rr_new;
  }
  return it;
}

Mat multipliers(const Sweeper& sw, const OcpSpec& spec, const Mat& u,
                const Mat& p) {
  const int n = sw.n;
  const int mc = static_cast<int>(u.rows());
  Mat mu(mc, n);
  mu.col(0) = -spec.sigma * (u.col(0) - spec.unom_at(0, mc));
  for (int j = 1; j < n; ++j)
    mu.col(j) = (sw.grid.dt[j] / sw.grid.alpha[j]) * sw.Bt(p.col(j)) -
                spec.sigma * (u.col(j) - spec.unom_at(j, mc));
  return mu;
}

// Value of the relaxed problem with the virtual control eliminated at its
// optimum for the given state: Phi(u) = J(y(u), u) + eta/2 dist_W^2(y(u),
// [ya, yb]). Under the multiplier law nu = -sigma_w w / eps the active-set
// classification equals the violation pattern of y, so each active-set step
// is a piecewise Newton step on this convex functional; Phi is the merit
// that globalizes it.
double relaxed_value(const Sweeper& sw, const OcpSpec& spec,
                     const MixedConstraintSpec& mixed, double eta,
                     const Mat& u, const Mat& yfull) {
  const FeModel& fe = sw.fe();
  const int m = fe.m();
  const int n = sw.n;
  const int mc = static_cast<int>(u.rows());
  double v = 0.0;
  for (int j = 0; j < n; ++j) {
    const double aj = sw.grid.alpha[j];
    if (spec.sigma1 != 0.0) {
      Vec d = yfull.col(j) - spec.yd1_at(j, m);
      v += 0.5 * spec.sigma1 * aj * d.dot(fe.M * d);
    }
    v += 0.5 * spec.sigma * aj *
         (u.col(j) - spec.unom_at(j, mc)).squaredNorm();
    if (mixed.has_state_bounds() && j >= 1) {
      Vec r = yfull.col(j);
      if (mixed.ya.size() > 0) r = r.cwiseMax(mixed.ya.col(j));
      if (mixed.yb.size() > 0) r = r.cwiseMin(mixed.yb.col(j));
      Vec d = yfull.col(j) - r;
      v += 0.5 * eta * aj * d.dot(fe.M * d);
    }
  }
  if (spec.sigma2 != 0.0) {
    Vec d = yfull.col(n - 1) - spec.yd2_at(m);
    v += 0.5 * spec.sigma2 * d.dot(fe.M * d);
  }
  return v;
}

}  // namespace

ControlSolution pdass_solve(ModelRef model, const TimeGrid& grid,
                            const OcpSpec& spec,
                            const MixedConstraintSpec& mixed,
                            const PdassOptions& opts) {
  const FeModel& fe = model.full_model();
  const int m = fe.m();
  const int mc = model.mc();
  const int n = grid.n();
  spec.validate(m, mc, n);
  mixed.validate(m, n);
  if (spec.sigma <= 0.0)
    throw ConfigError("pdass requires sigma > 0");
  if (fe.cubic || (model.reduced() && model.rom->cubic))
    throw ConfigError("pdass requires a linear model");
  if (opts.max_iter < 1 || opts.cg_tol <= 0.0 || opts.kkt_tol <= 0.0)
    throw ConfigError("invalid pdass options");
  if (opts.u0.size() > 0 && (opts.u0.rows() != mc || opts.u0.cols() != n))
    throw ConfigError("pdass warm-start control shape mismatch");
  if (opts.w0.size() > 0 && (opts.w0.rows() != m || opts.w0.cols() != n))
    throw ConfigError("pdass warm-start virtual control shape mismatch");

  const double eta = mixed.sigma_w / (mixed.eps * mixed.eps);
  const Mat un = spec.unom_full(mc, n);
  Mat u = spec.clip(opts.u0.size() > 0 ? opts.u0 : un);
  u.col(0) = spec.clip(un).col(0);  // node 0 carries no dynamics
  Mat w = Mat::Zero(m, n);
  if (mixed.has_state_bounds() && opts.w0.size() > 0) {
    w = opts.w0;
    w.col(0).setZero();
  }

  Sweeper sw(model, grid);
  const int cg_cap = opts.cg_max_iter > 0
                         ? opts.cg_max_iter
                         : 2 * mc * std::max(1, n - 1) + 100;

  // Initial state and adjoint; a warm-start w seeds the reaction through its
  // support so that a restart from a converged pair reproduces the masks.
  Mat y = forward(sw, u);
  Mat yfull = sw.lift(y);
  Eigen::MatrixXi wseed;
  if (mixed.has_state_bounds()) {
    wseed = Eigen::MatrixXi::Zero(m, n);
    const bool s_lo = mixed.ya.size() > 0;
    const bool s_hi = mixed.yb.size() > 0;
    for (int j = 1; j < n; ++j)
      for (int i = 0; i < m; ++i) {
        if (w(i, j) > 0.0 && s_lo) wseed(i, j) = -1;
        if (w(i, j) < 0.0 && s_hi) wseed(i, j) = 1;
      }
  }
  Reaction rx0 = build_reaction(sw, wseed, mixed, eta);
  Mat p = adjoint(sw, spec, rx0, y);
  Mat mu = multipliers(sw, spec, u, p);
  Mat nu = -(mixed.sigma_w / mixed.eps) * w;

  Masks prev, prev2;
  bool have_prev = false;
  bool have_prev2 = false;
  bool full_step = true;  // mask repetition certifies only after a full step
  bool converged = false;
  int iterations = 0;
  std::vector<IterationRecord> log;

  for (int k = 1; k <= opts.max_iter + 1; ++k) {
    Masks mk = compute_masks(sw, spec, mixed, eta, u, mu, yfull, w, nu);
    if (have_prev && full_step && mk.same(prev)) {
      converged = true;
      iterations = k - 1;
      break;
    }
    if (k == opts.max_iter + 1) {
      iterations = opts.max_iter;
      break;
    }
    if (have_prev2 && !mk.same(prev) && mk.same(prev2))
      mk = merge_masks(mk, prev);
    if (std::getenv("PDASS_DEBUG") && have_prev) {
      int du = 0, dw = 0;
      for (int j = 0; j < static_cast<int>(mk.u.cols()); ++j)
        for (int i = 0; i < static_cast<int>(mk.u.rows()); ++i)
          if (mk.u(i, j) != prev.u(i, j)) ++du;
      if (mk.w.size() > 0)
        for (int j = 0; j < static_cast<int>(mk.w.cols()); ++j)
          for (int i = 0; i < static_cast<int>(mk.w.rows()); ++i)
            if (mk.w(i, j) != prev.w(i, j)) ++dw;
      std::fprintf(stderr, "  [dbg] k=%d du=%d dw=%d", k, du, dw);
      if (mk.w.size() > 0) {
        int printed = 0;
        for (int j = 1; j < n && printed < 8; ++j)
          for (int i = 0; i < m && printed < 8; ++i)
            if (mk.w(i, j) != prev.w(i, j)) {
              const double r =
                  nu(i, j) + eta * (yfull(i, j) + mixed.eps * w(i, j));
              const double hi =
                  mixed.yb.size() ? mixed.yb(i, j) : 1e300;
              std::fprintf(stderr, " [(%d,%d) %d->%d marg=%.3e y-yb=%.3e]", i,
                           j, prev.w(i, j), mk.w(i, j), r / eta - hi,
                           yfull(i, j) - hi);
              ++printed;
            }
      }
      std::fprintf(stderr, "\n");
      if (mk.w.size() > 0 && m > 56) {
        for (int jj : {2, 6}) {
          const int ii = 48;
          const double hi = mixed.yb.size() ? mixed.yb(ii, jj) : 1e300;
          std::fprintf(stderr,
                       "  [hot] k=%d (%d,%d) code=%d y-yb=%+.6e w=%+.6e "
                       "nu=%+.6e\n",
                       k, ii, jj, mk.w(ii, jj), yfull(ii, jj) - hi, w(ii, jj),
                       nu(ii, jj));
        }
      }
    }
    prev2 = prev;
    have_prev2 = have_prev;
    prev = mk;
    have_prev = true;

    Reaction rx = build_reaction(sw, mk.w, mixed, eta);
    const Mat u_base = u;
    const double phi_base = relaxed_value(sw, spec, mixed, eta, u_base, yfull);
    Mat p_base = adjoint(sw, spec, rx, y);
    const Mat gamma = -multipliers(sw, spec, u_base, p_base);

    // Subproblem: pin the active entries, solve for the inactive ones.
    Mat u_sub = u_base;
    for (int j = 1; j < n; ++j)
      for (int i = 0; i < mc; ++i) {
        if (mk.u(i, j) < 0) u_sub(i, j) = spec.ua(i, j);
        if (mk.u(i, j) > 0) u_sub(i, j) = spec.ub(i, j);
      }
    Mat y_sub = forward(sw, u_sub);
    Mat p_sub = adjoint(sw, spec, rx, y_sub);
    Mat rhs = -subproblem_residual(sw, spec, u_sub, p_sub, mk);
    Mat delta;
    const int cg_iters =
        cg_solve(sw, spec, rx, mk, rhs, delta, opts.cg_tol, cg_cap);
    const Mat d = u_sub + delta - u_base;

    // Accept the full active-set step when it does not increase the merit;
    // otherwise backtrack along the update direction (descent for Phi).
    const double slope = u_inner(grid, gamma, d);
    if (std::getenv("PDASS_DEBUG"))
      std::fprintf(stderr,
                   "  [dbg] k=%d slope=%.3e |d|=%.3e |g|=%.3e phi=%.10e\n", k,
                   slope, std::sqrt(u_inner(grid, d, d)),
                   std::sqrt(u_inner(grid, gamma, gamma)), phi_base);
    const double slack = 1e-14 * (1.0 + std::abs(phi_base));
    double theta = 1.0;
    double best_theta = 1.0;
    double best_phi = std::numeric_limits<double>::infinity();
    bool accepted = false;
    Mat y_try, yfull_try, best_y, best_yfull;
    for (int bt = 0; bt <= 40; ++bt) {
      Mat u_try = u_base + theta * d;
      y_try = forward(sw, u_try);
      yfull_try = sw.lift(y_try);
      const double phi =
          relaxed_value(sw, spec, mixed, eta, u_try, yfull_try);
      if (phi < best_phi) {
        best_phi = phi;
        best_theta = theta;
        best_y = y_try;
        best_yfull = yfull_try;
      }
      if (phi <= phi_base + 1e-4 * theta * std::min(slope, 0.0) + slack) {
        accepted = true;
        break;
      }
      theta *= 0.5;
    }
    if (accepted) {
      u = u_base + theta * d;
      y = y_try;
      yfull = yfull_try;
      full_step = theta == 1.0;
    } else {
      theta = best_theta;
      u = u_base + theta * d;
      y = best_y;
      yfull = best_yfull;
      full_step = false;
    }
    p = adjoint(sw, spec, rx, y);

    w.setZero();
    if (rx.on)
      for (int j = 1; j < n; ++j)
        for (int i = 0; i < m; ++i)
          if (mk.w(i, j) != 0)
            w(i, j) = (rx.g(i, j) - yfull(i, j)) / mixed.eps;
    nu = -(mixed.sigma_w / mixed.eps) * w;
    mu = multipliers(sw, spec, u, p);

    Mat audit = subproblem_residual(sw, spec, u, p, mk);
    const double stat = std::sqrt(u_inner(grid, audit, audit));
    Trajectory ytraj{y, grid, TrajKind::State};
    ControlTrajectory ut{u, spec.ua, spec.ub};
    const CostParts cost = ocp_cost(model, grid, ytraj, ut, spec);
    (void)cg_iters;
    log.push_back({k, cost.total, stat, theta,
                   model.reduced() ? model.rom->ell() : 0, -1.0});
    iterations = k;
  }

  ControlSolution sol;
  Trajectory ytraj{y, grid, TrajKind::State};
  Trajectory ptraj{p, grid, TrajKind::Adjoint};
  sol.state = ocp_lift(model, ytraj);
  sol.adjoint = ocp_lift(model, ptraj);
  sol.u = ControlTrajectory{u, spec.ua, spec.ub};
  sol.w = w;
  sol.mu = mu;
  sol.nu = nu;
  sol.cost = ocp_cost(model, grid, ytraj, sol.u, spec);
  const double unorm = std::sqrt(u_inner(grid, u, u));
  sol.kkt_residual = std::sqrt(u_inner(grid, Mat(u - spec.clip(u + mu)),
                                       Mat(u - spec.clip(u + mu))));
  sol.iterations = iterations;
  sol.converged =
      converged && sol.kkt_residual <= opts.kkt_tol * (1.0 + unorm);
  sol.log = std::move(log);
  sol.ell = model.reduced() ? model.rom->ell() : 0;
  return sol;
}

}  // namespace podopt
