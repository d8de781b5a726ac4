#pragma once

// Controllability operator W u = ∫_0^ν (ν-s)^{α-1} T_α(ν-s) 𝔹 u(s) ds on
// piecewise-constant controls, the source operator Z, their adjoints in the
// weighted pairings, the γ-criterion, and minimum-L^p-norm right inverses.
//
// Pairings: on X, ⟨x*, x⟩ = Σ_i w_i x*_i x_i; on controls,
// ⟨v, u⟩ = Σ_j Δt_j Σ_i w_i v_{ji} u_{ji}. Controls are stacked with index
// j·n_x + i (cell j, node i).

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "fracnull/errors.hpp"
#include "fracnull/fode.hpp"
#include "fracnull/mesh.hpp"
#include "fracnull/mlfun.hpp"
#include "fracnull/semigroup.hpp"

namespace fracnull {

inline double conjugate_exponent(double p) { return p / (p - 1.0); }

/// Dense matrix of W : R^{n_t·n_x} → R^{n_x}.
class ControlOperatorW {
 public:
  ControlOperatorW(const MildSolver& solver, const ControlMap& B, const SpatialGrid& grid,
                   double p)
      : solver_(&solver), B_(B), grid_(grid), p_(p) {
    const Generator& gen = solver.generator();
    const TimeMesh& mesh = solver.mesh();
    const int nx = gen.size();
    const int nt = mesh.cells();
    if (B.size() != nx || grid.size() != nx) {
      throw std::invalid_argument("ControlOperatorW: size mismatch");
    }
    if (!(solver.alpha() > 1.0 / p)) {
      throw std::invalid_argument("ControlOperatorW: need alpha > 1/p");
    }
    matrix_.resize(nx, static_cast<Eigen::Index>(nt) * nx);
    const GridSeries tab = solver.kernel_table(nt);
    for (int j = 0; j < nt; ++j) {
      matrix_.middleCols(static_cast<Eigen::Index>(j) * nx, nx) =
          gen.matrix_of(tab.col(j)) * B.mult().asDiagonal();
    }
    dt_.resize(nt);
    for (int j = 0; j < nt; ++j) dt_(j) = mesh.dt(j);
  }

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  int nx() const { return static_cast<int>(matrix_.rows()); }
  int nt() const { return static_cast<int>(dt_.size()); }
  double p() const { return p_; }
  const SpatialGrid& grid() const { return grid_; }
  const TimeMesh& mesh() const { return solver_->mesh(); }
  const MildSolver& solver() const { return *solver_; }
  const ControlMap& control_map() const { return B_; }
  const Eigen::VectorXd& cell_widths() const { return dt_; }

  static Eigen::Map<const Eigen::VectorXd> stacked(const GridSeries& u) {
    return Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
  }
  GridSeries unstack(const Eigen::VectorXd& v) const {
    return Eigen::Map<const GridSeries>(v.data(), nx(), nt());
  }

  /// W u through the assembled matrix.
  GridFunction apply(const GridSeries& u) const { return matrix_ * stacked(u); }

  /// W u through a direct loop over cells, independent of the assembly.
  GridFunction apply_direct(const GridSeries& u) const {
    const Generator& gen = solver_->generator();
    const int n = nt();
    GridFunction acc = GridFunction::Zero(nx());
    const GridSeries tab = solver_->kernel_table(n);
    for (int j = 0; j < n; ++j) acc += gen.apply_multiplier(tab.col(j), B_.apply(u.col(j)));
    return acc;
  }

  /// (W* x*)_j = Δt_j^{-1} W_q^{-1} W_j^T W_q x*, one column per cell.
  GridSeries adjoint(const Eigen::Ref<const GridFunction>& xs) const {
    const Eigen::VectorXd& w = grid_.weights();
    Eigen::VectorXd flat = matrix_.transpose() * w.cwiseProduct(xs);
    GridSeries out = unstack(flat);
    for (int j = 0; j < nt(); ++j) {
      out.col(j) = out.col(j).cwiseQuotient(w) / (dt_(j) * fault_[j == fault_cell_ ? 1 : 0]);
    }
    return out;
  }

  /// Test hook: rescales the adjoint on one cell by 1/(1 + eps).
  void inject_adjoint_fault(double eps, int cell = 0) {
    fault_[1] = 1.0 + eps;
    fault_cell_ = cell;
  }

 private:
  const MildSolver* solver_;
  ControlMap B_;
  SpatialGrid grid_;
  double p_;
  Eigen::MatrixXd matrix_;
  Eigen::VectorXd dt_;
  double fault_[2] = {1.0, 1.0};
  int fault_cell_ = -1;
};

/// Weighted control pairing ⟨v, u⟩.
inline double control_pairing(const GridSeries& v, const GridSeries& u, const TimeMesh& mesh,
                              const SpatialGrid& grid) {
  double s = 0.0;
  for (int j = 0; j < mesh.cells(); ++j) s += mesh.dt(j) * pairing(v.col(j), u.col(j), grid);
  return s;
}

struct AdjointW {
  GridSeries dual;
  double norm = 0.0;  // L^{p'}(I, U*)
};

inline AdjointW adjoint_W_apply(const ControlOperatorW& W, const Eigen::Ref<const GridFunction>& xs) {
  AdjointW r;
  r.dual = W.adjoint(xs);
  r.norm = lp_time_norm(r.dual, W.mesh(), W.grid(), conjugate_exponent(W.p()));
  return r;
}

/// Z(x_0, f) = S_α(ν)x_0 + ∫_0^ν (ν-s)^{α-1} T_α(ν-s) f(s) ds.
inline GridFunction apply_Z(const MildSolver& solver, const Eigen::Ref<const GridFunction>& x0,
                            const Eigen::Ref<const GridSeries>& f) {
  return solver.terminal(x0, f);
}

inline GridFunction apply_Z(const Generator& gen, double alpha,
                            const Eigen::Ref<const GridFunction>& x0,
                            const Eigen::Ref<const GridSeries>& f, const TimeMesh& mesh) {
  return apply_Z(MildSolver(gen, alpha, mesh), x0, f);
}

struct AdjointZ {
  GridFunction s_part;       // S*_α(ν) x*
  GridSeries kernel_part;    // cell averages of (ν-s)^{α-1} T*_α(ν-s) x*
  double s_norm = 0.0;       // X* norm
  double kernel_l2 = 0.0;    // L²(I, X*) norm, midpoint rule
};

/// Z* evaluator with the midpoint-lag tables built once.
class ZAdjointOperator {
 public:
  ZAdjointOperator(const MildSolver& solver, const SpatialGrid& grid, double p)
      : solver_(&solver), grid_(grid), p_conj_(conjugate_exponent(p)) {
    const TimeMesh& mesh = solver.mesh();
    const int n = mesh.cells();
    const double nu = mesh.nu();
    const double a = solver.alpha();
    kernel_ = solver.kernel_table(n);
    s_nu_ = solver.family().s_at(n);
    mid_.resize(solver.generator().size(), n);
    for (int j = 0; j < n; ++j) {
      const double lag = nu - mesh.mid(j);
      mid_.col(j) = std::pow(lag, a - 1.0) * t_alpha_multiplier(solver.generator(), a, lag);
    }
  }

  AdjointZ apply(const Eigen::Ref<const GridFunction>& xs) const {
    const Generator& gen = solver_->generator();
    const TimeMesh& mesh = solver_->mesh();
    AdjointZ r;
    r.s_part = gen.apply_multiplier_adjoint(s_nu_, xs, grid_);
    r.s_norm = lp_norm(r.s_part, grid_, p_conj_);
    const int n = mesh.cells();
    r.kernel_part.resize(xs.size(), n);
    double l2 = 0.0;
    for (int j = 0; j < n; ++j) {
      r.kernel_part.col(j) = gen.apply_multiplier_adjoint(kernel_.col(j), xs, grid_) / mesh.dt(j);
      const double v = lp_norm(gen.apply_multiplier_adjoint(mid_.col(j), xs, grid_), grid_, p_conj_);
      l2 += mesh.dt(j) * v * v;
    }
    r.kernel_l2 = std::sqrt(l2);
    return r;
  }

 private:
  const MildSolver* solver_;
  SpatialGrid grid_;
  double p_conj_;
  GridSeries kernel_;
  Eigen::VectorXd s_nu_;
  GridSeries mid_;
};

inline AdjointZ adjoint_Z_apply(const Generator& gen, double alpha,
                                const Eigen::Ref<const GridFunction>& xs, const TimeMesh& mesh,
                                const SpatialGrid& grid) {
  MildSolver solver(gen, alpha, mesh);
  return ZAdjointOperator(solver, grid, grid.p()).apply(xs);
}

struct GammaEstimate {
  double gamma = 0.0;
  int used = 0;
  int skipped = 0;
  // Probe attaining the minimum (unit in X*).
  GridFunction argmin;
};

/// γ̂ = min over unit probes x* of ‖W*x*‖_{L^{p'}} / (‖S*_α(ν)x*‖ + ‖(ν-·)^{α-1}T*_α(ν-·)x*‖_{L²}),
/// probing the canonical basis and `n_random` seeded Gaussian directions.
inline GammaEstimate estimate_gamma(const ControlOperatorW& W, const ZAdjointOperator& Zs,
                                    int n_random, std::uint64_t seed = 20240601) {
  const int nx = W.nx();
  const double pc = conjugate_exponent(W.p());
  std::vector<GridFunction> probes;
  for (int i = 0; i < nx; ++i) probes.push_back(GridFunction::Unit(nx, i));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int r = 0; r < n_random; ++r) {
    GridFunction x(nx);
    for (int i = 0; i < nx; ++i) x(i) = nd(rng);
    probes.push_back(x);
  }
  GammaEstimate est;
  est.gamma = std::numeric_limits<double>::infinity();
  for (GridFunction x : probes) {
    const double nrm = lp_norm(x, W.grid(), pc);
    if (nrm == 0.0) {
      ++est.skipped;
      continue;
    }
    x /= nrm;
    const AdjointZ z = Zs.apply(x);
    const double den = z.s_norm + z.kernel_l2;
    if (!(den > 0.0)) {
      ++est.skipped;
      continue;
    }
    const double ratio = adjoint_W_apply(W, x).norm / den;
    ++est.used;
    if (ratio < est.gamma) {
      est.gamma = ratio;
      est.argmin = x;
    }
  }
  if (est.used == 0) est.gamma = 0.0;
  return est;
}

struct MinNormOptions {
  double tol = 1e-10;                 // ‖W u - target‖_X
  double optimality_tol = 1e-8;       // relative KKT residual
  double eps_start = 1e-2;
  double eps_end = 1e-10;
  int inner_iters = 200;
  double inner_tol = 1e-13;
};

struct MinNormResult {
  GridSeries u;
  double norm = 0.0;                 // ‖u‖_{L^p(I,U)}
  double residual = 0.0;             // ‖W u - target‖_X
  double optimality = 0.0;           // relative KKT residual (0 for p = 2)
  int iterations = 0;
};

/// Minimum-norm right inverse of W on its range.
///
/// For p = 2 the weighted pseudo-inverse is formed once from a thin SVD of
/// W_x^{1/2} W C^{-1/2}, C = diag(Δt_j w_i). For p ≠ 2 the convex problem
/// min Σ c|u|^p s.t. Wu = d is solved by iteratively reweighted least
/// squares with weights c(u² + ε²)^{(p-2)/2}, ε driven from eps_start to
/// eps_end (relative to max|u|), warm-started from the p = 2 solution.
class MinNormSolver {
 public:
  explicit MinNormSolver(const ControlOperatorW& W, MinNormOptions opt = {})
      : W_(&W), opt_(opt) {
    const int nx = W.nx();
    const int nt = W.nt();
    const Eigen::VectorXd& w = W.grid().weights();
    c_.resize(static_cast<Eigen::Index>(nx) * nt);
    for (int j = 0; j < nt; ++j) {
      c_.segment(static_cast<Eigen::Index>(j) * nx, nx) = W.cell_widths()(j) * w;
    }
    sqrt_wx_ = w.cwiseSqrt();
    const Eigen::MatrixXd a =
        sqrt_wx_.asDiagonal() * W.matrix() * c_.cwiseSqrt().cwiseInverse().asDiagonal();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    rank_ = 0;
    for (int i = 0; i < s.size(); ++i) {
      if (s(i) > 1e-12 * smax && s(i) > 0.0) ++rank_;
    }
    u_ = svd.matrixU().leftCols(rank_);
    sigma_ = s.head(rank_);
    v_ = svd.matrixV().leftCols(rank_);
  }

  int rank() const { return rank_; }
  const Eigen::VectorXd& singular_values() const { return sigma_; }

  /// ‖W̃⁻¹‖ for p = 2 (exact, 1/σ_min on the range). For p ≠ 2 the L²
  /// minimizer bounds the L^p minimum through the discrete norm equivalence
  /// on each cell, which this returns.
  double inverse_norm() const {
    if (rank_ == 0) return std::numeric_limits<double>::infinity();
    const double base = 1.0 / sigma_(rank_ - 1);
    const double p = W_->p();
    if (p == 2.0) return base;
    // ‖u‖_{L^p} ≤ K ‖u‖_{L²} with K from the smallest cell weight.
    const double cmin = c_.minCoeff();
    const double total = c_.sum();
    const double k = p > 2.0 ? std::pow(cmin, 1.0 / p - 0.5) : std::pow(total, 1.0 / p - 0.5);
    const double pc = conjugate_exponent(p);
    // ‖d‖_2-weighted ≤ K' ‖d‖_{L^p}.
    const Eigen::VectorXd& w = W_->grid().weights();
    const double wmin = w.minCoeff();
    const double wtot = w.sum();
    const double k2 = p < 2.0 ? std::pow(wmin, 0.5 - 1.0 / p) : std::pow(wtot, 0.5 - 1.0 / p);
    (void)pc;
    return base * k * k2;
  }

  /// Least-squares residual ‖W u_2 - d‖_X of the L² pseudo-inverse.
  double range_residual(const Eigen::Ref<const GridFunction>& d) const {
    const Eigen::VectorXd dd = sqrt_wx_.cwiseProduct(d);
    const Eigen::VectorXd r = dd - u_ * (u_.transpose() * dd);
    return lp_norm(r.cwiseQuotient(sqrt_wx_), W_->grid());
  }

  MinNormResult solve(const Eigen::Ref<const GridFunction>& target) const {
    const ControlOperatorW& W = *W_;
    MinNormResult res;
    const double dnorm = lp_norm(target, W.grid());
    Eigen::VectorXd u2 = l2_solve(target);
    res.u = W.unstack(u2);
    res.residual = lp_norm(W.apply(res.u) - target, W.grid());
    const double allowed = std::max(opt_.tol, 1e-10 * dnorm);
    if (res.residual > allowed) {
      std::ostringstream os;
      os << "min_norm_control: target outside the range of W (residual " << res.residual
         << " > " << allowed << ")";
      throw InfeasibleError(os.str(), res.residual);
    }
    if (W.p() != 2.0 && dnorm > 0.0) {
      // Project the target onto the range so that the constraint is exact.
      const GridFunction dr = W.matrix() * u2;
      irls(dr, u2, res);
      res.u = W.unstack(u2);
      res.residual = lp_norm(W.apply(res.u) - target, W.grid());
    }
    res.norm = lp_time_norm(res.u, W.mesh(), W.grid(), W.p());
    return res;
  }

 private:
  Eigen::VectorXd l2_solve(const Eigen::Ref<const GridFunction>& d) const {
    const Eigen::VectorXd dd = sqrt_wx_.cwiseProduct(d);
    const Eigen::VectorXd coef = (u_.transpose() * dd).cwiseQuotient(sigma_);
    return (v_ * coef).cwiseQuotient(c_.cwiseSqrt());
  }

  // Weighted least-norm step: argmin Σ r_i u_i² s.t. A u = d.
  Eigen::VectorXd weighted_step(const Eigen::VectorXd& r, const GridFunction& d) const {
    const Eigen::MatrixXd& a = W_->matrix();
    const Eigen::VectorXd rinv = r.cwiseInverse();
    const Eigen::MatrixXd g = a * rinv.asDiagonal() * a.transpose();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(g);
    cod.setThreshold(1e-13);
    const Eigen::VectorXd lam = cod.solve(d);
    return rinv.cwiseProduct(a.transpose() * lam);
  }

  double kkt_residual(const Eigen::VectorXd& u) const {
    const double p = W_->p();
    const Eigen::MatrixXd& a = W_->matrix();
    Eigen::VectorXd g(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      g(i) = p * c_(i) * std::pow(std::abs(u(i)), p - 1.0) * (u(i) < 0.0 ? -1.0 : 1.0);
    }
    // Component of the gradient orthogonal to range(Aᵀ).
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a.transpose());
    const Eigen::VectorXd lam = cod.solve(g);
    const double gn = g.norm();
    return gn > 0.0 ? (g - a.transpose() * lam).norm() / gn : 0.0;
  }

  void irls(const GridFunction& d, Eigen::VectorXd& u, MinNormResult& res) const {
    const double p = W_->p();
    const double scale = u.cwiseAbs().maxCoeff();
    const double damping = p > 2.0 ? 1.0 / (p - 1.0) : 1.0;
    std::vector<double> history;
    int iters = 0;
    for (double eps = opt_.eps_start; eps >= opt_.eps_end * 0.999; eps *= 0.1) {
      const double e2 = (eps * scale) * (eps * scale);
      for (int it = 0; it < opt_.inner_iters; ++it) {
        Eigen::VectorXd r(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) {
          r(i) = c_(i) * std::pow(u(i) * u(i) + e2, 0.5 * (p - 2.0));
        }
        Eigen::VectorXd next = weighted_step(r, d);
        next = u + damping * (next - u);
        const double change = (next - u).cwiseAbs().maxCoeff() / std::max(scale, 1e-300);
        u = next;
        ++iters;
        if (change <= opt_.inner_tol) break;
      }
      history.push_back(lp_time_norm(W_->unstack(u), W_->mesh(), W_->grid(), p));
    }
    res.iterations = iters;
    res.optimality = kkt_residual(u);
    if (!(res.optimality <= opt_.optimality_tol) || !u.allFinite()) {
      std::ostringstream os;
      os << "min_norm_control: IRLS stalled (KKT residual " << res.optimality << ")";
      throw NonConvergenceError(os.str(), history);
    }
  }

  const ControlOperatorW* W_;
  MinNormOptions opt_;
  Eigen::VectorXd c_;
  Eigen::VectorXd sqrt_wx_;
  int rank_ = 0;
  Eigen::MatrixXd u_;
  Eigen::VectorXd sigma_;
  Eigen::MatrixXd v_;
};

inline MinNormResult min_norm_control(const ControlOperatorW& W,
                                      const Eigen::Ref<const GridFunction>& target,
                                      const MinNormOptions& opt = {}) {
  return MinNormSolver(W, opt).solve(target);
}

struct AprioriConstants {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double D1 = 0.0;
  double D2 = 0.0;
  double D3 = 0.0;
};

/// κ₁, κ₂ (Hölder constants of the kernel (ν-s)^{α-1} against L^{1/α₁} and
/// L^p) and the growth constants D₁, D₂, D₃ of the controlled fixed-point map.
inline AprioriConstants apriori(double alpha, double alpha1, double p, double nu, double M,
                                double normB, double normWinv, double x0norm) {
  if (!(alpha > alpha1 && alpha1 > 0.0)) throw std::invalid_argument("apriori: need 0 < alpha1 < alpha");
  if (!(alpha > 1.0 / p)) throw std::invalid_argument("apriori: need alpha > 1/p");
  const double pc = conjugate_exponent(p);
  const double e1 = (alpha - alpha1) / (1.0 - alpha1);
  const double e2 = pc * (alpha - 1.0) + 1.0;
  AprioriConstants c;
  c.kappa1 = std::pow(std::pow(nu, e1) / e1, 1.0 - alpha1);
  c.kappa2 = std::pow(std::pow(nu, e2) / e2, 1.0 / pc);
  const double ga = std::tgamma(alpha);
  const double loop = 1.0 + (M / ga) * normB * c.kappa2 * normWinv;
  c.D1 = M * x0norm * loop;
  c.D2 = (M / ga) * c.kappa1 * loop;
  c.D3 = M * loop;
  return c;
}

/// Everything needed to synthesize controls for one (𝔸, α, 𝔹, mesh, grid, p).
class ControlProblem {
 public:
  ControlProblem(const Generator& gen, double alpha, const ControlMap& B, const TimeMesh& mesh,
                 const SpatialGrid& grid, double p, ProductRule rule = ProductRule::Rectangle,
                 MinNormOptions opt = {})
      : solver_(gen, alpha, mesh, rule),
        grid_(grid.with_p(p)),
        B_(B),
        W_(solver_, B, grid_, p),
        zs_(solver_, grid_, p),
        inverse_(W_, opt) {}

  ControlProblem(const ControlProblem&) = delete;
  ControlProblem& operator=(const ControlProblem&) = delete;

  const MildSolver& solver() const { return solver_; }
  const ControlOperatorW& W() const { return W_; }
  ControlOperatorW& W_mutable() { return W_; }
  const ZAdjointOperator& Zstar() const { return zs_; }
  const MinNormSolver& inverse() const { return inverse_; }
  const SpatialGrid& grid() const { return grid_; }
  const ControlMap& B() const { return B_; }
  const TimeMesh& mesh() const { return solver_.mesh(); }
  const Generator& generator() const { return solver_.generator(); }
  double alpha() const { return solver_.alpha(); }
  double p() const { return W_.p(); }

  GridFunction Z(const Eigen::Ref<const GridFunction>& x0, const Eigen::Ref<const GridSeries>& f) const {
    return apply_Z(solver_, x0, f);
  }

 private:
  MildSolver solver_;
  SpatialGrid grid_;
  ControlMap B_;
  ControlOperatorW W_;
  ZAdjointOperator zs_;
  MinNormSolver inverse_;
};

struct ControlResult {
  ControlSignal u;
  double control_norm = 0.0;
  double terminal_norm = 0.0;  // ‖q(ν) - x_1‖_X from a forward solve
  double residual = 0.0;       // ‖W u - target‖_X
  double optimality = 0.0;
  int iterations = 0;
};

/// u = W⁻¹[x_1 - Z(x_0, f)], checked by a forward mild solve.
inline ControlResult exact_control(const ControlProblem& cp, const Eigen::Ref<const GridFunction>& x0,
                                   const Eigen::Ref<const GridFunction>& x1,
                                   const Eigen::Ref<const GridSeries>& f) {
  const GridFunction target = x1 - cp.Z(x0, f);
  const MinNormResult mn = cp.inverse().solve(target);
  ControlResult r;
  r.u = ControlSignal{mn.u, cp.p()};
  r.control_norm = mn.norm;
  r.residual = mn.residual;
  r.optimality = mn.optimality;
  r.iterations = mn.iterations;
  const GridSeries forcing = f + cp.B().apply_series(mn.u);
  r.terminal_norm = lp_norm(cp.solver().terminal(x0, forcing) - x1, cp.grid());
  return r;
}

/// u = -W⁻¹ Z(x_0, f).
inline ControlResult null_control(const ControlProblem& cp, const Eigen::Ref<const GridFunction>& x0,
                                  const Eigen::Ref<const GridSeries>& f) {
  return exact_control(cp, x0, GridFunction::Zero(x0.size()), f);
}

}  // namespace fracnull
