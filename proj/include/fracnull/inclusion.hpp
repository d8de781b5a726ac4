#pragma once

// The multivalued layer: band nonlinearities F(t, q) = b(t, ·)[ψ₁(·, θ), ψ₂(·, θ)]
// with θ = ∫ Θ q, nonlocal initial maps g, selections, and the Picard /
// Galerkin iteration f ↦ S_F(Υ_n f) that yields controlled solutions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracnull/control.hpp"
#include "fracnull/errors.hpp"
#include "fracnull/fode.hpp"
#include "fracnull/mesh.hpp"

namespace fracnull {

/// Pointwise band [ψ₁(τ, θ), ψ₂(τ, θ)] scaled by b(t, τ), driven by the
/// scalar functional θ = ∫_Ω Θ q.
struct BandNonlinearity {
  using Psi = std::function<double(double tau, double theta)>;
  using Coef = std::function<double(double t, double tau)>;

  std::string name = "zero";
  Psi psi1 = [](double, double) { return 0.0; };
  Psi psi2 = [](double, double) { return 0.0; };
  GridFunction theta_kernel;  // Θ
  Coef b = [](double, double) { return 0.0; };
  double m = 0.0;             // sup |b|
  GridFunction envelope;      // α(τ) with |ψ_i| ≤ α

  /// ψ₁ = ψ₂ = c everywhere.
  static BandNonlinearity degenerate(const SpatialGrid& grid, double c, double m = 1.0) {
    BandNonlinearity band = base(grid, m, std::abs(c));
    band.name = "degenerate";
    band.psi1 = band.psi2 = [c](double, double) { return c; };
    return band;
  }

  static BandNonlinearity zero(const SpatialGrid& grid) {
    BandNonlinearity band = base(grid, 0.0, 0.0);
    band.name = "zero";
    return band;
  }

  /// ψ₁ = -α(τ), ψ₂ = α(τ): the band does not depend on the state.
  static BandNonlinearity constband(const SpatialGrid& grid, double m, const GridFunction& env) {
    BandNonlinearity band = base(grid, m, 0.0);
    band.name = "constband";
    band.envelope = env;
    band.psi1 = envelope_psi(grid, env, [](double) { return -1.0; });
    band.psi2 = envelope_psi(grid, env, [](double) { return 1.0; });
    return band;
  }

  /// ψ_{1,2} = α(τ)(sin θ ∓ 1)/2.
  static BandNonlinearity sinband(const SpatialGrid& grid, double m, const GridFunction& env) {
    BandNonlinearity band = base(grid, m, 0.0);
    band.name = "sinband";
    band.envelope = env;
    band.psi1 = envelope_psi(grid, env, [](double th) { return 0.5 * (std::sin(th) - 1.0); });
    band.psi2 = envelope_psi(grid, env, [](double th) { return 0.5 * (std::sin(th) + 1.0); });
    return band;
  }

  /// ψ_{1,2} = α(τ)((2/π) arctan θ ∓ 1)/2.
  static BandNonlinearity arctanband(const SpatialGrid& grid, double m, const GridFunction& env) {
    BandNonlinearity band = base(grid, m, 0.0);
    band.name = "arctanband";
    band.envelope = env;
    const double c = 2.0 / std::numbers::pi;
    band.psi1 = envelope_psi(grid, env, [c](double th) { return 0.5 * (c * std::atan(th) - 1.0); });
    band.psi2 = envelope_psi(grid, env, [c](double th) { return 0.5 * (c * std::atan(th) + 1.0); });
    return band;
  }

  /// Largest violation of ψ₁ ≤ ψ₂, |ψ_i| ≤ α and |b| ≤ m over sampled
  /// (t, τ, θ); zero means the structural hypotheses hold on the samples.
  double hypothesis_violation(const SpatialGrid& grid, const TimeMesh& mesh,
                              const std::vector<double>& thetas) const {
    double v = 0.0;
    for (int i = 0; i < grid.size(); ++i) {
      const double tau = grid.node(i);
      for (double th : thetas) {
        const double a = psi1(tau, th);
        const double c = psi2(tau, th);
        v = std::max(v, a - c);
        v = std::max(v, std::abs(a) - envelope(i));
        v = std::max(v, std::abs(c) - envelope(i));
      }
      for (double t : mesh.times()) v = std::max(v, std::abs(b(t, tau)) - m);
    }
    return v;
  }

 private:
  static BandNonlinearity base(const SpatialGrid& grid, double m, double env) {
    BandNonlinearity band;
    band.theta_kernel = GridFunction::Ones(grid.size());
    band.m = m;
    band.b = [m](double, double) { return m; };
    band.envelope = GridFunction::Constant(grid.size(), env);
    return band;
  }

  // ψ(τ, θ) = α(τ) h(θ), α looked up at the grid node nearest τ.
  static Psi envelope_psi(const SpatialGrid& grid, const GridFunction& env,
                          std::function<double(double)> h) {
    Eigen::VectorXd nodes = grid.nodes();
    return [nodes, env, h](double tau, double th) {
      Eigen::Index i = 0;
      (nodes.array() - tau).abs().minCoeff(&i);
      return env(i) * h(th);
    };
  }
};

struct Band {
  GridFunction lower;
  GridFunction upper;
};

/// F(t, q) as the componentwise interval [lower, upper].
inline Band band_eval(const BandNonlinearity& band, double t,
                      const Eigen::Ref<const GridFunction>& q, const SpatialGrid& grid) {
  const double theta = pairing(band.theta_kernel, q, grid);
  Band r{GridFunction(q.size()), GridFunction(q.size())};
  for (int i = 0; i < q.size(); ++i) {
    const double tau = grid.node(i);
    const double bb = band.b(t, tau);
    const double a = bb * band.psi1(tau, theta);
    const double c = bb * band.psi2(tau, theta);
    r.lower(i) = std::min(a, c);
    r.upper(i) = std::max(a, c);
  }
  return r;
}

enum class SelectionRule { Midpoint, Lower, Upper, ProjectPrevious };

inline GridFunction select(const Band& bd, SelectionRule rule,
                           const std::optional<GridFunction>& prev = std::nullopt) {
  switch (rule) {
    case SelectionRule::Lower: return bd.lower;
    case SelectionRule::Upper: return bd.upper;
    case SelectionRule::ProjectPrevious:
      if (prev) return prev->cwiseMax(bd.lower).cwiseMin(bd.upper);
      [[fallthrough]];
    case SelectionRule::Midpoint: break;
  }
  return 0.5 * (bd.lower + bd.upper);
}

inline GridFunction select(const BandNonlinearity& band, SelectionRule rule, double t,
                           const Eigen::Ref<const GridFunction>& q, const SpatialGrid& grid,
                           const std::optional<GridFunction>& prev = std::nullopt) {
  return select(band_eval(band, t, q, grid), rule, prev);
}

struct Membership {
  bool ok = true;
  double violation = 0.0;
};

/// f_j ∈ F(t_j, q(t_j)) on every cell (left endpoint, matching the
/// rectangle rule), within `tol`.
inline Membership selection_membership(const Eigen::Ref<const GridSeries>& f,
                                       const BandNonlinearity& band, const Trajectory& tr,
                                       const SpatialGrid& grid, double tol = 1e-10) {
  Membership m;
  for (int j = 0; j < f.cols(); ++j) {
    const Band bd = band_eval(band, tr.mesh.t(j), tr.states.col(j), grid);
    const double below = (bd.lower - f.col(j)).maxCoeff();
    const double above = (f.col(j) - bd.upper).maxCoeff();
    m.violation = std::max({m.violation, below, above});
  }
  m.ok = m.violation <= tol;
  return m;
}

/// Nonlocal initial condition q(0) = x_0 + w, w ∈ g(q).
class NonlocalMap {
 public:
  enum class Kind { Zero, PointEval, Box };

  static NonlocalMap none() { return NonlocalMap(Kind::Zero, 0.0, 0, 0.0); }

  /// g(q) = {c q(t_{k1})}. Any c ≠ 0 breaks the sublinear growth condition
  /// and must be requested explicitly.
  static NonlocalMap point_eval(double c, int node, bool allow_linear_growth = false) {
    check(c, allow_linear_growth);
    return NonlocalMap(Kind::PointEval, c, node, 0.0);
  }

  /// g(q) = componentwise interval c q(t_{k1}) ± radius.
  static NonlocalMap box(double c, int node, double radius, bool allow_linear_growth = false) {
    check(c, allow_linear_growth);
    if (!(radius >= 0.0)) throw std::invalid_argument("NonlocalMap: radius must be >= 0");
    return NonlocalMap(Kind::Box, c, node, radius);
  }

  Kind kind() const { return kind_; }
  double c() const { return c_; }
  int node() const { return node_; }
  double radius() const { return radius_; }

  /// The element of g(q) used by the iteration (the box centre).
  GridFunction resolve(const Trajectory& q) const {
    if (kind_ == Kind::Zero) return GridFunction::Zero(q.states.rows());
    return c_ * q.states.col(std::min(node_, q.nodes() - 1));
  }

  /// Distance (sup norm) from w to g(q).
  double distance(const GridFunction& w, const Trajectory& q) const {
    const GridFunction centre = resolve(q);
    return ((w - centre).cwiseAbs().array() - radius_).cwiseMax(0.0).maxCoeff();
  }

  /// sup{‖w‖ : w ∈ g(q), ‖q‖_C ≤ N} for the X norm on `grid`.
  double growth(double N, const SpatialGrid& grid) const {
    if (kind_ == Kind::Zero) return 0.0;
    const double r = radius_ * std::pow(grid.weights().sum(), 1.0 / grid.p());
    return std::abs(c_) * N + r;
  }

 private:
  NonlocalMap(Kind k, double c, int node, double r) : kind_(k), c_(c), node_(node), radius_(r) {}
  static void check(double c, bool allow) {
    if (!(std::abs(c) < 1.0)) throw std::invalid_argument("NonlocalMap: need |c| < 1");
    if (c != 0.0 && !allow) {
      throw std::invalid_argument(
          "NonlocalMap: c != 0 violates the sublinear growth condition; set the override flag");
    }
  }
  Kind kind_;
  double c_;
  int node_;
  double radius_;
};

struct EtaRow {
  double N = 0.0;
  double eta = 0.0;        // η_N (constant in t)
  double eta_norm = 0.0;   // ‖η_N‖_{L^{1/α₁}(I)}
  double statistic = 0.0;  // (1/N) ∫_0^ν (ν-s)^{α-1} η_N ds
};

/// η_N = 2m‖α‖_{L^p(Ω)} for the band family, and the growth statistic.
inline std::vector<EtaRow> eta_growth_check(const BandNonlinearity& band, const SpatialGrid& grid,
                                            double alpha, double alpha1, double nu,
                                            const std::vector<double>& N_list) {
  std::vector<EtaRow> rows;
  const double eta = 2.0 * band.m * lp_norm(band.envelope, grid);
  for (double N : N_list) {
    EtaRow r;
    r.N = N;
    r.eta = eta;
    r.eta_norm = eta * std::pow(nu, alpha1);
    r.statistic = eta * std::pow(nu, alpha) / alpha / N;
    rows.push_back(r);
  }
  return rows;
}

struct FixedPointOptions {
  double tol = 1e-11;
  int max_iter = 50;
  SelectionRule rule = SelectionRule::Midpoint;
  // Rule used for the initial selection f⁰ from the band at q ≡ P_n x_0.
  SelectionRule init_rule = SelectionRule::Midpoint;
};

struct FixedPointResult {
  explicit FixedPointResult(Trajectory traj) : q(std::move(traj)) {}

  int level = 0;
  Trajectory q;                 // q_n = Υ_n f_n
  ControlSignal u;
  GridSeries f;                 // selection, one column per cell
  GridFunction w;
  int iterations = 0;
  std::vector<double> history;  // max(‖Δf‖_∞, ‖Δw‖_∞) per iteration
  std::vector<double> q_change; // ‖q^{k+1} - q^k‖_∞ per iteration
  double terminal_norm = 0.0;   // ‖q_n(ν)‖_X
  double defect_norm = 0.0;     // ‖P_n S_α(ν)(x_0+w) - P_n S_α(ν) P_n(x_0+w)‖_X
  double full_terminal = 0.0;   // terminal norm of the unprojected system under (f, u)
  double control_norm = 0.0;
  double sup_state = 0.0;       // sup_t ‖q(t)‖_X over all iterates
  Membership membership;
};

namespace detail {

inline Trajectory constant_trajectory(const TimeMesh& mesh, const GridFunction& x) {
  return Trajectory{mesh, x.replicate(1, mesh.cells() + 1)};
}

inline GridSeries selection_series(const BandNonlinearity& band, SelectionRule rule,
                                   const Trajectory& q, const SpatialGrid& grid,
                                   const GridSeries* prev) {
  const int n = q.mesh.cells();
  GridSeries f(q.states.rows(), n);
  for (int j = 0; j < n; ++j) {
    std::optional<GridFunction> p;
    if (prev) p = GridFunction(prev->col(j));
    f.col(j) = select(band, rule, q.mesh.t(j), q.states.col(j), grid, p);
  }
  return f;
}

inline double sup_norm_in_time(const Trajectory& q, const SpatialGrid& grid) {
  double s = 0.0;
  for (int k = 0; k < q.nodes(); ++k) s = std::max(s, lp_norm(q.states.col(k), grid));
  return s;
}

// Shared Picard loop. With `fixed_u` the control is held (existence map
// Λ_n); otherwise u = -W⁻¹ Z_n(w, f) is recomputed every sweep (Υ_n).
inline FixedPointResult picard(const MildSolver& solver, const ControlMap& B,
                               const SpatialGrid& grid, double p, const MinNormSolver* inverse,
                               const Eigen::Ref<const GridFunction>& x0,
                               const BandNonlinearity& band, const NonlocalMap& g, int n,
                               const FixedPointOptions& opt, const GridSeries* fixed_u) {
  const int nx = static_cast<int>(x0.size());
  if (n < 0 || n > nx) throw std::invalid_argument("galerkin: need 0 <= n <= n_x");
  const TimeMesh& mesh = solver.mesh();

  Trajectory q_prev = constant_trajectory(mesh, project_Pn(x0, n));
  GridSeries f = selection_series(band, opt.init_rule, q_prev, grid, nullptr);
  GridFunction w = g.resolve(q_prev);
  GridSeries u = fixed_u ? *fixed_u : GridSeries::Zero(nx, mesh.cells());
  std::vector<double> history;
  std::vector<double> q_change;
  double sup_state = 0.0;

  for (int it = 1; it <= opt.max_iter; ++it) {
    const GridFunction x0w = x0 + w;
    const GridSeries pf = lift_Pn_time(f, n);
    if (!fixed_u) {
      const GridFunction zn = solver.terminal(project_Pn(x0w, n), pf);
      u = -inverse->solve(zn).u;
    }
    Trajectory q = solver.solve(x0w, pf + B.apply_series(u));
    q.states = lift_Pn_time(q.states, n);
    if (!q.states.allFinite() || q.states.cwiseAbs().maxCoeff() > 1e12) {
      throw BlowUpError("galerkin: iterate left the blow-up threshold", history);
    }
    sup_state = std::max(sup_state, sup_norm_in_time(q, grid));
    const GridSeries f_next = selection_series(band, opt.rule, q, grid, &f);
    const GridFunction w_next = g.resolve(q);
    const double df = (f_next - f).cwiseAbs().maxCoeff();
    const double dw = w_next.size() ? (w_next - w).cwiseAbs().maxCoeff() : 0.0;
    history.push_back(std::max(df, dw));
    q_change.push_back((q.states - q_prev.states).cwiseAbs().maxCoeff());
    if (history.back() <= opt.tol) {
      // (q, u, f, w) is consistent: q = Υ_n(f) with w, u built from f.
      FixedPointResult r(std::move(q));
      r.level = n;
      r.iterations = it;
      r.history = std::move(history);
      r.q_change = std::move(q_change);
      r.sup_state = sup_state;
      r.u = ControlSignal{u, p};
      r.f = f;
      r.w = w;
      r.terminal_norm = lp_norm(r.q.terminal(), grid);
      const GridFunction s_full = solver.terminal(x0w, GridSeries::Zero(nx, mesh.cells()));
      const GridFunction s_proj =
          solver.terminal(project_Pn(x0w, n), GridSeries::Zero(nx, mesh.cells()));
      r.defect_norm = lp_norm(project_Pn(s_full - s_proj, n), grid);
      r.full_terminal =
          lp_norm(solver.terminal(x0w, f + B.apply_series(u)), grid);
      r.control_norm = lp_time_norm(u, mesh, grid, p);
      r.membership = selection_membership(r.f, band, r.q, grid);
      return r;
    }
    f = f_next;
    w = w_next;
    q_prev = std::move(q);
  }
  std::ostringstream os;
  os << "galerkin: no convergence after " << opt.max_iter << " iterations (last change "
     << history.back() << ")";
  throw NonConvergenceError(os.str(), history);
}

}  // namespace detail

/// Controlled Galerkin level n: iterate f ← S_F(Υ_n f) with
/// u = -W⁻¹ Z_n(w, f) until f and w are stationary.
///
/// Throws PreconditionError when W has no range (γ̂ = 0), NonConvergenceError
/// after max_iter sweeps.
inline FixedPointResult galerkin_fixed_point(const ControlProblem& cp,
                                             const Eigen::Ref<const GridFunction>& x0,
                                             const BandNonlinearity& band, const NonlocalMap& g,
                                             int n, const FixedPointOptions& opt = {}) {
  if (cp.inverse().rank() == 0 && x0.size() > 0) {
    throw PreconditionError("galerkin: W is zero, the controllability precondition fails");
  }
  return detail::picard(cp.solver(), cp.B(), cp.grid(), cp.p(), &cp.inverse(), x0, band, g, n,
                        opt, nullptr);
}

/// Solution of the inclusion with the control held fixed, by the same
/// iteration at full projection level.
inline FixedPointResult existence_solve(const MildSolver& solver, const ControlMap& B,
                                        const SpatialGrid& grid,
                                        const Eigen::Ref<const GridFunction>& x0,
                                        const BandNonlinearity& band, const NonlocalMap& g,
                                        const ControlSignal& u, const FixedPointOptions& opt = {}) {
  return detail::picard(solver, B, grid, u.p, nullptr, x0, band, g,
                        static_cast<int>(x0.size()), opt, &u.values);
}

struct CascadeRow {
  int n = 0;
  bool ok = false;
  std::string error;
  int iterations = 0;
  double terminal_norm = 0.0;
  double defect_norm = 0.0;
  double full_terminal = 0.0;
  double distance_to_top = 0.0;  // ‖q_n - q_{n_max}‖_∞
  double control_norm = 0.0;
  double membership_violation = 0.0;
  double sup_state = 0.0;
};

struct CascadeReport {
  std::vector<CascadeRow> rows;
  std::vector<FixedPointResult> results;  // successful levels, in order
};

/// Runs galerkin_fixed_point per level; failures are recorded and the
/// cascade continues.
inline CascadeReport cascade(const ControlProblem& cp, const Eigen::Ref<const GridFunction>& x0,
                             const BandNonlinearity& band, const NonlocalMap& g,
                             const std::vector<int>& levels, const FixedPointOptions& opt = {}) {
  CascadeReport rep;
  std::vector<std::optional<FixedPointResult>> res;
  for (int n : levels) {
    CascadeRow row;
    row.n = n;
    try {
      FixedPointResult r = galerkin_fixed_point(cp, x0, band, g, n, opt);
      row.ok = true;
      row.iterations = r.iterations;
      row.terminal_norm = r.terminal_norm;
      row.defect_norm = r.defect_norm;
      row.full_terminal = r.full_terminal;
      row.control_norm = r.control_norm;
      row.membership_violation = r.membership.violation;
      row.sup_state = r.sup_state;
      res.emplace_back(std::move(r));
    } catch (const Error& e) {
      row.error = e.what();
      res.emplace_back(std::nullopt);
    } catch (const std::invalid_argument& e) {
      row.error = e.what();
      res.emplace_back(std::nullopt);
    }
    rep.rows.push_back(row);
  }
  if (!res.empty() && res.back()) {
    const GridSeries& top = res.back()->q.states;
    for (size_t i = 0; i < res.size(); ++i) {
      if (res[i]) rep.rows[i].distance_to_top = (res[i]->q.states - top).cwiseAbs().maxCoeff();
    }
  }
  for (auto& r : res) {
    if (r) rep.results.push_back(std::move(*r));
  }
  return rep;
}

/// Smallest N with D₁ + D₂‖η_N‖ + D₃‖g(B^N)‖ ≤ N for constant η, or +∞
/// when the nonlocal growth makes the inequality unsolvable.
inline double apriori_radius(const AprioriConstants& c, double eta_norm, const NonlocalMap& g,
                             const SpatialGrid& grid) {
  const double slope = c.D3 * g.growth(1.0, grid) - c.D3 * g.growth(0.0, grid);
  if (slope >= 1.0) return std::numeric_limits<double>::infinity();
  return (c.D1 + c.D2 * eta_norm + c.D3 * g.growth(0.0, grid)) / (1.0 - slope);
}

}  // namespace fracnull
