#pragma once

// Forward solvers for the Caputo evolution equation
//   ^C D^α q = 𝔸q + g(t),  q(0) = x_0,
// in mild form (product integration against T_α) and by the fractional
// Adams predictor-corrector, plus the L1 residual of the Caputo derivative
// and the continuation past ν with zero forcing.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fracnull/errors.hpp"
#include "fracnull/mesh.hpp"
#include "fracnull/semigroup.hpp"

namespace fracnull {

/// States at the mesh nodes, one column per node (n_x × (n_t + 1)).
struct Trajectory {
  TimeMesh mesh;
  GridSeries states;

  int nodes() const { return static_cast<int>(states.cols()); }
  auto at(int k) const { return states.col(k); }
  auto terminal() const { return states.col(states.cols() - 1); }
};

/// Mild-solution evaluator bound to one (𝔸, α, mesh): the Mittag-Leffler
/// tables are built once and reused by every solve.
///
/// Forcing g = f + 𝔹u is piecewise constant in time, one column per cell:
///   q_k = S_α(t_k) x_0 + Σ_{j<k} ω_j^{(k)} T_α(t_k - t_j) g_j.
/// The trapezoid variant interpolates T_α linearly in the lag instead.
class MildSolver {
 public:
  MildSolver(const Generator& gen, double alpha, const TimeMesh& mesh,
             ProductRule rule = ProductRule::Rectangle)
      : gen_(gen), alpha_(alpha), mesh_(mesh), rule_(rule), family_(gen, alpha, mesh) {}

  const Generator& generator() const { return gen_; }
  const TimeMesh& mesh() const { return mesh_; }
  double alpha() const { return alpha_; }
  ProductRule rule() const { return rule_; }
  const FractionalFamily& family() const { return family_; }

  Trajectory solve(const Eigen::Ref<const GridFunction>& x0,
                   const Eigen::Ref<const GridSeries>& forcing) const {
    check(x0, forcing);
    const int n = mesh_.cells();
    const GridFunction y0 = gen_.to_modal(x0);
    const GridSeries g = gen_.to_modal(forcing);
    GridSeries modal(x0.size(), n + 1);
    for (int k = 0; k <= n; ++k) modal.col(k) = node_modal(k, y0, g);
    Trajectory tr{mesh_, GridSeries(x0.size(), n + 1)};
    for (int k = 0; k <= n; ++k) tr.states.col(k) = gen_.from_modal(modal.col(k));
    return tr;
  }

  /// q at t_k only.
  GridFunction state_at(int k, const Eigen::Ref<const GridFunction>& x0,
                        const Eigen::Ref<const GridSeries>& forcing) const {
    check(x0, forcing);
    return gen_.from_modal(node_modal(k, gen_.to_modal(x0), gen_.to_modal(forcing)));
  }

  GridFunction terminal(const Eigen::Ref<const GridFunction>& x0,
                        const Eigen::Ref<const GridSeries>& forcing) const {
    return state_at(mesh_.cells(), x0, forcing);
  }

  /// Modal multipliers of the history integral at t_k, one column per cell
  /// j < k: ω_j T_α(t_k - t_j) for the rectangle rule.
  GridSeries kernel_table(int k) const {
    GridSeries tab(gen_.size(), k);
    if (rule_ == ProductRule::Rectangle) {
      const std::vector<double> w = frac_weights(mesh_, alpha_, k);
      for (int j = 0; j < k; ++j) tab.col(j) = w[j] * family_.t_between(k, j);
    } else {
      const std::vector<LagPair> w = frac_weights_linear(mesh_, alpha_, k);
      for (int j = 0; j < k; ++j) {
        tab.col(j) = w[j].a * family_.t_between(k, j) + w[j].b * family_.t_between(k, j + 1);
      }
    }
    return tab;
  }

  /// Σ_j ω_j T_α(t_k - s_j) g_j in modal coordinates (history integral).
  GridFunction history_modal(int k, const Eigen::Ref<const GridSeries>& g_modal) const {
    if (k == 0) return GridFunction::Zero(g_modal.rows());
    const GridSeries tab = kernel_table(k);
    return tab.cwiseProduct(g_modal.leftCols(k)).rowwise().sum();
  }

 private:
  void check(const Eigen::Ref<const GridFunction>& x0,
             const Eigen::Ref<const GridSeries>& forcing) const {
    if (x0.size() != gen_.size() || forcing.rows() != gen_.size() ||
        forcing.cols() != mesh_.cells()) {
      throw std::invalid_argument("MildSolver: shape mismatch");
    }
  }

  GridFunction node_modal(int k, const GridFunction& y0, const GridSeries& g) const {
    GridFunction q = family_.s_at(k).cwiseProduct(y0);
    q += history_modal(k, g);
    return q;
  }

  Generator gen_;
  double alpha_;
  TimeMesh mesh_;
  ProductRule rule_;
  FractionalFamily family_;
};

inline Trajectory mild_solve(const Generator& gen, double alpha,
                             const Eigen::Ref<const GridFunction>& x0,
                             const Eigen::Ref<const GridSeries>& f, const ControlSignal& u,
                             const ControlMap& B, const TimeMesh& mesh,
                             ProductRule rule = ProductRule::Rectangle) {
  const GridSeries forcing = f + B.apply_series(u.values);
  return MildSolver(gen, alpha, mesh, rule).solve(x0, forcing);
}

using RhsFunction = std::function<GridFunction(double, const GridFunction&)>;

struct PcOptions {
  double blowup = 1e12;
};

/// Fractional Adams-Bashforth-Moulton scheme (one corrector sweep) for
///   ^C D^α q = 𝔸q + rhs(t, q)
/// on a uniform mesh. Throws BlowUpError when a state leaves the finite
/// range or exceeds the blow-up threshold.
inline Trajectory pc_solve(const Generator& gen, double alpha,
                           const Eigen::Ref<const GridFunction>& x0, const RhsFunction& rhs,
                           const TimeMesh& mesh, const PcOptions& opt = {}) {
  if (!mesh.is_uniform()) throw std::invalid_argument("pc_solve: uniform mesh required");
  const int n = mesh.cells();
  const int m = static_cast<int>(x0.size());
  const double h = mesh.nu() / n;
  const Eigen::MatrixXd a = gen.matrix_of(gen.eigenvalues());
  auto field = [&](double t, const GridFunction& q) -> GridFunction {
    return a * q + rhs(t, q);
  };
  const double cp = std::pow(h, alpha) / std::tgamma(alpha + 1.0);
  const double cc = std::pow(h, alpha) / std::tgamma(alpha + 2.0);
  // Kernel sequences depend only on index differences.
  std::vector<double> pa(n + 1), pb(n + 2);
  for (int d = 0; d <= n + 1; ++d) pb[d] = std::pow(static_cast<double>(d), alpha + 1.0);
  for (int d = 0; d <= n; ++d) pa[d] = std::pow(static_cast<double>(d), alpha);

  Trajectory tr{mesh, GridSeries(m, n + 1)};
  tr.states.col(0) = x0;
  GridSeries F(m, n + 1);
  F.col(0) = field(0.0, x0);
  std::vector<double> history;
  for (int k = 0; k < n; ++k) {
    // Predictor weights b_{j,k+1} = (k+1-j)^α - (k-j)^α.
    GridFunction pred = x0;
    for (int j = 0; j <= k; ++j) pred += cp * (pa[k + 1 - j] - pa[k - j]) * F.col(j);
    // Corrector weights a_{j,k+1}.
    GridFunction corr = x0;
    const double kk = static_cast<double>(k);
    corr += cc * (pb[k] - (kk - alpha) * pa[k + 1]) * F.col(0);
    for (int j = 1; j <= k; ++j) {
      corr += cc * (pb[k - j + 2] + pb[k - j] - 2.0 * pb[k - j + 1]) * F.col(j);
    }
    const double t1 = mesh.t(k + 1);
    corr += cc * field(t1, pred);
    const double nrm = corr.cwiseAbs().maxCoeff();
    history.push_back(nrm);
    if (!std::isfinite(nrm) || nrm > opt.blowup) {
      std::ostringstream os;
      os << "pc_solve: state norm " << nrm << " at t=" << t1 << " exceeds blow-up threshold";
      throw BlowUpError(os.str(), history);
    }
    tr.states.col(k + 1) = corr;
    F.col(k + 1) = field(t1, corr);
  }
  return tr;
}

/// Node forcing from cell forcing: node k takes the cell ending at t_k.
inline GridSeries cell_to_node_forcing(const Eigen::Ref<const GridSeries>& cells) {
  GridSeries g(cells.rows(), cells.cols() + 1);
  g.col(0) = cells.col(0);
  g.rightCols(cells.cols()) = cells;
  return g;
}

struct ResidualOptions {
  // Nodes with t_k < skip_fraction·ν are excluded: the L1 scheme has an O(1)
  // consistency defect there for solutions that behave like t^α.
  double skip_fraction = 0.1;
};

/// max_k ‖D^α_{L1} q(t_k) - 𝔸q_k - g_k‖_X over the evaluated nodes, with
/// node forcing g (n_x × (n_t + 1)).
inline double caputo_residual(const Trajectory& tr, const Generator& gen, double alpha,
                              const SpatialGrid& grid, const Eigen::Ref<const GridSeries>& node_forcing,
                              const ResidualOptions& opt = {}) {
  const TimeMesh& mesh = tr.mesh;
  const int n = mesh.cells();
  const Eigen::MatrixXd a = gen.matrix_of(gen.eigenvalues());
  const double c = 1.0 / std::tgamma(2.0 - alpha);
  double worst = 0.0;
  for (int k = 1; k <= n; ++k) {
    if (mesh.t(k) < opt.skip_fraction * mesh.nu()) continue;
    GridFunction d = GridFunction::Zero(tr.states.rows());
    for (int j = 0; j < k; ++j) {
      const double l0 = mesh.t(k) - mesh.t(j);
      const double l1 = mesh.t(k) - mesh.t(j + 1);
      const double wgt = (std::pow(l0, 1.0 - alpha) - std::pow(l1, 1.0 - alpha)) / mesh.dt(j);
      d += wgt * (tr.states.col(j + 1) - tr.states.col(j));
    }
    d *= c;
    const GridFunction r = d - a * tr.states.col(k) - node_forcing.col(k);
    worst = std::max(worst, lp_norm(r, grid));
  }
  return worst;
}

inline double caputo_residual(const Trajectory& tr, const Generator& gen, double alpha,
                              const SpatialGrid& grid, const Eigen::Ref<const GridSeries>& f,
                              const ControlSignal& u, const ControlMap& B,
                              const ResidualOptions& opt = {}) {
  return caputo_residual(tr, gen, alpha, grid, cell_to_node_forcing(f + B.apply_series(u.values)), opt);
}

/// Mild solution continued on (ν, horizon] with zero forcing; the history
/// integral over [0, ν] keeps acting for t > ν.
inline Trajectory memory_tail_extend(const Generator& gen, double alpha,
                                     const Eigen::Ref<const GridFunction>& x0,
                                     const Eigen::Ref<const GridSeries>& forcing,
                                     const TimeMesh& mesh, double horizon,
                                     ProductRule rule = ProductRule::Rectangle) {
  const TimeMesh ext = mesh.extended(horizon);
  GridSeries g = GridSeries::Zero(forcing.rows(), ext.cells());
  g.leftCols(forcing.cols()) = forcing;
  return MildSolver(gen, alpha, ext, rule).solve(x0, g);
}

// ---- delimiter-separated text I/O -------------------------------------------

namespace detail {

inline void write_rows(std::ostream& os, const std::string& first, const std::string& prefix,
                       const std::vector<double>& t, const GridSeries& values) {
  os << first;
  for (int i = 0; i < values.rows(); ++i) os << ',' << prefix << i;
  os << '\n';
  os << std::setprecision(17);
  for (int k = 0; k < values.cols(); ++k) {
    os << t[k];
    for (int i = 0; i < values.rows(); ++i) os << ',' << values(i, k);
    os << '\n';
  }
}

inline std::pair<std::vector<double>, GridSeries> read_rows(std::istream& is,
                                                            const std::string& first) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read: empty input");
  if (line.rfind(first + ",", 0) != 0 && line != first) {
    throw std::runtime_error("read: header must start with '" + first + "'");
  }
  const long cols = std::count(line.begin(), line.end(), ',');
  std::vector<double> t;
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
      } catch (const std::exception&) {
        throw std::runtime_error("read: bad number on line " + std::to_string(lineno));
      }
    }
    if (static_cast<long>(row.size()) != cols + 1) {
      throw std::runtime_error("read: wrong column count on line " + std::to_string(lineno));
    }
    t.push_back(row[0]);
    rows.emplace_back(row.begin() + 1, row.end());
  }
  GridSeries v(cols, static_cast<long>(rows.size()));
  for (size_t k = 0; k < rows.size(); ++k) {
    for (long i = 0; i < cols; ++i) v(i, static_cast<long>(k)) = rows[k][i];
  }
  return {std::move(t), std::move(v)};
}

}  // namespace detail

/// One row per node: t, q_0, ..., q_{n_x-1}.
inline void write_trajectory(std::ostream& os, const Trajectory& tr) {
  detail::write_rows(os, "t", "q", tr.mesh.times(), tr.states);
}

inline Trajectory read_trajectory(std::istream& is) {
  auto [t, v] = detail::read_rows(is, "t");
  return Trajectory{TimeMesh::from_nodes(std::move(t)), std::move(v)};
}

/// One row per cell: s_j (left endpoint), u_0, ..., u_{n_x-1}.
inline void write_control(std::ostream& os, const ControlSignal& u, const TimeMesh& mesh) {
  std::vector<double> s(mesh.times().begin(), mesh.times().end() - 1);
  detail::write_rows(os, "s", "u", s, u.values);
}

inline ControlSignal read_control(std::istream& is, double p) {
  auto [s, v] = detail::read_rows(is, "s");
  (void)s;
  return ControlSignal{std::move(v), p};
}

}  // namespace fracnull
