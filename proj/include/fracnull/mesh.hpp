#pragma once

// Spatial grids on Ω = [0, π], time meshes on I = [0, ν], product
// integration weights for the kernel (t - s)^{α-1}, and the coordinate
// projections P_n.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fracnull {

using GridFunction = Eigen::VectorXd;

/// Time-indexed family of grid functions, one column per node or cell.
using GridSeries = Eigen::MatrixXd;

/// Nodes and positive quadrature weights on Ω together with the exponent p
/// of X = L^p(Ω).
class SpatialGrid {
 public:
  enum class Rule { Trapezoid, Midpoint, Point };

  static SpatialGrid trapezoid(int n, double p = 2.0, double a = 0.0,
                               double b = std::numbers::pi) {
    if (n < 2) throw std::invalid_argument("SpatialGrid: trapezoid needs n >= 2");
    SpatialGrid g(Rule::Trapezoid, p, a, b);
    const double h = (b - a) / (n - 1);
    g.nodes_ = Eigen::VectorXd::LinSpaced(n, a, b);
    g.weights_ = Eigen::VectorXd::Constant(n, h);
    g.weights_(0) = g.weights_(n - 1) = 0.5 * h;
    return g;
  }

  static SpatialGrid midpoint(int n, double p = 2.0, double a = 0.0,
                              double b = std::numbers::pi) {
    if (n < 1) throw std::invalid_argument("SpatialGrid: midpoint needs n >= 1");
    SpatialGrid g(Rule::Midpoint, p, a, b);
    const double h = (b - a) / n;
    g.nodes_.resize(n);
    for (int i = 0; i < n; ++i) g.nodes_(i) = a + (i + 0.5) * h;
    g.weights_ = Eigen::VectorXd::Constant(n, h);
    return g;
  }

  /// A single node with unit weight, so that X = R with |·|.
  static SpatialGrid point(double p = 2.0) {
    SpatialGrid g(Rule::Point, p, 0.0, 1.0);
    g.nodes_ = Eigen::VectorXd::Zero(1);
    g.weights_ = Eigen::VectorXd::Ones(1);
    return g;
  }

  static SpatialGrid make(Rule rule, int n, double p) {
    switch (rule) {
      case Rule::Trapezoid: return trapezoid(n, p);
      case Rule::Midpoint: return midpoint(n, p);
      case Rule::Point: return point(p);
    }
    throw std::invalid_argument("SpatialGrid: unknown rule");
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  const Eigen::VectorXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double node(int i) const { return nodes_(i); }
  double p() const { return p_; }
  Rule rule() const { return rule_; }
  double measure() const { return b_ - a_; }

  SpatialGrid with_p(double p) const {
    SpatialGrid g = *this;
    g.p_ = p;
    return g;
  }

 private:
  SpatialGrid(Rule rule, double p, double a, double b)
      : rule_(rule), p_(p), a_(a), b_(b) {
    if (!(p > 1.0)) throw std::invalid_argument("SpatialGrid: p must exceed 1");
  }

  Rule rule_;
  double p_;
  double a_;
  double b_;
  Eigen::VectorXd nodes_;
  Eigen::VectorXd weights_;
};

/// (Σ w_i |g_i|^p)^{1/p} with exponent `p` (defaults to the grid's).
inline double lp_norm(const Eigen::Ref<const GridFunction>& g, const SpatialGrid& grid,
                      double p = 0.0) {
  if (g.size() != grid.size()) throw std::invalid_argument("lp_norm: size mismatch");
  if (p == 0.0) p = grid.p();
  const double m = g.cwiseAbs().maxCoeff();
  if (m == 0.0) return 0.0;
  // Scale by the max entry to avoid overflow in |g|^p.
  double s = 0.0;
  for (int i = 0; i < g.size(); ++i) s += grid.weights()(i) * std::pow(std::abs(g(i)) / m, p);
  return m * std::pow(s, 1.0 / p);
}

/// Discrete dual pairing ⟨x*, x⟩ = Σ w_i x*_i x_i.
inline double pairing(const Eigen::Ref<const GridFunction>& a,
                      const Eigen::Ref<const GridFunction>& b, const SpatialGrid& grid) {
  return (grid.weights().array() * a.array() * b.array()).sum();
}

/// Partition 0 = t_0 < ... < t_n = ν.
class TimeMesh {
 public:
  static TimeMesh uniform(double nu, int n) {
    if (!(nu > 0.0) || n < 1) throw std::invalid_argument("TimeMesh: need nu > 0, n >= 1");
    TimeMesh m;
    m.nu_ = nu;
    m.t_.resize(n + 1);
    for (int j = 0; j <= n; ++j) m.t_[j] = nu * static_cast<double>(j) / n;
    m.t_[n] = nu;
    m.uniform_ = true;
    return m;
  }

  /// t_j = ν (j/n)^{1/α}: clustered at the origin.
  static TimeMesh graded(double nu, int n, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("TimeMesh: bad grading");
    TimeMesh m = uniform(nu, n);
    for (int j = 1; j < n; ++j) m.t_[j] = nu * std::pow(static_cast<double>(j) / n, 1.0 / alpha);
    m.uniform_ = alpha == 1.0;
    return m;
  }

  static TimeMesh from_nodes(std::vector<double> t) {
    if (t.size() < 2 || t.front() != 0.0) throw std::invalid_argument("TimeMesh: need t_0 = 0");
    for (size_t j = 1; j < t.size(); ++j) {
      if (!(t[j] > t[j - 1])) throw std::invalid_argument("TimeMesh: nodes must increase");
    }
    TimeMesh m;
    m.nu_ = t.back();
    m.t_ = std::move(t);
    m.uniform_ = false;
    return m;
  }

  /// Same cells on [0, ν] continued with cells of the final width up to
  /// `horizon` (rounded to a whole number of cells).
  TimeMesh extended(double horizon) const {
    if (!(horizon > nu_)) throw std::invalid_argument("TimeMesh: horizon must exceed nu");
    const double h = t_.back() - t_[t_.size() - 2];
    const int extra = std::max(1, static_cast<int>(std::lround((horizon - nu_) / h)));
    TimeMesh m = *this;
    for (int k = 1; k <= extra; ++k) m.t_.push_back(nu_ + (horizon - nu_) * k / extra);
    m.t_.back() = horizon;
    m.nu_ = horizon;
    m.uniform_ = uniform_ && std::abs((horizon - nu_) / extra - h) <= 1e-12 * h;
    return m;
  }

  int cells() const { return static_cast<int>(t_.size()) - 1; }
  double nu() const { return nu_; }
  double t(int j) const { return t_[j]; }
  const std::vector<double>& times() const { return t_; }
  double dt(int j) const { return t_[j + 1] - t_[j]; }
  bool is_uniform() const { return uniform_; }
  /// Cell midpoint.
  double mid(int j) const { return 0.5 * (t_[j] + t_[j + 1]); }

 private:
  TimeMesh() = default;
  double nu_ = 1.0;
  std::vector<double> t_;
  bool uniform_ = false;
};

enum class ProductRule { Rectangle, Trapezoid };

/// ω_j = [(t - t_j)^α - (t - t_{j+1})^α] / α for j < k, with t = t_k: the
/// kernel (t - s)^{α-1} integrated exactly over each cell.
inline std::vector<double> frac_weights(const TimeMesh& mesh, double alpha, int k) {
  if (k < 1 || k > mesh.cells()) throw std::invalid_argument("frac_weights: need 1 <= k <= n");
  std::vector<double> w(k);
  const double t = mesh.t(k);
  for (int j = 0; j < k; ++j) {
    const double l0 = t - mesh.t(j);
    const double l1 = t - mesh.t(j + 1);
    w[j] = alpha == 1.0 ? l0 - l1 : (std::pow(l0, alpha) - std::pow(l1, alpha)) / alpha;
  }
  return w;
}

/// Split of the exact kernel integral against the linear interpolant of a
/// function of the lag: ∫_cell (t-s)^{α-1} g(t-s) ds ≈ a_j g(L0) + b_j g(L1),
/// L0 = t - t_j, L1 = t - t_{j+1}.
struct LagPair {
  double a = 0.0;
  double b = 0.0;
};

inline std::vector<LagPair> frac_weights_linear(const TimeMesh& mesh, double alpha, int k) {
  std::vector<LagPair> w(k);
  const double t = mesh.t(k);
  for (int j = 0; j < k; ++j) {
    const double l0 = t - mesh.t(j);
    const double l1 = t - mesh.t(j + 1);
    const double h = l0 - l1;
    const double om = (std::pow(l0, alpha) - std::pow(l1, alpha)) / alpha;
    // ∫_{L1}^{L0} x^{α-1} (L0 - x)/h dx
    const double b = (l0 * om - (std::pow(l0, alpha + 1.0) - std::pow(l1, alpha + 1.0)) /
                                    (alpha + 1.0)) /
                     h;
    w[j] = LagPair{om - b, b};
  }
  return w;
}

/// Coordinate truncation onto the first n nodal basis functions.
inline GridFunction project_Pn(const Eigen::Ref<const GridFunction>& x, int n) {
  if (n < 0 || n > x.size()) throw std::invalid_argument("project_Pn: need 0 <= n <= dim");
  GridFunction y = GridFunction::Zero(x.size());
  y.head(n) = x.head(n);
  return y;
}

/// P_n applied at every time index (columns).
inline GridSeries lift_Pn_time(const Eigen::Ref<const GridSeries>& f, int n) {
  if (n < 0 || n > f.rows()) throw std::invalid_argument("lift_Pn_time: need 0 <= n <= dim");
  GridSeries g = GridSeries::Zero(f.rows(), f.cols());
  g.topRows(n) = f.topRows(n);
  return g;
}

/// Piecewise-constant control: column j is u on cell j (n_x × n_t).
struct ControlSignal {
  GridSeries values;
  double p = 2.0;

  int cells() const { return static_cast<int>(values.cols()); }
};

/// (Σ_j Δt_j ‖u_j‖_U^p)^{1/p} for a piecewise-constant signal.
inline double lp_time_norm(const Eigen::Ref<const GridSeries>& u, const TimeMesh& mesh,
                           const SpatialGrid& grid, double p = 0.0) {
  if (u.cols() != mesh.cells() || u.rows() != grid.size()) {
    throw std::invalid_argument("lp_time_norm: shape mismatch");
  }
  if (p == 0.0) p = grid.p();
  std::vector<double> cell(mesh.cells());
  double m = 0.0;
  for (int j = 0; j < mesh.cells(); ++j) {
    cell[j] = lp_norm(u.col(j), grid, p);
    m = std::max(m, cell[j]);
  }
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (int j = 0; j < mesh.cells(); ++j) s += mesh.dt(j) * std::pow(cell[j] / m, p);
  return m * std::pow(s, 1.0 / p);
}

inline double lp_time_norm(const ControlSignal& u, const TimeMesh& mesh, const SpatialGrid& grid) {
  return lp_time_norm(u.values, mesh, grid, u.p);
}

}  // namespace fracnull
