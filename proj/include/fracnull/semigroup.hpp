#pragma once

// The generator 𝔸, its semigroup T(t) and the fractional families
//   S_α(t) = E_α(t^α 𝔸),   T_α(t) = E_{α,α}(t^α 𝔸),
// evaluated through the spectrum of 𝔸. The density integrals
//   S_α(t) = ∫ ξ_α(τ) T(t^α τ) dτ,   T_α(t) = α ∫ τ ξ_α(τ) T(t^α τ) dτ
// are kept as an independent check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "fracnull/mesh.hpp"
#include "fracnull/mlfun.hpp"

namespace fracnull {

namespace detail {

// Induced operator norm on L^p(Ω) for the weighted grid measure. Exact for
// p = 2; otherwise the Riesz-Thorin bound ‖K‖_1^{1/p} ‖K‖_∞^{1-1/p}, which
// is exact for diagonal K.
inline double induced_norm(const Eigen::MatrixXd& k, const SpatialGrid& grid) {
  const Eigen::VectorXd& w = grid.weights();
  if (grid.p() == 2.0) {
    const Eigen::ArrayXd s = w.array().sqrt();
    Eigen::MatrixXd c = s.matrix().asDiagonal() * k * (1.0 / s).matrix().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
    return svd.singularValues()(0);
  }
  double n1 = 0.0;
  for (int j = 0; j < k.cols(); ++j) {
    n1 = std::max(n1, (w.array() * k.col(j).array().abs()).sum() / w(j));
  }
  const double ninf = k.cwiseAbs().rowwise().sum().maxCoeff();
  const double p = grid.p();
  return std::pow(n1, 1.0 / p) * std::pow(ninf, 1.0 - 1.0 / p);
}

}  // namespace detail

/// The bounded generator 𝔸 acting on grid functions.
///
/// Scalar and diagonal generators act pointwise; a dense generator is stored
/// through its real eigendecomposition A = V Λ V⁻¹. `bound()` is the constant
/// M ≥ sup ‖T(t)‖ over [0, t_max].
class Generator {
 public:
  enum class Kind { Scalar, Diagonal, Dense };

  /// 𝔸x = λx on an n-node grid.
  static Generator scalar(double lambda, int n = 1, double t_max = 1.0) {
    Generator g(Kind::Scalar);
    g.lambda_ = Eigen::VectorXd::Constant(n, lambda);
    g.M_ = lambda <= 0.0 ? 1.0 : std::exp(lambda * t_max);
    return g;
  }

  /// (𝔸x)(τ) = -a(τ) x(τ).
  static Generator diagonal_field(const GridFunction& a, double t_max = 1.0) {
    Generator g(Kind::Diagonal);
    g.lambda_ = -a;
    const double top = g.lambda_.maxCoeff();
    g.M_ = top <= 0.0 ? 1.0 : std::exp(top * t_max);
    return g;
  }

  static Generator zero(int n) { return diagonal_field(GridFunction::Zero(n)); }

  /// Dense generator; must be diagonalizable with a real spectrum and an
  /// eigenvector matrix of condition number at most `max_cond`.
  static Generator dense(const Eigen::MatrixXd& a, const SpatialGrid& grid, double t_max = 1.0,
                         int n_samples = 32, double max_cond = 1e8) {
    if (a.rows() != a.cols() || a.rows() != grid.size()) {
      throw std::invalid_argument("Generator::dense: shape mismatch with grid");
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) {
      throw std::invalid_argument("Generator::dense: eigendecomposition failed");
    }
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if (es.eigenvalues().imag().cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw std::invalid_argument("Generator::dense: complex spectrum is not supported");
    }
    Eigen::MatrixXd v = es.eigenvectors().real();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
    const auto& sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                 : std::numeric_limits<double>::infinity();
    if (!(cond <= max_cond)) {
      throw std::invalid_argument("Generator::dense: matrix is defective or ill-conditioned");
    }
    Generator g(Kind::Dense);
    g.lambda_ = es.eigenvalues().real();
    g.V_ = v;
    g.Vinv_ = v.inverse();
    g.cond_ = cond;
    double m = 1.0;
    for (int s = 0; s <= n_samples; ++s) {
      const double t = t_max * s / n_samples;
      m = std::max(m, detail::induced_norm(g.matrix_of(g.lambda_.unaryExpr([t](double l) {
                                             return std::exp(l * t);
                                           })),
                                           grid));
    }
    g.M_ = m;
    return g;
  }

  Kind kind() const { return kind_; }
  bool is_dense() const { return kind_ == Kind::Dense; }
  int size() const { return static_cast<int>(lambda_.size()); }
  /// Spectrum (the multiplier itself for scalar/diagonal generators).
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  double bound() const { return M_; }
  double eigvec_condition() const { return cond_; }

  /// Grid values → modal coordinates.
  GridFunction to_modal(const Eigen::Ref<const GridFunction>& x) const {
    return is_dense() ? GridFunction(Vinv_ * x) : GridFunction(x);
  }
  GridSeries to_modal(const Eigen::Ref<const GridSeries>& x) const {
    return is_dense() ? GridSeries(Vinv_ * x) : GridSeries(x);
  }
  GridFunction from_modal(const Eigen::Ref<const GridFunction>& y) const {
    return is_dense() ? GridFunction(V_ * y) : GridFunction(y);
  }

  /// φ(𝔸)x for a multiplier φ(λ_i) given per mode.
  GridFunction apply_multiplier(const Eigen::VectorXd& phi,
                                const Eigen::Ref<const GridFunction>& x) const {
    if (x.size() != size()) throw std::invalid_argument("Generator: size mismatch");
    if (!is_dense()) return phi.cwiseProduct(x);
    return V_ * phi.cwiseProduct(Vinv_ * x);
  }

  /// Dense matrix of φ(𝔸) in grid coordinates.
  Eigen::MatrixXd matrix_of(const Eigen::VectorXd& phi) const {
    if (!is_dense()) return phi.asDiagonal();
    return V_ * phi.asDiagonal() * Vinv_;
  }

  /// Transpose of φ(𝔸) with respect to the weighted pairing Σ w_i x*_i x_i.
  GridFunction apply_multiplier_adjoint(const Eigen::VectorXd& phi,
                                        const Eigen::Ref<const GridFunction>& xs,
                                        const SpatialGrid& grid) const {
    if (!is_dense()) return phi.cwiseProduct(xs);
    const Eigen::VectorXd& w = grid.weights();
    Eigen::VectorXd y = Vinv_.transpose() * phi.cwiseProduct(V_.transpose() * w.cwiseProduct(xs));
    return y.cwiseQuotient(w);
  }

 private:
  explicit Generator(Kind k) : kind_(k) {}
  Kind kind_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd V_;
  Eigen::MatrixXd Vinv_;
  double M_ = 1.0;
  double cond_ = 1.0;
};

/// Per-mode multipliers of S_α(t) and T_α(t).
inline Eigen::VectorXd s_alpha_multiplier(const Generator& gen, double alpha, double t,
                                          const MittagLefflerOptions& opt = {}) {
  const double ta = std::pow(t, alpha);
  return gen.eigenvalues().unaryExpr(
      [&](double l) { return mittag_leffler(alpha, 1.0, l * ta, opt); });
}

inline Eigen::VectorXd t_alpha_multiplier(const Generator& gen, double alpha, double t,
                                          const MittagLefflerOptions& opt = {}) {
  const double ta = std::pow(t, alpha);
  return gen.eigenvalues().unaryExpr(
      [&](double l) { return mittag_leffler(alpha, alpha, l * ta, opt); });
}

/// T(t)x = e^{t𝔸}x.
inline GridFunction semigroup_apply(const Generator& gen, double t,
                                    const Eigen::Ref<const GridFunction>& x) {
  if (t < 0.0) throw std::invalid_argument("semigroup_apply: t must be >= 0");
  return gen.apply_multiplier(gen.eigenvalues().unaryExpr([t](double l) { return std::exp(l * t); }),
                              x);
}

inline GridFunction s_alpha_apply(const Generator& gen, double alpha, double t,
                                  const Eigen::Ref<const GridFunction>& x) {
  if (t < 0.0) throw std::invalid_argument("s_alpha_apply: t must be >= 0");
  return gen.apply_multiplier(s_alpha_multiplier(gen, alpha, t), x);
}

inline GridFunction t_alpha_apply(const Generator& gen, double alpha, double t,
                                  const Eigen::Ref<const GridFunction>& x) {
  if (t < 0.0) throw std::invalid_argument("t_alpha_apply: t must be >= 0");
  return gen.apply_multiplier(t_alpha_multiplier(gen, alpha, t), x);
}

struct RepresentationResidual {
  double s_residual = 0.0;
  double t_residual = 0.0;
};

/// Relative L^p discrepancy between the closed forms and the density
/// integrals of S_α(t)x and T_α(t)x, one scalar quadrature per mode.
inline RepresentationResidual verify_integral_representation(
    const Generator& gen, double alpha, double t, const Eigen::Ref<const GridFunction>& x,
    const SpatialGrid& grid, const MomentOptions& quad = {}) {
  if (gen.is_dense()) {
    throw std::invalid_argument("verify_integral_representation: scalar or diagonal only");
  }
  const double ta = std::pow(t, alpha);
  const int n = gen.size();
  Eigen::VectorXd s_int(n), t_int(n);
  for (int i = 0; i < n; ++i) {
    const double c = gen.eigenvalues()(i) * ta;
    s_int(i) = density_integral(alpha, [c](double tau) { return std::exp(c * tau); }, quad);
    t_int(i) = alpha * density_integral(
                           alpha, [c](double tau) { return tau * std::exp(c * tau); }, quad);
  }
  const GridFunction s_ref = s_alpha_apply(gen, alpha, t, x);
  const GridFunction t_ref = t_alpha_apply(gen, alpha, t, x);
  const GridFunction s_num = s_int.cwiseProduct(x);
  const GridFunction t_num = t_int.cwiseProduct(x);
  auto rel = [&](const GridFunction& a, const GridFunction& b) {
    const double d = lp_norm(a - b, grid);
    const double r = lp_norm(b, grid);
    return r > 0.0 ? d / r : d;
  };
  return {rel(s_num, s_ref), rel(t_num, t_ref)};
}

struct OperatorBounds {
  double sup_s = 0.0;
  double sup_t = 0.0;
};

/// Largest induced norms of S_α(t) and T_α(t) over the sample times.
inline OperatorBounds operator_bounds(const Generator& gen, double alpha,
                                      const std::vector<double>& t_samples,
                                      const SpatialGrid& grid) {
  if (t_samples.empty()) throw std::invalid_argument("operator_bounds: empty sample set");
  OperatorBounds b;
  for (double t : t_samples) {
    const Eigen::VectorXd s = s_alpha_multiplier(gen, alpha, t);
    const Eigen::VectorXd tt = t_alpha_multiplier(gen, alpha, t);
    if (gen.is_dense()) {
      b.sup_s = std::max(b.sup_s, detail::induced_norm(gen.matrix_of(s), grid));
      b.sup_t = std::max(b.sup_t, detail::induced_norm(gen.matrix_of(tt), grid));
    } else {
      b.sup_s = std::max(b.sup_s, s.cwiseAbs().maxCoeff());
      b.sup_t = std::max(b.sup_t, tt.cwiseAbs().maxCoeff());
    }
  }
  return b;
}

/// The control map 𝔹 : U → X, a multiplication by a fixed grid function.
class ControlMap {
 public:
  static ControlMap identity(int n) { return ControlMap(GridFunction::Ones(n)); }
  static ControlMap zero(int n) { return ControlMap(GridFunction::Zero(n)); }
  /// Indicator of the nodes lying in [lo, hi].
  static ControlMap window(const SpatialGrid& grid, double lo, double hi) {
    GridFunction m = GridFunction::Zero(grid.size());
    for (int i = 0; i < grid.size(); ++i) {
      if (grid.node(i) >= lo && grid.node(i) <= hi) m(i) = 1.0;
    }
    return ControlMap(m);
  }
  static ControlMap multiplier(const GridFunction& m) { return ControlMap(m); }

  GridFunction apply(const Eigen::Ref<const GridFunction>& u) const {
    return mult_.cwiseProduct(u);
  }
  /// Real multiplication operators are self-adjoint in the weighted pairing.
  GridFunction adjoint(const Eigen::Ref<const GridFunction>& x) const {
    return mult_.cwiseProduct(x);
  }
  GridSeries apply_series(const Eigen::Ref<const GridSeries>& u) const {
    return mult_.asDiagonal() * u;
  }
  double norm() const { return mult_.size() ? mult_.cwiseAbs().maxCoeff() : 0.0; }
  bool is_zero() const { return norm() == 0.0; }
  const GridFunction& mult() const { return mult_; }
  int size() const { return static_cast<int>(mult_.size()); }

 private:
  explicit ControlMap(GridFunction m) : mult_(std::move(m)) {}
  GridFunction mult_;
};

/// Per-mode values of S_α and T_α at every lag needed by product
/// integration on a mesh. Uniform meshes store one entry per lag index;
/// other meshes store the full lower triangle.
class FractionalFamily {
 public:
  FractionalFamily(const Generator& gen, double alpha, const TimeMesh& mesh,
                   const MittagLefflerOptions& opt = {})
      : alpha_(alpha), n_(mesh.cells()), uniform_(mesh.is_uniform()) {
    const int m = gen.size();
    s_node_.resize(m, n_ + 1);
    for (int k = 0; k <= n_; ++k) s_node_.col(k) = s_alpha_multiplier(gen, alpha, mesh.t(k), opt);
    if (uniform_) {
      const double h = mesh.nu() / n_;
      t_lag_.resize(m, n_ + 1);
      for (int d = 0; d <= n_; ++d) t_lag_.col(d) = t_alpha_multiplier(gen, alpha, d * h, opt);
    } else {
      // Column k(k+1)/2 + j holds T_α(t_k - t_j), 0 <= j <= k.
      t_lag_.resize(m, (n_ + 1) * (n_ + 2) / 2);
      for (int k = 0; k <= n_; ++k) {
        for (int j = 0; j <= k; ++j) {
          t_lag_.col(tri(k, j)) = t_alpha_multiplier(gen, alpha, mesh.t(k) - mesh.t(j), opt);
        }
      }
    }
  }

  double alpha() const { return alpha_; }
  int cells() const { return n_; }
  /// S_α(t_k) multiplier.
  auto s_at(int k) const { return s_node_.col(k); }
  /// T_α(t_k - t_j) multiplier.
  auto t_between(int k, int j) const { return t_lag_.col(uniform_ ? k - j : tri(k, j)); }

 private:
  static int tri(int k, int j) { return k * (k + 1) / 2 + j; }
  double alpha_;
  int n_;
  bool uniform_;
  Eigen::MatrixXd s_node_;
  Eigen::MatrixXd t_lag_;
};

}  // namespace fracnull
