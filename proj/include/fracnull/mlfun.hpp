#pragma once

// Scalar special functions behind the fractional operator families:
// the two-parameter Mittag-Leffler function, the Wright-type series w̄_α and
// the probability density ξ_α on (0, ∞).

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "fracnull/detail/quadrature.hpp"
#include "fracnull/errors.hpp"

namespace fracnull {

/// Order parameters shared by the whole problem: 1/p < alpha < 1,
/// 0 < alpha1 < alpha, and the conjugate exponent p_conj.
struct FracOrder {
  double alpha = 0.75;
  double p = 2.0;
  double alpha1 = 0.375;
  double p_conj = 2.0;

  static FracOrder make(double alpha, double p,
                        std::optional<double> alpha1 = std::nullopt) {
    if (!(p > 1.0) || !std::isfinite(p)) {
      throw std::invalid_argument("FracOrder: p must lie in (1, inf)");
    }
    if (!(alpha > 1.0 / p && alpha < 1.0)) {
      std::ostringstream os;
      os << "FracOrder: need 1/p < alpha < 1, got alpha=" << alpha
         << ", p=" << p;
      throw std::invalid_argument(os.str());
    }
    const double a1 = alpha1.value_or(0.5 * alpha);
    if (!(a1 > 0.0 && a1 < alpha)) {
      throw std::invalid_argument("FracOrder: need 0 < alpha1 < alpha");
    }
    return FracOrder{alpha, p, a1, p / (p - 1.0)};
  }
};

inline double gamma_fn(double x) { return std::tgamma(x); }

struct MittagLefflerOptions {
  // Taylor series is tried only for |z| <= z_switch.
  double z_switch = 5.0;
  // Largest tolerated Σ|term| / |Σ term| before the series is abandoned.
  double max_condition = 1e3;
  int max_terms = 4000;
  double rel_tol = 1e-14;
  double quad_tol = 1e-13;
};

namespace detail {

inline double ml_term_magnitude(double alpha, double beta, int k, double log_abs_z,
                                double abs_z) {
  const double arg = alpha * k + beta;
  const double log_pow = k * log_abs_z;
  if (arg < 170.0 && log_pow < 600.0) {
    return std::pow(abs_z, k) / std::tgamma(arg);
  }
  return std::exp(log_pow - std::lgamma(arg));
}

struct SeriesSum {
  double value = 0.0;
  double abs_sum = 0.0;
  double last_term = 0.0;
  int terms = 0;
  bool converged = false;
};

// Kahan-summed Taylor series Σ z^k / Γ(αk+β).
inline SeriesSum ml_taylor(double alpha, double beta, double z,
                           const MittagLefflerOptions& opt) {
  SeriesSum s;
  if (z == 0.0) {
    s.value = 1.0 / std::tgamma(beta);
    s.abs_sum = std::abs(s.value);
    s.converged = true;
    s.terms = 1;
    return s;
  }
  const double az = std::abs(z);
  const double laz = std::log(az);
  double sum = 0.0;
  double comp = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < opt.max_terms; ++k) {
    double mag = ml_term_magnitude(alpha, beta, k, laz, az);
    const double term = (z < 0.0 && (k % 2 == 1)) ? -mag : mag;
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    s.abs_sum += mag;
    s.last_term = mag;
    s.terms = k + 1;
    if (k > 2 && mag < prev && mag <= opt.rel_tol * std::abs(sum)) {
      s.converged = true;
      break;
    }
    if (k > 2 && mag == 0.0) {
      s.converged = true;
      break;
    }
    prev = mag;
  }
  s.value = sum;
  return s;
}

// Real-line collapse of the inverse-Laplace contour, valid for 0 < α < 1,
// 0 < β < 1 + α, z real and nonzero; used here with β <= 1.
inline double ml_integral(double alpha, double beta, double z,
                          const MittagLefflerOptions& opt) {
  const double pi = std::numbers::pi;
  const double s1 = std::sin(pi * (1.0 - beta));
  const double s2 = std::sin(pi * (1.0 - beta + alpha));
  const double c = std::cos(pi * alpha);
  const double e = (1.0 - beta) / alpha;
  auto kernel = [&](double x) -> double {
    if (x <= 0.0) return 0.0;
    const double ex = std::exp(-std::pow(x, 1.0 / alpha));
    if (ex == 0.0) return 0.0;
    const double num = x * s1 - z * s2;
    const double den = x * x - 2.0 * x * z * c + z * z;
    return std::pow(x, e) * ex * num / (alpha * pi * den);
  };
  const double split = std::abs(z);
  auto head = integrate_ts(kernel, 0.0, split, opt.quad_tol);
  auto tail = integrate_tail(kernel, split, opt.quad_tol);
  double value = head.value + tail.value;
  const double err = head.error + tail.error;
  if (z > 0.0) {
    const double expo = std::pow(z, 1.0 / alpha);
    if (expo > 709.0) {
      throw AccuracyError("mittag_leffler: result overflows double", expo);
    }
    value += std::pow(z, e) * std::exp(expo) / alpha;
  }
  if (!std::isfinite(value) || err > 1e-9 * std::max(std::abs(value), 1e-300)) {
    throw AccuracyError("mittag_leffler: contour quadrature did not converge",
                        err);
  }
  return value;
}

}  // namespace detail

/// E_{α,β}(z) = Σ_k z^k / Γ(αk+β) for real z.
///
/// Small arguments use a Kahan-summed Taylor series; when |z| exceeds
/// `z_switch` or the series loses more than log10(max_condition) digits to
/// cancellation, the integral representation is used instead (0 < α < 1).
/// Throws AccuracyError rather than returning an unreliable value.
inline double mittag_leffler(double alpha, double beta, double z,
                             const MittagLefflerOptions& opt = {}) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("mittag_leffler: need alpha > 0, beta > 0");
  }
  if (alpha == 1.0 && beta == 1.0) return std::exp(z);
  if (z == 0.0) return 1.0 / std::tgamma(beta);

  if (std::abs(z) <= opt.z_switch) {
    auto s = detail::ml_taylor(alpha, beta, z, opt);
    if (s.converged && std::isfinite(s.value) &&
        s.abs_sum <= opt.max_condition * std::abs(s.value)) {
      return s.value;
    }
  }
  if (alpha < 1.0) {
    // The integral's weight x^{(1-β)/α} is nearly non-integrable as β → 1+α,
    // so β is first reduced into (0, 1] with
    // E_{α,β}(z) = (E_{α,β-α}(z) - 1/Γ(β-α)) / z.
    if (beta <= 1.0) return detail::ml_integral(alpha, beta, z, opt);
    return (mittag_leffler(alpha, beta - alpha, z, opt) -
            1.0 / std::tgamma(beta - alpha)) /
           z;
  }
  auto s = detail::ml_taylor(alpha, beta, z, opt);
  if (!s.converged || !std::isfinite(s.value)) {
    throw AccuracyError("mittag_leffler: series did not converge",
                        s.last_term);
  }
  if (s.abs_sum > 1e4 * std::abs(s.value)) {
    throw AccuracyError("mittag_leffler: series cancellation too severe",
                        s.abs_sum);
  }
  return s.value;
}

/// Mittag-Leffler evaluator bound to one (α, β) pair.
class MittagLeffler {
 public:
  MittagLeffler(double alpha, double beta, MittagLefflerOptions opt = {})
      : alpha_(alpha), beta_(beta), opt_(opt) {}
  double operator()(double z) const { return mittag_leffler(alpha_, beta_, z, opt_); }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  double alpha_;
  double beta_;
  MittagLefflerOptions opt_;
};

struct SeriesResult {
  double value = 0.0;
  // Magnitude bound of the first omitted term.
  double bound = 0.0;
  int terms = 0;
  // Σ|term| / |value|.
  double condition = 1.0;
};

struct WrightOptions {
  double rel_tol = 1e-14;
  int max_terms = 2000;
  double max_condition = 1e3;
};

/// w̄_α(y) = (1/π) Σ_{n≥1} (-1)^{n-1} y^{-nα-1} Γ(nα+1)/n! sin(nπα).
///
/// Stops when the magnitude bound of the next term falls below
/// rel_tol·|sum|. Throws AccuracyError when the term cap is reached or the
/// partial sums cancel by more than max_condition.
inline SeriesResult wright_series_detail(double alpha, double y,
                                         const WrightOptions& opt = {}) {
  if (!(y > 0.0) || !(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("wright_series: need y > 0, 0 < alpha < 1");
  }
  const double pi = std::numbers::pi;
  const double ly = std::log(y);
  SeriesResult r;
  double sum = 0.0;
  double comp = 0.0;
  double abs_sum = 0.0;
  double prev_bound = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= opt.max_terms; ++n) {
    const double log_mag = -(n * alpha + 1.0) * ly + std::lgamma(n * alpha + 1.0) -
                           std::lgamma(n + 1.0);
    const double mag = std::exp(log_mag) / pi;
    const double sgn = (n % 2 == 1) ? 1.0 : -1.0;
    const double term = sgn * mag * std::sin(n * pi * alpha);
    const double yk = term - comp;
    const double t = sum + yk;
    comp = (t - sum) - yk;
    sum = t;
    abs_sum += std::abs(term);
    r.terms = n;
    r.bound = mag;
    if (n > 1 && mag < prev_bound && mag <= opt.rel_tol * std::abs(sum)) {
      r.value = sum;
      r.condition = abs_sum / std::max(std::abs(sum), 1e-300);
      if (r.condition > opt.max_condition) {
        throw AccuracyError("wright_series: cancellation exceeds limit",
                            r.condition);
      }
      return r;
    }
    prev_bound = mag;
  }
  throw AccuracyError("wright_series: term cap reached before tolerance", r.bound);
}

inline double wright_series(double alpha, double y, const WrightOptions& opt = {}) {
  return wright_series_detail(alpha, y, opt).value;
}

struct DensityOptions {
  // The series route is used only when the w̄_α argument τ^{-1/α} is at least
  // this value and the partial sums are well conditioned.
  double series_arg_min = 0.05;
  double max_condition = 1e3;
  double quad_tol = 1e-11;
};

namespace detail {

// ξ_α(τ) written as a power series in τ (identical to routing the stable density w̄_α
// through y = τ^{-1/α}, without forming y).
inline SeriesResult mainardi_series(double alpha, double tau, int max_terms = 2000,
                                    double rel_tol = 1e-15) {
  const double pi = std::numbers::pi;
  SeriesResult r;
  double sum = 0.0;
  double comp = 0.0;
  double abs_sum = 0.0;
  const double lt = tau > 0.0 ? std::log(tau) : 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= max_terms; ++n) {
    double mag;
    if (tau == 0.0) {
      mag = (n == 1) ? std::tgamma(alpha + 1.0) : 0.0;
    } else {
      mag = std::exp((n - 1) * lt + std::lgamma(n * alpha + 1.0) - std::lgamma(n + 1.0));
    }
    mag /= alpha * pi;
    const double sgn = (n % 2 == 1) ? 1.0 : -1.0;
    const double term = sgn * mag * std::sin(n * pi * alpha);
    const double yk = term - comp;
    const double t = sum + yk;
    comp = (t - sum) - yk;
    sum = t;
    abs_sum += std::abs(term);
    r.terms = n;
    r.bound = mag;
    if ((n > 1 && mag < prev && mag <= rel_tol * std::abs(sum)) || mag == 0.0) {
      r.value = sum;
      r.condition = abs_sum / std::max(std::abs(sum), 1e-300);
      return r;
    }
    prev = mag;
  }
  throw AccuracyError("mainardi_density: series term cap reached", r.bound);
}

// Zolotarev representation of ξ_α:
//   ξ_α(τ) = τ^{α/(1-α)} / ((1-α)π) ∫_0^π A(φ) exp(-τ^{1/(1-α)} A(φ)) dφ,
//   A(φ) = (sin αφ / sin φ)^{1/(1-α)} sin((1-α)φ) / sin αφ.
inline double mainardi_integral(double alpha, double tau, double tol) {
  const double pi = std::numbers::pi;
  const double inv = 1.0 / (1.0 - alpha);
  const double c = std::pow(tau, inv);
  const double log_pref = alpha * inv * std::log(tau) - std::log((1.0 - alpha) * pi);
  // A is increasing on (0, π) with A(0+) = (1-α)α^{α/(1-α)}; factoring out
  // exp(-c·A(0+)) keeps the integrand O(1) deep in the tail.
  const double a0 = (1.0 - alpha) * std::pow(alpha, alpha * inv);
  const double log_a0 = std::log(a0);
  // Below the smallest subnormal double once exp(-c·A(0+)) underflows.
  if (log_pref - c * a0 < -760.0) return 0.0;
  auto integrand = [&](double phi) -> double {
    if (phi <= 0.0 || phi >= pi) return 0.0;
    const double sa = std::sin(alpha * phi);
    const double s = std::sin(phi);
    const double sb = std::sin((1.0 - alpha) * phi);
    const double log_a = inv * (std::log(sa) - std::log(s)) + std::log(sb) - std::log(sa);
    if (log_a > 700.0) return 0.0;
    const double expo = log_a - c * a0 * std::expm1(log_a - log_a0);
    if (expo < -745.0) return 0.0;
    return std::exp(expo);
  };
  // The integrand concentrates near φ = 0 when c is large.
  double total = 0.0;
  double err = 0.0;
  double lo = 0.0;
  if (c > 1.0) {
    const double w = std::min(pi, 8.0 / std::sqrt(c));
    auto h = integrate_ts(integrand, 0.0, w, tol);
    total += h.value;
    err += h.error;
    lo = w;
  }
  if (lo < pi) {
    auto t = integrate_gk(integrand, lo, pi, tol);
    total += t.value;
    err += t.error;
  }
  if (!std::isfinite(total) || !(total > 0.0) || err > 1e-8 * total) {
    throw AccuracyError("mainardi_density: quadrature did not converge", err);
  }
  return total * std::exp(log_pref - c * a0);
}

}  // namespace detail

/// ξ_α(τ) = (1/α) τ^{-1-1/α} w̄_α(τ^{-1/α}), the probability density whose
/// Laplace-type mixtures of T(t) give S_α and T_α.
inline double mainardi_density(double alpha, double tau, const DensityOptions& opt = {}) {
  if (!(tau >= 0.0) || !(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("mainardi_density: need tau >= 0, 0 < alpha < 1");
  }
  const bool large_arg = tau == 0.0 || std::log(tau) * (-1.0 / alpha) >=
                                           std::log(opt.series_arg_min);
  if (large_arg) {
    try {
      auto s = detail::mainardi_series(alpha, tau, 400);
      if (s.condition <= opt.max_condition) return std::max(s.value, 0.0);
    } catch (const AccuracyError&) {
      // Slowly decaying terms for α near 1; the integral route is reliable.
    }
  }
  return detail::mainardi_integral(alpha, tau, opt.quad_tol);
}

struct MomentOptions {
  double rel_tol = 1e-12;
  double split = 1.0;
  // Integrand magnitude below which the domain is cut.
  double cut_level = 1e-18;
  double max_cut = 1e4;
  double tail_tol = 1e-10;
};

/// ∫_0^∞ g(τ) ξ_α(τ) dτ on (0, split] ∪ (split, T_cut] plus a tail
/// estimate; T_cut doubles until |g ξ_α|·T_cut drops below cut_level.
template <class G>
double density_integral(double alpha, G&& g, const MomentOptions& opt = {}) {
  auto f = [&](double t) { return g(t) * mainardi_density(alpha, t); };
  double cut = std::max(2.0 * opt.split, 4.0);
  while (std::abs(f(cut)) * cut > opt.cut_level) {
    cut *= 2.0;
    if (cut > opt.max_cut) {
      throw AccuracyError("density_integral: integrand does not decay", f(cut));
    }
  }
  auto a = detail::integrate_gk(f, 0.0, opt.split, opt.rel_tol);
  auto b = detail::integrate_gk(f, opt.split, cut, opt.rel_tol);
  auto tail = detail::integrate_tail(f, cut, 1e-8);
  const double scale = std::max(std::abs(a.value + b.value), 1.0);
  if (!std::isfinite(tail.value) || std::abs(tail.value) > opt.tail_tol * scale) {
    throw AccuracyError("density_integral: tail bound failure", tail.value);
  }
  return a.value + b.value + tail.value;
}

/// ∫_0^∞ τ^k ξ_α(τ) dτ.
inline double density_moment(double alpha, int k, const MomentOptions& opt = {}) {
  if (k < 0) throw std::invalid_argument("density_moment: k must be >= 0");
  return density_integral(alpha, [k](double t) { return std::pow(t, k); }, opt);
}

}  // namespace fracnull
