#pragma once

#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace fracnull::detail {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

// Adaptive Gauss-Kronrod on a finite interval.
template <class F>
QuadResult integrate_gk(F&& f, double a, double b, double rel_tol = 1e-13,
                        unsigned max_depth = 18) {
  QuadResult r;
  if (a == b) return r;
  double l1 = 0.0;
  r.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, max_depth, rel_tol, &r.error, &l1);
  return r;
}

// Double-exponential rule on a finite interval; tolerates endpoint
// singularities and endpoint-clustered peaks.
template <class F>
QuadResult integrate_ts(F&& f, double a, double b, double rel_tol = 1e-13) {
  QuadResult r;
  if (a == b) return r;
  static thread_local boost::math::quadrature::tanh_sinh<double> rule(12);
  double l1 = 0.0;
  r.value = rule.integrate(f, a, b, rel_tol, &r.error, &l1);
  return r;
}

// Half-line [a, ∞).
template <class F>
QuadResult integrate_tail(F&& f, double a, double rel_tol = 1e-13) {
  QuadResult r;
  static thread_local boost::math::quadrature::exp_sinh<double> rule(12);
  double l1 = 0.0;
  auto shifted = [&](double x) { return f(a + x); };
  r.value = rule.integrate(shifted, rel_tol, &r.error, &l1);
  return r;
}

}  // namespace fracnull::detail
