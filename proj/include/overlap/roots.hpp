#pragma once

// Bracketed scalar root finding: plain bisection and Brent's method.

#include <cmath>
#include <utility>

namespace overlap::roots {

struct RootResult {
  double root = 0.0;
  double value = 0.0;  // f(root)
  int iterations = 0;
  bool converged = false;
};

/// Bisection on [lo, hi]; f(lo) and f(hi) must differ in sign (or one be zero).
/// Stops once the bracket is narrower than x_tol, |f| <= f_tol, or the bracket
/// cannot be split any further in floating point.
template <class F>
RootResult bisect(F&& f, double lo, double hi, double x_tol, double f_tol = 0.0,
                  int max_iter = 400) {
  double f_lo = f(lo);
  double f_hi = f(hi);
  RootResult r;
  if (f_lo == 0.0) return {lo, 0.0, 0, true};
  if (f_hi == 0.0) return {hi, 0.0, 0, true};
  if (std::signbit(f_lo) == std::signbit(f_hi)) return {lo, f_lo, 0, false};
  for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;  // bracket exhausted in floating point
    const double f_mid = f(mid);
    if (f_mid == 0.0 || std::abs(f_mid) <= f_tol) return {mid, f_mid, r.iterations, true};
    if (std::signbit(f_mid) == std::signbit(f_lo)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
    if (std::abs(hi - lo) <= x_tol) break;
  }
  const bool take_lo = std::abs(f_lo) <= std::abs(f_hi);
  r.root = take_lo ? lo : hi;
  r.value = take_lo ? f_lo : f_hi;
  r.converged = std::abs(hi - lo) <= x_tol || std::abs(r.value) <= f_tol ||
                0.5 * (lo + hi) == lo || 0.5 * (lo + hi) == hi;
  return r;
}

/// Brent's method (inverse quadratic interpolation with bisection fallback).
template <class F>
RootResult brent(F&& f, double a, double b, double x_tol, double f_tol = 0.0,
                 int max_iter = 200) {
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return {a, 0.0, 0, true};
  if (fb == 0.0) return {b, 0.0, 0, true};
  if (std::signbit(fa) == std::signbit(fb)) return {a, fa, 0, false};
  double c = a, fc = fa, d = b - a, e = d;
  RootResult r;
  for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
    if (std::signbit(fb) == std::signbit(fc)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2.0 * 2.220446049250313e-16 * std::abs(b) + 0.5 * x_tol;
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0.0 || std::abs(fb) <= f_tol) {
      return {b, fb, r.iterations, true};
    }
    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        const double qa = fa / fc;
        const double rb = fb / fc;
        p = s * (2.0 * m * qa * (qa - rb) - (b - a) * (rb - 1.0));
        q = (qa - 1.0) * (rb - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      else p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol ? d : (m > 0 ? tol : -tol);
    fb = f(b);
  }
  return {b, fb, max_iter, false};
}

}  // namespace overlap::roots
