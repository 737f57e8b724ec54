#pragma once

// Analytic limit of the gradient flow. With the potential anchored at w0,
// w(t) = h^{-1}(a(t)^2/2 - a0^2/2), so the limiting output weight is the unique
// zero of phi(s) = s sigma(x h^{-1}(s^2/2 - a0^2/2)) - y.

#include <cmath>
#include <string>

#include "activation.hpp"
#include "errors.hpp"
#include "gradflow.hpp"
#include "potential.hpp"
#include "roots.hpp"
#include "types.hpp"

namespace overlap {

inline double phi(Potential& pot, const Params& theta0, const Sample& s, double sval) {
  if (theta0.w.size() != 1 || s.x.size() != 1) throw PreconditionError("phi needs M = 2");
  const double v = pot.h(theta0.w[0]) + 0.5 * sval * sval - 0.5 * theta0.a * theta0.a;
  const double w = pot.inverse(v);
  return sval * pot.activation().eval(s.x[0] * w, 0) - s.y;
}

struct LimitPrediction {
  Params limit;
  double bracket_lo = 0.0;  // final bracket used for the output weight
  double bracket_hi = 0.0;
};

namespace detail {

inline void require_monotone(const Activation& act) {
  if (act.kind() == Kind::Gaussian)
    throw UnsupportedActivation("limit prediction needs sigma > 0 and sigma' > 0; gaussian fails");
}

// Scalar problem: flow of (w, a) under input x != 0.
inline LimitPrediction predict_scalar(double w0, double a0, double x, double y,
                                      const Activation& act) {
  Potential pot(act, x, w0);
  const Params theta0(w0, a0);
  const Sample s(x, y);
  auto f = [&](double sv) { return phi(pot, theta0, s, sv); };
  double lo = -std::abs(a0) - 1.0, hi = std::abs(a0) + 1.0;
  constexpr double kReach = 1e6;
  while (!(f(lo) < 0.0)) {
    lo *= 2.0;
    if (-lo > kReach)
      throw BracketFailure("phi has no sign change on [" + fmt(lo) + ", " + fmt(hi) + "]");
  }
  while (!(f(hi) > 0.0)) {
    hi *= 2.0;
    if (hi > kReach)
      throw BracketFailure("phi has no sign change on [" + fmt(lo) + ", " + fmt(hi) + "]");
  }
  const auto r = roots::bisect(f, lo, hi, 1e-12);
  const double a_star = r.root;
  const double w_star = pot.inverse(0.5 * a_star * a_star - 0.5 * a0 * a0);
  return {Params(w_star, a_star), lo, hi};
}

}  // namespace detail

/// Predicts the limit of the flow from theta0 under sample s. For M > 2 the
/// flow moves w only along x, so the problem reduces to the scalar one in the
/// coordinate x^T w / |x|. x = 0 freezes w and sends a to y / sigma(0).
inline LimitPrediction predict_limit_report(const Params& theta0, const Sample& s,
                                            const Activation& act) {
  detail::require_monotone(act);
  if (theta0.w.size() != s.x.size()) throw PreconditionError("dimension mismatch between x and w");
  const double xnorm = norm2(s.x);
  if (xnorm == 0.0) {
    const double s0 = act.eval(0.0, 0);
    if (!(s0 != 0.0)) throw UnsupportedActivation("sigma(0) = 0; a-only flow has no zero-loss limit");
    return {Params(theta0.w, s.y / s0), 0.0, 0.0};
  }
  if (s.x.size() == 1) return detail::predict_scalar(theta0.w[0], theta0.a, s.x[0], s.y, act);
  const double w_par = dot(s.x, theta0.w) / xnorm;
  auto scalar = detail::predict_scalar(w_par, theta0.a, xnorm, s.y, act);
  std::vector<double> w = theta0.w;
  const double shift = (scalar.limit.w[0] - w_par) / xnorm;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += shift * s.x[i];
  scalar.limit = Params(std::move(w), scalar.limit.a);
  return scalar;
}

inline Params predict_limit(const Params& theta0, const Sample& s, const Activation& act) {
  return predict_limit_report(theta0, s, act).limit;
}

}  // namespace overlap
