#pragma once

// The potential h with h'(w) = sigma(xw) / (x sigma'(xw)). Along the flow,
// a^2/2 - h(w) is conserved, so h turns limit prediction into a scalar problem.

#include <cmath>
#include <iterator>
#include <map>
#include <string>

#include "activation.hpp"
#include "errors.hpp"
#include "quadrature.hpp"
#include "roots.hpp"

namespace overlap {

/// sigma(z) / sigma'(z), in closed form where cancellation or overflow would
/// otherwise spoil the plain ratio. Throws UnsupportedActivation where sigma or
/// sigma' is not positive.
inline double sigma_over_dsigma(const Activation& act, double z) {
  switch (act.kind()) {
    case Kind::Exp:
      return 1.0;
    case Kind::Sigmoid:
      return 1.0 + std::exp(z);
    case Kind::Softplus:
      return detail::softplus(z) / detail::sigmoid(z);
    case Kind::Power:
      if (!(z > 0)) throw DomainError("power: argument " + detail::fmt(z) + " outside domain");
      return z / act.q();
    case Kind::Gaussian:
      throw UnsupportedActivation("gaussian is not increasing; no monotone potential exists");
    case Kind::Piecewise:
      break;
  }
  const double s = act.eval(z, 0);
  const double d = act.eval(z, 1);
  if (!(s > 0.0) || !(d > 0.0))
    throw UnsupportedActivation("potential needs sigma > 0 and sigma' > 0; violated at z = " +
                                detail::fmt(z));
  return s / d;
}

class Potential {
 public:
  /// Potential anchored at h(w_ref) = 0 for the scalar input x != 0.
  Potential(Activation act, double x, double w_ref)
      : act_(std::move(act)), x_(x), w_ref_(w_ref) {
    if (x == 0.0 || !std::isfinite(x)) throw PreconditionError("potential needs x != 0");
    if (act_.kind() == Kind::Gaussian)
      throw UnsupportedActivation("gaussian is not increasing; no monotone potential exists");
    if (act_.smoothness() < 1) throw SmoothnessError("potential needs sigma'");
    node_spacing_ = 0.5 / std::max(1.0, std::abs(x));
    nodes_.emplace(w_ref, 0.0);
  }

  const Activation& activation() const { return act_; }
  double x() const { return x_; }
  double w_ref() const { return w_ref_; }
  const std::map<double, double>& table() const { return nodes_; }

  double integrand(double u) const { return sigma_over_dsigma(act_, x_ * u) / x_; }

  /// Integral of the integrand from w_ref to w.
  double h(double w) {
    if (!std::isfinite(w)) throw RangeError("potential evaluated at non-finite w");
    auto it = nodes_.lower_bound(w);
    if (it != nodes_.end() && it->first == w) return it->second;
    // Nearest cached node.
    auto best = it;
    if (it == nodes_.end() || (it != nodes_.begin() && w - std::prev(it)->first < it->first - w))
      best = std::prev(it);
    double start = best->first, value = best->second;
    // March in node-sized strides so that the table stays dense enough for reuse.
    while (std::abs(w - start) > node_spacing_) {
      const double next = start + (w > start ? node_spacing_ : -node_spacing_);
      value += piece(start, next);
      start = next;
      nodes_.emplace(start, value);
    }
    return value + piece(start, w);
  }

  /// Solves h(w) = v by expanding a bracket around w_ref and refining with Brent.
  double inverse(double v) {
    if (!std::isfinite(v)) throw RangeError("potential inverse of non-finite value");
    if (v == 0.0) return w_ref_;
    // h is increasing for x > 0 and decreasing for x < 0.
    const double dir = (v > 0) == (x_ > 0) ? 1.0 : -1.0;
    double inner = w_ref_, step = node_spacing_;
    double outer = w_ref_ + dir * step;
    auto g = [&](double w) { return h(w) - v; };
    double g_outer = g(outer);
    while ((v > 0) ? g_outer < 0 : g_outer > 0) {
      inner = outer;
      step *= 2.0;
      outer = w_ref_ + dir * step;
      if (step > kMaxReach)
        throw RangeError("potential inverse: value " + detail::fmt(v) +
                         " not reached within |w - w_ref| <= " + detail::fmt(kMaxReach));
      g_outer = g(outer);
    }
    const double lo = std::min(inner, outer), hi = std::max(inner, outer);
    const auto r = roots::brent(g, lo, hi, 1e-15 * std::max(1.0, std::abs(hi)), 1e-13);
    return r.root;
  }

 private:
  static constexpr double kMaxReach = 1e7;

  double piece(double lo, double hi) const {
    if (lo == hi) return 0.0;
    auto res = quad::integrate([this](double u) { return integrand(u); }, lo, hi, 1e-14, 1e-14);
    if (!std::isfinite(res.value))
      throw RangeError("potential overflow between w = " + detail::fmt(lo) + " and " +
                       detail::fmt(hi));
    return res.value;
  }

  Activation act_;
  double x_;
  double w_ref_;
  double node_spacing_;
  std::map<double, double> nodes_;
};

}  // namespace overlap
