#pragma once

// Activation functions sigma, their first two derivatives, and the reciprocal
// sigma~ = 1/sigma. Builtins have closed forms; piecewise activations splice
// builtin formulas on closed intervals with Hermite blends across the gaps.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace overlap {

enum class Kind { Exp, Sigmoid, Softplus, Gaussian, Power, Piecewise };

inline std::string kind_name(Kind k) {
  switch (k) {
    case Kind::Exp: return "exp";
    case Kind::Sigmoid: return "sigmoid";
    case Kind::Softplus: return "softplus";
    case Kind::Gaussian: return "gaussian";
    case Kind::Power: return "power";
    case Kind::Piecewise: return "piecewise";
  }
  return "unknown";
}

inline Kind kind_from_name(const std::string& s) {
  if (s == "exp") return Kind::Exp;
  if (s == "sigmoid") return Kind::Sigmoid;
  if (s == "softplus") return Kind::Softplus;
  if (s == "gaussian") return Kind::Gaussian;
  if (s == "power") return Kind::Power;
  if (s == "piecewise") return Kind::Piecewise;
  throw ConfigError("unknown activation kind '" + s + "'");
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double softplus(double z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

inline void check_order(int order, int smoothness) {
  if (order < 0 || order > smoothness)
    throw SmoothnessError("derivative order " + std::to_string(order) +
                          " exceeds available smoothness " + std::to_string(smoothness));
}

inline bool builtin_in_domain(Kind k, double z) {
  if (!std::isfinite(z)) return false;
  return k != Kind::Power || z > 0.0;
}

inline void require_domain(Kind k, double z) {
  if (!builtin_in_domain(k, z))
    throw DomainError(kind_name(k) + ": argument " + fmt(z) + " outside domain");
}

inline double builtin_eval(Kind k, double q, double z, int order) {
  require_domain(k, z);
  switch (k) {
    case Kind::Exp:
      return std::exp(z);
    case Kind::Sigmoid: {
      const double s = sigmoid(z), sm = sigmoid(-z);
      if (order == 0) return s;
      if (order == 1) return s * sm;
      return s * sm * (sm - s);
    }
    case Kind::Softplus:
      if (order == 0) return softplus(z);
      if (order == 1) return sigmoid(z);
      return sigmoid(z) * sigmoid(-z);
    case Kind::Gaussian: {
      const double g = std::exp(-z * z);
      if (order == 0) return g;
      if (order == 1) return -2.0 * z * g;
      return (4.0 * z * z - 2.0) * g;
    }
    case Kind::Power:
      if (order == 0) return std::pow(z, q);
      if (order == 1) return q * std::pow(z, q - 1.0);
      return q * (q - 1.0) * std::pow(z, q - 2.0);
    case Kind::Piecewise:
      break;
  }
  throw PreconditionError("builtin_eval called with a piecewise kind");
}

// Generic reciprocal derivatives from sigma, sigma', sigma''.
inline double recip_from(double s, double d1, double d2, int order) {
  if (s == 0.0 || !std::isfinite(s)) throw DomainError("sigma vanishes; reciprocal undefined");
  if (order == 0) return 1.0 / s;
  if (order == 1) return -d1 / (s * s);
  return (2.0 * d1 * d1 - s * d2) / (s * s * s);
}

inline double builtin_recip(Kind k, double q, double z, int order) {
  require_domain(k, z);
  switch (k) {
    case Kind::Exp: {
      const double e = std::exp(-z);
      return order == 1 ? -e : e;
    }
    case Kind::Sigmoid: {
      const double e = std::exp(-z);
      if (order == 0) return 1.0 + e;
      return order == 1 ? -e : e;
    }
    case Kind::Gaussian: {
      const double g = std::exp(z * z);
      if (order == 0) return g;
      if (order == 1) return 2.0 * z * g;
      return (2.0 + 4.0 * z * z) * g;
    }
    case Kind::Power:
      if (order == 0) return std::pow(z, -q);
      if (order == 1) return -q * std::pow(z, -q - 1.0);
      return q * (q + 1.0) * std::pow(z, -q - 2.0);
    case Kind::Softplus:
      return recip_from(builtin_eval(k, q, z, 0), order >= 1 ? builtin_eval(k, q, z, 1) : 0.0,
                        order >= 2 ? builtin_eval(k, q, z, 2) : 0.0, order);
    case Kind::Piecewise:
      break;
  }
  throw PreconditionError("builtin_recip called with a piecewise kind");
}

}  // namespace detail

/// Closed interval [lo, hi]; infinite bounds allowed.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double z) const { return lo <= z && z <= hi; }
  double length() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

/// amplitude * base(scale * z + shift) for a builtin base. A zero scale gives a
/// constant piece (used for single-point segments that pin a value).
struct SegmentBase {
  Kind kind = Kind::Exp;
  double q = 1.0;
  double scale = 1.0;
  double shift = 0.0;
  double amplitude = 1.0;

  double eval(double z, int order) const {
    const double t = scale * z + shift;
    if (order >= 1 && scale == 0.0) return 0.0;
    const double k = order == 0 ? 1.0 : (order == 1 ? scale : scale * scale);
    return amplitude * k * detail::builtin_eval(kind, q, t, order);
  }
  bool operator==(const SegmentBase&) const = default;
};

struct Segment {
  Interval interval;
  SegmentBase base;
  bool operator==(const Segment&) const = default;
};

/// Single-point segment holding the constant value v with zero slope.
inline Segment pinned_knot(double z, double v) {
  return Segment{{z, z}, SegmentBase{Kind::Exp, 1.0, 0.0, 0.0, v}};
}

struct ExceptionPoint {
  double z = 0.0;
  double value = 0.0;
  bool operator==(const ExceptionPoint&) const = default;
};

enum class BlendShape {
  Monotone,  // shape-preserving; BlendError when endpoint data forbid it
  Hermite    // plain Hermite interpolation of the endpoint jets
};

/// Polynomial c0 + c1 s + ... + c5 s^5 with s = z - z0 on [z0, z1].
struct BlendPiece {
  double z0 = 0.0;
  double z1 = 0.0;
  std::array<double, 6> c{};

  double eval(double z, int order) const {
    const double s = z - z0;
    double v = 0.0;
    for (int i = 5; i >= order; --i) {
      double coef = c[i];
      for (int j = 0; j < order; ++j) coef *= static_cast<double>(i - j);
      v = v * s + coef;
    }
    return v;
  }
};

class Activation;

class PiecewiseActivation {
 public:
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<ExceptionPoint>& exceptions() const { return exceptions_; }
  const std::vector<std::vector<BlendPiece>>& blends() const { return blends_; }
  int smoothness() const { return smoothness_; }
  BlendShape shape() const { return shape_; }

  bool is_exception(double z) const {
    return std::any_of(exceptions_.begin(), exceptions_.end(),
                       [z](const ExceptionPoint& e) { return e.z == z; });
  }

  double eval(double z, int order) const {
    if (!std::isfinite(z)) throw DomainError("piecewise: non-finite argument");
    detail::check_order(order, smoothness_);
    for (const auto& e : exceptions_) {
      if (e.z == z) {
        if (order > 0)
          throw SmoothnessError("derivative requested at exception point " + detail::fmt(z));
        return e.value;
      }
    }
    // First segment whose upper end is >= z.
    auto it = std::lower_bound(segments_.begin(), segments_.end(), z,
                               [](const Segment& s, double v) { return s.interval.hi < v; });
    if (it == segments_.end()) return segments_.back().base.eval(z, order);
    if (z >= it->interval.lo || it == segments_.begin()) return it->base.eval(z, order);
    const auto gap = static_cast<std::size_t>(it - segments_.begin()) - 1;
    const auto& pieces = blends_[gap];
    for (const auto& p : pieces)
      if (z <= p.z1) return p.eval(z, order);
    return pieces.back().eval(z, order);
  }

  friend Activation make_piecewise(std::vector<Segment>, std::vector<ExceptionPoint>, int,
                                   BlendShape);

 private:
  std::vector<Segment> segments_;
  std::vector<ExceptionPoint> exceptions_;
  std::vector<std::vector<BlendPiece>> blends_;
  int smoothness_ = 1;
  BlendShape shape_ = BlendShape::Monotone;
};

class Activation {
 public:
  static Activation exp() { return Activation(Kind::Exp); }
  static Activation sigmoid() { return Activation(Kind::Sigmoid); }
  static Activation softplus() { return Activation(Kind::Softplus); }
  static Activation gaussian() { return Activation(Kind::Gaussian); }
  static Activation power(double q) {
    if (!(q > 0.0) || !std::isfinite(q)) throw DomainError("power exponent must be positive");
    Activation a(Kind::Power);
    a.q_ = q;
    return a;
  }
  static Activation builtin(Kind k, double q = 1.0) {
    switch (k) {
      case Kind::Exp: return exp();
      case Kind::Sigmoid: return sigmoid();
      case Kind::Softplus: return softplus();
      case Kind::Gaussian: return gaussian();
      case Kind::Power: return power(q);
      case Kind::Piecewise: break;
    }
    throw ConfigError("piecewise activation needs a segment table");
  }

  Kind kind() const { return kind_; }
  double q() const { return q_; }
  bool is_builtin() const { return kind_ != Kind::Piecewise; }
  const PiecewiseActivation* piecewise() const { return pw_.get(); }
  int smoothness() const { return pw_ ? pw_->smoothness() : 2; }

  std::string name() const {
    if (kind_ == Kind::Power) return "power(q=" + detail::fmt(q_) + ")";
    return kind_name(kind_);
  }

  /// Domain on which sigma > 0 is guaranteed for builtins; piecewise: all reals.
  Interval domain() const {
    const double inf = std::numeric_limits<double>::infinity();
    if (kind_ == Kind::Power) return {0.0, inf};  // open at 0
    return {-inf, inf};
  }
  bool in_domain(double z) const {
    if (pw_) return std::isfinite(z);
    return detail::builtin_in_domain(kind_, z);
  }

  /// True for builtins known to satisfy sigma > 0 and sigma' > 0 on the domain.
  bool positive_increasing() const {
    return kind_ == Kind::Exp || kind_ == Kind::Sigmoid || kind_ == Kind::Softplus ||
           kind_ == Kind::Power;
  }

  double eval(double z, int order = 0) const {
    detail::check_order(order, smoothness());
    if (pw_) return pw_->eval(z, order);
    return detail::builtin_eval(kind_, q_, z, order);
  }

  double recip(double z, int order = 0) const {
    detail::check_order(order, smoothness());
    if (pw_) {
      const double s = pw_->eval(z, 0);
      if (order == 0) return detail::recip_from(s, 0.0, 0.0, 0);
      return detail::recip_from(s, pw_->eval(z, 1), order >= 2 ? pw_->eval(z, 2) : 0.0, order);
    }
    return detail::builtin_recip(kind_, q_, z, order);
  }

  friend Activation make_piecewise(std::vector<Segment>, std::vector<ExceptionPoint>, int,
                                   BlendShape);

 private:
  explicit Activation(Kind k) : kind_(k) {}
  Kind kind_;
  double q_ = 1.0;
  std::shared_ptr<const PiecewiseActivation> pw_;
};

inline double eval(const Activation& act, double z, int order = 0) { return act.eval(z, order); }
inline double recip(const Activation& act, double z, int order = 0) {
  return act.recip(z, order);
}

namespace detail {

inline BlendPiece cubic_hermite(double z0, double z1, double v0, double d0, double v1,
                                double d1) {
  const double h = z1 - z0;
  const double slope = (v1 - v0) / h;
  BlendPiece p{z0, z1, {}};
  p.c[0] = v0;
  p.c[1] = d0;
  p.c[2] = (3.0 * slope - 2.0 * d0 - d1) / h;
  p.c[3] = (d0 + d1 - 2.0 * slope) / (h * h);
  return p;
}

inline BlendPiece quintic_hermite(double z0, double z1, const std::array<double, 3>& left,
                                  const std::array<double, 3>& right) {
  const double h = z1 - z0;
  BlendPiece p{z0, z1, {}};
  p.c[0] = left[0];
  p.c[1] = left[1];
  p.c[2] = left[2] / 2.0;
  const double r0 = right[0] - (p.c[0] + p.c[1] * h + p.c[2] * h * h);
  const double r1 = right[1] - (p.c[1] + 2.0 * p.c[2] * h);
  const double r2 = right[2] - 2.0 * p.c[2];
  const double h2 = h * h, h3 = h2 * h;
  p.c[3] = (10.0 * r0 - 4.0 * r1 * h + 0.5 * r2 * h2) / h3;
  p.c[4] = (-15.0 * r0 + 7.0 * r1 * h - r2 * h2) / (h3 * h);
  p.c[5] = (6.0 * r0 - 3.0 * r1 * h + 0.5 * r2 * h2) / (h3 * h2);
  return p;
}

// Monotone C^1 bridge between (z0, v0, d0) and (z1, v1, d1). A single cubic when
// the Fritsch-Carlson condition holds; otherwise cubic / linear / cubic, where the
// short end pieces absorb steep endpoint slopes.
inline std::vector<BlendPiece> monotone_cubic(double z0, double z1, double v0, double d0,
                                              double v1, double d1) {
  const double delta = v1 - v0;
  const auto where = "[" + fmt(z0) + ", " + fmt(z1) + "]";
  if (delta == 0.0) {
    if (d0 != 0.0 || d1 != 0.0)
      throw BlendError("monotone blend impossible on " + where +
                       ": equal end values with nonzero slopes");
    return {cubic_hermite(z0, z1, v0, 0.0, v1, 0.0)};
  }
  const double sgn = delta > 0 ? 1.0 : -1.0;
  const double g0 = sgn * d0, g1 = sgn * d1, gd = sgn * delta;
  if (g0 < 0.0 || g1 < 0.0)
    throw BlendError("monotone blend impossible on " + where +
                     ": endpoint slopes disagree with the direction of the value change");
  const double h = z1 - z0;
  const double alpha = g0 * h / gd, beta = g1 * h / gd;
  if (alpha * alpha + beta * beta <= 9.0) return {cubic_hermite(z0, z1, v0, d0, v1, d1)};
  const double eps = std::min(h / 4.0, gd / (g0 + g1));
  const double m = (gd - eps * (g0 + g1) / 2.0) / (h - eps);
  const double vp = eps * (g0 + m) / 2.0;       // relative to v0, increasing frame
  const double vq = gd - eps * (g1 + m) / 2.0;  // relative to v0
  const double zp = z0 + eps, zq = z1 - eps;
  std::vector<BlendPiece> out;
  out.push_back(cubic_hermite(z0, zp, v0, d0, v0 + sgn * vp, sgn * m));
  BlendPiece mid{zp, zq, {}};
  mid.c[0] = v0 + sgn * vp;
  mid.c[1] = sgn * m;
  out.push_back(mid);
  out.push_back(cubic_hermite(zq, z1, v0 + sgn * vq, sgn * m, v1, d1));
  return out;
}

}  // namespace detail

/// Builds a piecewise activation from sorted, pairwise disjoint closed segments.
/// Gaps between consecutive segments are bridged by a linear (smoothness 0),
/// cubic Hermite (1) or quintic Hermite (2) blend; outside the outermost
/// segments the outermost formulas are extended. Exceptions redefine single
/// points beyond the outermost segments.
inline Activation make_piecewise(std::vector<Segment> segments,
                                 std::vector<ExceptionPoint> exceptions, int smoothness,
                                 BlendShape shape = BlendShape::Monotone) {
  if (segments.empty()) throw PreconditionError("piecewise activation needs a segment");
  if (smoothness < 0 || smoothness > 2)
    throw SmoothnessError("piecewise smoothness must be 0, 1 or 2");
  for (const auto& s : segments) {
    if (std::isnan(s.interval.lo) || std::isnan(s.interval.hi) || s.interval.lo > s.interval.hi)
      throw OverlapError("segment interval [" + detail::fmt(s.interval.lo) + ", " +
                         detail::fmt(s.interval.hi) + "] is not a closed interval");
  }
  std::sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) {
    return a.interval.lo < b.interval.lo;
  });
  for (std::size_t i = 1; i < segments.size(); ++i) {
    if (segments[i].interval.lo <= segments[i - 1].interval.hi)
      throw OverlapError("segments [" + detail::fmt(segments[i - 1].interval.lo) + ", " +
                         detail::fmt(segments[i - 1].interval.hi) + "] and [" +
                         detail::fmt(segments[i].interval.lo) + ", " +
                         detail::fmt(segments[i].interval.hi) +
                         "] intersect or leave no gap to blend");
  }
  const double lo = segments.front().interval.lo, hi = segments.back().interval.hi;
  for (const auto& e : exceptions) {
    if (!std::isfinite(e.z) || (e.z >= lo && e.z <= hi))
      throw OverlapError("exception point " + detail::fmt(e.z) +
                         " lies inside the segment/blend hull");
  }

  auto pw = std::make_shared<PiecewiseActivation>();
  pw->smoothness_ = smoothness;
  pw->shape_ = shape;
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    const double z0 = segments[i].interval.hi, z1 = segments[i + 1].interval.lo;
    const auto& b0 = segments[i].base;
    const auto& b1 = segments[i + 1].base;
    const double v0 = b0.eval(z0, 0), v1 = b1.eval(z1, 0);
    std::vector<BlendPiece> pieces;
    if (smoothness == 0) {
      BlendPiece p{z0, z1, {}};
      p.c[0] = v0;
      p.c[1] = (v1 - v0) / (z1 - z0);
      pieces.push_back(p);
    } else if (smoothness == 1) {
      const double d0 = b0.eval(z0, 1), d1 = b1.eval(z1, 1);
      if (shape == BlendShape::Monotone)
        pieces = detail::monotone_cubic(z0, z1, v0, d0, v1, d1);
      else
        pieces.push_back(detail::cubic_hermite(z0, z1, v0, d0, v1, d1));
    } else {
      const std::array<double, 3> left{v0, b0.eval(z0, 1), b0.eval(z0, 2)};
      const std::array<double, 3> right{v1, b1.eval(z1, 1), b1.eval(z1, 2)};
      auto p = detail::quintic_hermite(z0, z1, left, right);
      if (shape == BlendShape::Monotone) {
        const double dir = v1 - v0;
        bool ok = true;
        for (int k = 0; k <= 256 && ok; ++k) {
          const double d = p.eval(z0 + (z1 - z0) * k / 256.0, 1);
          if (dir > 0 ? d < 0 : (dir < 0 ? d > 0 : d != 0)) ok = false;
        }
        if (!ok)
          throw BlendError("monotone quintic blend impossible on [" + detail::fmt(z0) + ", " +
                           detail::fmt(z1) + "] with the given endpoint jets");
      }
      pieces.push_back(p);
    }
    pw->blends_.push_back(std::move(pieces));
  }
  pw->segments_ = std::move(segments);
  pw->exceptions_ = std::move(exceptions);
  Activation act(Kind::Piecewise);
  act.pw_ = std::move(pw);
  return act;
}

struct DerivativeMismatch {
  double z = 0.0;
  int order = 0;
  double rel_err = 0.0;
};

struct DerivativeReport {
  double max_rel_err_order1 = 0.0;
  double max_rel_err_order2 = 0.0;
  std::vector<DerivativeMismatch> failures;  // points above the tolerance
  double max_rel_err() const { return std::max(max_rel_err_order1, max_rel_err_order2); }
};

/// Compares analytic derivatives against central differences with step h. The
/// order-2 check differences the analytic first derivative. Relative errors are
/// taken against max(|analytic|, |differenced function|) so that zeros of the
/// derivative do not blow up the ratio.
inline DerivativeReport check_derivatives(const Activation& act, const std::vector<double>& grid,
                                          double h, double tol = 1e-6) {
  DerivativeReport r;
  const int top = std::min(2, act.smoothness());
  for (double z : grid) {
    for (int order = 1; order <= top; ++order) {
      const double analytic = act.eval(z, order);
      const double fd = (act.eval(z + h, order - 1) - act.eval(z - h, order - 1)) / (2.0 * h);
      const double denom = std::max({std::abs(analytic), std::abs(act.eval(z, order - 1)),
                                     std::numeric_limits<double>::min()});
      const double err = std::abs(fd - analytic) / denom;
      double& slot = order == 1 ? r.max_rel_err_order1 : r.max_rel_err_order2;
      slot = std::max(slot, err);
      if (!(err <= tol)) r.failures.push_back({z, order, err});
    }
  }
  return r;
}

}  // namespace overlap
