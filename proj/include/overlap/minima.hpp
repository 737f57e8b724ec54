#pragma once

// Global-minima curves a = y sigma~(x w), their intersections, and the overlap
// determinant F(p, x) = sigma~(xw) sigma~(x0 p) - sigma~(xp) sigma~(x0 w).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "activation.hpp"
#include "errors.hpp"
#include "gradflow.hpp"
#include "roots.hpp"
#include "types.hpp"

namespace overlap {

struct MinimaCurve {
  Sample sample;
  std::vector<double> w_grid;
  std::vector<double> a_values;
  std::vector<bool> is_pole;
  std::vector<double> poles;
  bool horizontal = false;  // x = 0: the set is the line a = y / sigma(0)
};

namespace detail {

inline bool is_pole_at(const Activation& act, double z) {
  if (!act.in_domain(z)) return true;
  return !(std::abs(act.eval(z, 0)) >= 1e-12);
}

}  // namespace detail

/// Samples the minima curve on an n-point uniform grid over [w_lo, w_hi].
/// Points with sigma(xw) < 1e-12 (or outside the domain) are poles.
inline MinimaCurve minima_curve(const Sample& s, const Activation& act, double w_lo, double w_hi,
                                int n) {
  if (s.x.size() != 1) throw PreconditionError("minima curve needs M = 2");
  if (n < 2) throw PreconditionError("minima curve needs n >= 2");
  if (!(w_lo < w_hi)) throw PreconditionError("minima curve needs w_lo < w_hi");
  MinimaCurve c;
  c.sample = s;
  c.horizontal = s.x[0] == 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = i == n - 1 ? w_hi : w_lo + (w_hi - w_lo) * i / (n - 1);
    const double z = s.x[0] * w;
    const bool pole = detail::is_pole_at(act, z);
    c.w_grid.push_back(w);
    c.is_pole.push_back(pole);
    c.a_values.push_back(pole ? std::numeric_limits<double>::quiet_NaN() : s.y * act.recip(z, 0));
    if (pole) c.poles.push_back(w);
  }
  return c;
}

inline bool on_minima(const Params& theta, const Sample& s, const Activation& act, double tol) {
  try {
    return loss(theta, s, act) < tol;
  } catch (const DomainError&) {
    return false;
  }
}

struct IntersectionResult {
  std::vector<Params> points;  // sorted by w
  bool all_coincident = false;
  bool pole_in_range = false;
};

/// Roots of g(w) = y1 sigma~(x1 w) - y2 sigma~(x2 w) on [w_lo, w_hi]: sign-change
/// scan on n grid points, then bisection to |g| < 1e-12. Poles and their
/// immediate neighbours are skipped and reported.
inline IntersectionResult curve_intersections(const Sample& s1, const Sample& s2,
                                              const Activation& act, double w_lo, double w_hi,
                                              int n = 4096) {
  if (s1.x.size() != 1 || s2.x.size() != 1)
    throw PreconditionError("curve intersections need M = 2");
  if (s1.x[0] == 0.0 || s2.x[0] == 0.0 || s1.y == 0.0 || s2.y == 0.0)
    throw PreconditionError("curve intersections need nonzero x and y");
  if (n < 2 || !(w_lo < w_hi)) throw PreconditionError("invalid scan grid");
  const double x1 = s1.x[0], x2 = s2.x[0], y1 = s1.y, y2 = s2.y;
  auto g = [&](double w) { return y1 * act.recip(x1 * w, 0) - y2 * act.recip(x2 * w, 0); };

  IntersectionResult out;
  std::vector<double> ws(n), gs(n);
  std::vector<bool> bad(n, false);
  for (int i = 0; i < n; ++i) {
    ws[i] = i == n - 1 ? w_hi : w_lo + (w_hi - w_lo) * i / (n - 1);
    bad[i] = detail::is_pole_at(act, x1 * ws[i]) || detail::is_pole_at(act, x2 * ws[i]);
  }
  std::vector<bool> skip = bad;
  for (int i = 0; i < n; ++i) {
    if (!bad[i]) continue;
    out.pole_in_range = true;
    if (i > 0) skip[i - 1] = true;
    if (i + 1 < n) skip[i + 1] = true;
  }
  bool all_zero = true;
  for (int i = 0; i < n; ++i) {
    if (skip[i]) continue;
    gs[i] = g(ws[i]);
    const double scale = std::abs(y1 * act.recip(x1 * ws[i], 0));
    if (std::abs(gs[i]) > 1e-14 * std::max(1.0, scale)) all_zero = false;
  }
  if (all_zero) {
    out.all_coincident = true;
    return out;
  }
  auto push = [&](double w) {
    if (!out.points.empty() && out.points.back().w[0] == w) return;
    out.points.emplace_back(w, y1 * act.recip(x1 * w, 0));
  };
  int prev = -1;
  for (int i = 0; i < n; ++i) {
    if (skip[i]) {
      prev = -1;
      continue;
    }
    if (gs[i] == 0.0) {
      push(ws[i]);
    } else if (prev >= 0 && gs[prev] != 0.0 && std::signbit(gs[prev]) != std::signbit(gs[i])) {
      const auto r = roots::bisect(g, ws[prev], ws[i], 0.0, 1e-12, 2000);
      push(r.root);
    }
    prev = i;
  }
  return out;
}

inline double F_value(double p, double x, double w, double x0, const Activation& act) {
  return act.recip(x * w, 0) * act.recip(x0 * p, 0) - act.recip(x * p, 0) * act.recip(x0 * w, 0);
}

enum class Verdict { Nondegenerate, Degenerate, PowerLike };

inline std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Nondegenerate: return "Nondegenerate";
    case Verdict::Degenerate: return "Degenerate";
    case Verdict::PowerLike: return "PowerLike";
  }
  return "Unknown";
}

struct NondegeneracyReport {
  double x0 = 0.0;
  double w = 0.0;
  double criterion = 0.0;
  Verdict verdict = Verdict::Degenerate;
  double grid_min_absF = 0.0;  // over the punctured local grid
  double grid_max_absF = 0.0;
  double bound_constant = 0.0; // c with |F| >= c |p - w| |x - x0| required
  bool bound_holds = true;     // checked only for Nondegenerate verdicts
  double worst_bound_ratio = 0.0;  // min over grid of |F| / (c |p-w| |x-x0|)
};

/// criterion(u) = 1/w - x0 [sigma~'/sigma~ - sigma~''/sigma~'] at u = x0 w.
inline double criterion_value(const Activation& act, double w, double x0) {
  if (w == 0.0) throw PreconditionError("criterion needs w != 0");
  if (act.smoothness() < 2) throw SmoothnessError("criterion needs second derivatives");
  const double u = x0 * w;
  const double r0 = act.recip(u, 0), r1 = act.recip(u, 1), r2 = act.recip(u, 2);
  if (r0 == 0.0) throw DomainError("sigma~ vanishes at x0 w");
  if (r1 == 0.0) throw DerivativeZero("sigma~' vanishes at x0 w = " + detail::fmt(u));
  return 1.0 / w - x0 * (r1 / r0 - r2 / r1);
}

/// Local offsets: +/- log-spaced magnitudes in [1e-3, 1e-2].
inline std::vector<double> local_offsets(int per_side = 8) {
  std::vector<double> out;
  for (int i = 0; i < per_side; ++i) {
    const double m = std::pow(10.0, -3.0 + static_cast<double>(i) / (per_side - 1));
    out.push_back(-m);
    out.push_back(m);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Classifies the activation at (w, x0). Near (p, x) = (w, x0),
/// F ~ -(x - x0)(p - w) sigma~ sigma~' w criterion, so nondegenerate verdicts are
/// checked against a quarter of that leading term on the local grid.
inline NondegeneracyReport nondegeneracy(const Activation& act, double w, double x0) {
  NondegeneracyReport rep;
  rep.x0 = x0;
  rep.w = w;
  rep.criterion = criterion_value(act, w, x0);
  const double u = x0 * w;
  rep.bound_constant =
      std::abs(act.recip(u, 0) * act.recip(u, 1) * w * rep.criterion) / 4.0;
  const auto offs = local_offsets();
  rep.grid_min_absF = std::numeric_limits<double>::infinity();
  rep.worst_bound_ratio = std::numeric_limits<double>::infinity();
  for (double dp : offs) {
    for (double dx : offs) {
      const double f = std::abs(F_value(w + dp, x0 + dx, w, x0, act));
      rep.grid_min_absF = std::min(rep.grid_min_absF, f);
      rep.grid_max_absF = std::max(rep.grid_max_absF, f);
      const double bound = rep.bound_constant * std::abs(dp) * std::abs(dx);
      if (bound > 0) rep.worst_bound_ratio = std::min(rep.worst_bound_ratio, f / bound);
    }
  }
  if (std::abs(rep.criterion) > 1e-8) {
    rep.verdict = Verdict::Nondegenerate;
    rep.bound_holds = rep.worst_bound_ratio >= 1.0;
  } else if (rep.grid_max_absF < 1e-12) {
    rep.verdict = Verdict::PowerLike;
  } else {
    rep.verdict = Verdict::Degenerate;
  }
  return rep;
}

/// Zeros of u -> criterion(w, u / w) for u in [u_lo, u_hi] (n-point sign scan,
/// bisection to x_tol in u).
inline std::vector<double> degeneracy_roots(const Activation& act, double w, double u_lo,
                                            double u_hi, int n = 1000, double x_tol = 1e-12) {
  if (w == 0.0) throw PreconditionError("degeneracy roots need w != 0");
  auto c = [&](double u) { return criterion_value(act, w, u / w); };
  std::vector<double> out;
  double prev_u = u_lo, prev_c = c(u_lo);
  for (int i = 1; i < n; ++i) {
    const double uu = i == n - 1 ? u_hi : u_lo + (u_hi - u_lo) * i / (n - 1);
    const double cc = c(uu);
    if (prev_c == 0.0) {
      out.push_back(prev_u);
    } else if (cc != 0.0 && std::signbit(cc) != std::signbit(prev_c)) {
      out.push_back(roots::bisect(c, prev_u, uu, x_tol).root);
    }
    prev_u = uu;
    prev_c = cc;
  }
  if (prev_c == 0.0) out.push_back(prev_u);
  return out;
}

}  // namespace overlap
