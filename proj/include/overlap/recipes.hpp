#pragma once

// Constructions realizing overlapping gradient-flow limits, and the checks that
// certify them:
//  * two-point overlap: one start, two samples, two distinct limits that each
//    lie on both minima sets;
//  * one-point overlap: one start, several samples, one common limit reached
//    from independent directions.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "activation.hpp"
#include "errors.hpp"
#include "gradflow.hpp"
#include "limits.hpp"
#include "minima.hpp"
#include "types.hpp"

namespace overlap {

// ---------------------------------------------------------------------------
// Part A: exponential activation, one sample steering the flow to a target.

/// Sample S = (x, y) whose exponential-activation flow from theta0 ends at
/// theta_star. On the flow, w - w0 = x (a^2 - a0^2) / 2, hence
/// x = 2 (w* - w0) / (a*^2 - a0^2) and y = a* exp(x^T w*).
/// For a* = -a0 the flow must keep w fixed: then w* = w0 is required and x = 0.
inline Sample recipe_a_sample(const Params& theta0, const Params& theta_star) {
  if (theta0.w.size() != theta_star.w.size())
    throw PreconditionError("recipe A: dimension mismatch");
  if (sup_norm(theta0.w) == 0.0) throw PreconditionError("recipe A needs w0 != 0");
  const double a0 = theta0.a, as = theta_star.a;
  if (as == a0) throw EqualOutputWeights("recipe A needs a* != a0");
  const std::size_t d = theta0.w.size();
  std::vector<double> x(d, 0.0);
  if (as == -a0) {
    if (theta_star.w != theta0.w)
      throw EqualOutputWeights("a* = -a0 keeps a^2 fixed, so only w* = w0 is reachable");
    return Sample(std::move(x), as);
  }
  const double denom = as * as - a0 * a0;
  for (std::size_t i = 0; i < d; ++i) x[i] = 2.0 * (theta_star.w[i] - theta0.w[i]) / denom;
  return Sample(x, as * std::exp(dot(x, theta_star.w)));
}

// ---------------------------------------------------------------------------
// Two-point overlap check.

struct TwoPointReport {
  Params theta0;
  Sample s1, s2;
  Params limit1, limit2;
  std::pair<double, double> self_losses;   // L(limit1, s1), L(limit2, s2)
  std::pair<double, double> cross_losses;  // L(limit1, s2), L(limit2, s1)
  double separation = 0.0;                 // |limit1 - limit2|_inf
  double tol = 0.0;
  double sep_min = 0.0;
  bool verdict = false;
};

inline TwoPointReport verify_two_point(const Params& theta0, const Sample& s1, const Sample& s2,
                                       const Activation& act, double tol = 1e-6,
                                       double sep_min = 1e-2, const GFConfig& cfg = {},
                                       std::vector<Trajectory>* trajectories = nullptr) {
  auto t1 = integrate(theta0, s1, act, cfg);
  auto t2 = integrate(theta0, s2, act, cfg);
  if (t1.status != Status::Converged || t2.status != Status::Converged)
    throw NonConvergence("two-point check: flow ended with status " +
                         status_name(t1.status != Status::Converged ? t1.status : t2.status));
  TwoPointReport r;
  r.theta0 = theta0;
  r.s1 = s1;
  r.s2 = s2;
  r.limit1 = *t1.limit;
  r.limit2 = *t2.limit;
  r.self_losses = {loss(r.limit1, s1, act), loss(r.limit2, s2, act)};
  r.cross_losses = {loss(r.limit1, s2, act), loss(r.limit2, s1, act)};
  r.separation = sup_dist(r.limit1, r.limit2);
  r.tol = tol;
  r.sep_min = sep_min;
  r.verdict = r.self_losses.first < tol && r.self_losses.second < tol &&
              r.cross_losses.first < tol && r.cross_losses.second < tol &&
              r.separation > sep_min;
  if (trajectories) {
    trajectories->clear();
    trajectories->push_back(std::move(t1));
    trajectories->push_back(std::move(t2));
  }
  return r;
}

// ---------------------------------------------------------------------------
// One-point overlap.

/// Samples (x_i, -a0 sigma(x_i^T w0)) whose flows all end at (w0, -a0).
inline std::vector<Sample> one_point_samples(const Params& theta0,
                                             const std::vector<double>& xs,
                                             const Activation& act) {
  if (theta0.a == 0.0) throw ZeroOutputWeight("one-point samples need a0 != 0");
  if (theta0.w.size() != 1) throw PreconditionError("one-point samples take scalar x (M = 2)");
  std::vector<Sample> out;
  for (double x : xs) out.emplace_back(x, -theta0.a * act.eval(x * theta0.w[0], 0));
  return out;
}

/// Closed-form limiting slope da/dw at (w0, -a0): -sigma(x w0) / (a0 x sigma'(x w0)).
inline double limiting_direction_formula(const Params& theta0, double x, const Activation& act) {
  if (theta0.a == 0.0) throw ZeroOutputWeight("limiting slope needs a0 != 0");
  if (x == 0.0) throw PreconditionError("limiting slope needs x != 0 (x = 0 moves only a)");
  const double z = x * theta0.w.at(0);
  const double d = act.eval(z, 1);
  if (d == 0.0) throw DerivativeZero("sigma'(x w0) = 0: limiting slope undefined");
  return -act.eval(z, 0) / (theta0.a * x * d);
}

enum class DirectionFlag { Independent, Degenerate, PowerDegenerate };

inline std::string direction_flag_name(DirectionFlag f) {
  switch (f) {
    case DirectionFlag::Independent: return "Independent";
    case DirectionFlag::Degenerate: return "Degenerate";
    case DirectionFlag::PowerDegenerate: return "PowerDegenerate";
  }
  return "Unknown";
}

struct OnePointReport {
  Params theta0;
  std::vector<Sample> samples;
  std::vector<Params> limits;
  Params common_limit;
  std::vector<std::vector<double>> directions;  // unit (w..., a), toward the limit
  std::vector<double> formula_slopes;           // NaN where x = 0
  double min_pairwise_angle = 0.0;              // line angle, radians
  double max_limit_error = 0.0;
  DirectionFlag flag = DirectionFlag::Degenerate;
  bool verdict = false;  // common limit within tol and flag Independent
};

inline OnePointReport verify_one_point(const Params& theta0, const std::vector<Sample>& samples,
                                       const Activation& act, double tol = 1e-6,
                                       const GFConfig& cfg = {},
                                       std::vector<Trajectory>* trajectories = nullptr) {
  if (samples.size() < 2) throw PreconditionError("one-point check needs at least two samples");
  if (theta0.w.size() != 1) throw PreconditionError("one-point check is for M = 2");
  OnePointReport r;
  r.theta0 = theta0;
  r.samples = samples;
  r.common_limit = Params(theta0.w, -theta0.a);
  std::vector<Trajectory> trs;
  for (const auto& s : samples) {
    auto tr = integrate(theta0, s, act, cfg);
    if (tr.status != Status::Converged)
      throw NonConvergence("one-point check: flow for x = " + detail::fmt(s.x0()) + " ended " +
                           status_name(tr.status));
    const double err = sup_dist(*tr.limit, r.common_limit);
    r.max_limit_error = std::max(r.max_limit_error, err);
    if (!(err <= tol))
      throw LimitMismatch("flow for x = " + detail::fmt(s.x0()) + " ends " + detail::fmt(err) +
                          " away from (w0, -a0)");
    r.limits.push_back(*tr.limit);
    r.directions.push_back(terminal_direction(tr));
    r.formula_slopes.push_back(s.x0() == 0.0
                                   ? std::numeric_limits<double>::quiet_NaN()
                                   : limiting_direction_formula(theta0, s.x0(), act));
    trs.push_back(std::move(tr));
  }
  r.min_pairwise_angle = std::numeric_limits<double>::infinity();
  bool all_same_x = true, slopes_coincide = true;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      r.min_pairwise_angle =
          std::min(r.min_pairwise_angle, line_angle(r.directions[i], r.directions[j]));
      if (samples[i].x == samples[j].x) continue;
      all_same_x = false;
      const double si = r.formula_slopes[i], sj = r.formula_slopes[j];
      if (!(std::abs(si - sj) <= 1e-9 * std::max(std::abs(si), std::abs(sj))))
        slopes_coincide = false;
    }
  }
  if (all_same_x) r.flag = DirectionFlag::Degenerate;
  else if (slopes_coincide) r.flag = DirectionFlag::PowerDegenerate;
  else if (!(r.min_pairwise_angle > 1e-2)) r.flag = DirectionFlag::Degenerate;
  else r.flag = DirectionFlag::Independent;
  r.verdict = r.flag == DirectionFlag::Independent;
  if (trajectories) *trajectories = std::move(trs);
  return r;
}

/// Two distinct output weights give two distinct one-point limits, each
/// approached from independent directions.
struct DistinctStartsReport {
  std::vector<OnePointReport> reports;
  double limit_separation = 0.0;
  bool verdict = false;
};

inline DistinctStartsReport verify_distinct_starts(double w0, double a0_first, double a0_second,
                                                   const std::vector<double>& xs,
                                                   const Activation& act, double tol = 1e-6,
                                                   const GFConfig& cfg = {}) {
  if (a0_first == a0_second) throw PreconditionError("distinct starts need different a0");
  DistinctStartsReport r;
  for (double a0 : {a0_first, a0_second}) {
    const Params th(w0, a0);
    r.reports.push_back(verify_one_point(th, one_point_samples(th, xs, act), act, tol, cfg));
  }
  r.limit_separation = sup_dist(r.reports[0].common_limit, r.reports[1].common_limit);
  r.verdict = r.reports[0].verdict && r.reports[1].verdict && r.limit_separation > 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Part B: a piecewise activation realizing a chain of two-point overlaps.

namespace detail {

inline double van_der_corput(unsigned long index, unsigned base) {
  double result = 0.0, f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

}  // namespace detail

struct RecipeBConfig {
  int n = 3;                          // number of samples in chain mode (<= 6)
  std::optional<Params> theta1_star;  // default (1.25 w0, 1.5 a0)
  std::map<int, double> x_override;   // forced |x_n| for step n >= 2
  double lambda_lo = 0.2, lambda_hi = 1.8;  // w_n* = w0 + lambda (w0 - w_k*)
  double mu_lo = 0.4, mu_hi = 0.85;         // a_n* = mu a0
  double growth = 1.5;         // x_n = growth * projection bound
  double pad_rel = 1e-3;       // segment padding relative to its length
  double margin_rel = 1e-6;    // minimum gap between regions, relative to sup|E|
  int budget = 64;             // candidates tried per step before giving up
  double pairing_tol = 1e-8;
  double distinct_min = 1e-2;
  double target_tol = 1e-6;
  // Dense-ball mode: after the first two samples, add ball_m targets drawn from
  // the ball of radius ball_radius around the second target, all paired with 1.
  bool ball = false;
  double ball_radius = 0.05;
  int ball_m = 4;
  GFConfig flow;
};

struct RecipeBStep {
  int index = 0;  // 1-based sample index
  int k = 0;      // partner sample (0 for the first step)
  double lambda = 0.0, mu = 0.0;
  double x_bound = 0.0;  // projection bound the chosen x had to exceed
  double x_tilde = 0.0;  // equivalent exponential input of the new segment
  double rate = 1.0;     // exponential rate of the new segment
};

struct RecipeBState {
  int n = 0;
  Params theta0;
  Activation sigma_n = Activation::exp();
  std::vector<Segment> segments;  // table sigma_n is built from
  std::vector<Sample> samples;
  std::vector<Params> targets;
  std::vector<Params> limits;
  std::vector<Interval> E;  // visited pre-activation hulls and pinned points
  std::vector<std::pair<int, int>> pairings;  // (i, j): limit_i on the minima set of S_j, 1-based
  std::vector<RecipeBStep> steps;
  double worst_pairing_loss = 0.0;
  double min_pairing_distance = 0.0;
  double worst_target_error = 0.0;
  bool verified = false;
};

namespace detail {

inline Activation build_sigma(const std::vector<Segment>& segs) {
  return make_piecewise(segs, {}, 1, BlendShape::Hermite);
}

inline double sup_abs(const std::vector<Interval>& E) {
  double m = 0.0;
  for (const auto& iv : E) m = std::max({m, std::abs(iv.lo), std::abs(iv.hi)});
  return m;
}

inline double gap_to(const Interval& a, const Interval& b) {
  if (a.hi < b.lo) return b.lo - a.hi;
  if (b.hi < a.lo) return a.lo - b.hi;
  return -1.0;  // intersect
}

inline bool clear_of(const Interval& iv, const std::vector<Segment>& segs, double margin) {
  for (const auto& s : segs)
    if (!(gap_to(iv, s.interval) > margin)) return false;
  return true;
}

inline Interval hull_of(const Trajectory& tr, double x) {
  Interval iv{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& st : tr.states) {
    const double z = x * st.theta.w[0];
    iv.lo = std::min(iv.lo, z);
    iv.hi = std::max(iv.hi, z);
  }
  return iv;
}

inline Interval padded(double z0, double z1, double pad_rel) {
  const double lo = std::min(z0, z1), hi = std::max(z0, z1);
  const double pad = pad_rel * std::max(hi - lo, 1e-12 * std::max(1.0, std::abs(hi)));
  return {lo - pad, hi + pad};
}

// Re-integrates every sample under the final activation and certifies pairings.
inline void certify(RecipeBState& st, const GFConfig& cfg, double pairing_tol,
                    double distinct_min, double target_tol,
                    std::vector<Trajectory>* trajectories) {
  st.limits.clear();
  st.E.clear();
  std::vector<Trajectory> trs;
  for (std::size_t i = 0; i < st.samples.size(); ++i) {
    auto tr = integrate(st.theta0, st.samples[i], st.sigma_n, cfg);
    if (tr.status != Status::Converged)
      throw NonConvergence("recipe B: flow " + std::to_string(i + 1) + " ended " +
                           status_name(tr.status));
    st.limits.push_back(*tr.limit);
    st.E.push_back(hull_of(tr, st.samples[i].x0()));
    trs.push_back(std::move(tr));
  }
  for (const auto& seg : st.segments)
    if (seg.interval.lo == seg.interval.hi) st.E.push_back(seg.interval);
  std::sort(st.E.begin(), st.E.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  st.worst_pairing_loss = 0.0;
  st.min_pairing_distance = std::numeric_limits<double>::infinity();
  st.worst_target_error = 0.0;
  bool ok = true;
  for (const auto& [i, j] : st.pairings) {
    const double l = loss(st.limits[i - 1], st.samples[j - 1], st.sigma_n);
    st.worst_pairing_loss = std::max(st.worst_pairing_loss, l);
    const double d = sup_dist(st.limits[i - 1], st.limits[j - 1]);
    st.min_pairing_distance = std::min(st.min_pairing_distance, d);
    ok = ok && on_minima(st.limits[i - 1], st.samples[j - 1], st.sigma_n, pairing_tol) &&
         d > distinct_min;
  }
  for (std::size_t i = 0; i < st.targets.size(); ++i)
    st.worst_target_error = std::max(st.worst_target_error, sup_dist(st.limits[i], st.targets[i]));
  st.verified = ok && !st.pairings.empty() && st.worst_target_error <= target_tol;
  if (trajectories) *trajectories = std::move(trs);
}

}  // namespace detail

/// Runs the construction. Sample 1 comes from Part A with an exponential
/// segment. Each later sample n pairs with the smallest admissible k < n:
/// its target (w_n*, a_n*) sits on the far side of w0 from w_k*, the new
/// exponential segment lives at |x_n| beyond every region used so far (so
/// earlier flows are untouched), and two pinned points put theta_n* on the
/// minima set of S_k and theta_k* on that of S_n.
inline RecipeBState recipe_b_run(const Params& theta0, const RecipeBConfig& cfg,
                                 std::vector<Trajectory>* trajectories = nullptr) {
  if (theta0.w.size() != 1) throw PreconditionError("recipe B is implemented for M = 2");
  const double w0 = theta0.w[0], a0 = theta0.a;
  if (w0 == 0.0 || a0 == 0.0) throw PreconditionError("recipe B needs w0 != 0 and a0 != 0");
  const int total = cfg.ball ? 2 + cfg.ball_m : cfg.n;
  if (!cfg.ball && (cfg.n < 1 || cfg.n > 6))
    throw PreconditionError("recipe B chain mode supports 1 <= n <= 6");
  if (cfg.ball && (cfg.ball_m < 1 || cfg.ball_m > 32 || !(cfg.ball_radius > 0)))
    throw PreconditionError("recipe B ball mode needs 1 <= m <= 32 and a positive radius");

  RecipeBState st;
  st.theta0 = theta0;

  // Step 1: Part A with the plain exponential on the first flow's range.
  const Params t1 = cfg.theta1_star.value_or(Params(1.25 * w0, 1.5 * a0));
  if (t1.w.size() != 1 || t1.a * a0 <= 0 || t1.a * t1.a == a0 * a0 || t1.w[0] * w0 <= 0)
    throw PreconditionError("recipe B: theta1* must share signs with theta0 and have a1*^2 != a0^2");
  {
    const double x1 = 2.0 * (t1.w[0] - w0) / (t1.a * t1.a - a0 * a0);
    if (x1 == 0.0) throw PreconditionError("recipe B: theta1* must differ from theta0 in w");
    st.segments.push_back({detail::padded(x1 * w0, x1 * t1.w[0], cfg.pad_rel), SegmentBase{}});
    st.sigma_n = detail::build_sigma(st.segments);
    st.samples.emplace_back(x1, t1.a * st.segments[0].base.eval(x1 * t1.w[0], 0));
    st.targets.push_back(t1);
    st.steps.push_back({1, 0, 0.0, 0.0, 0.0, x1, 1.0});
    auto tr = integrate(theta0, st.samples[0], st.sigma_n, cfg.flow);
    if (tr.status != Status::Converged) throw NonConvergence("recipe B: first flow did not converge");
    st.E = {detail::hull_of(tr, x1)};
  }

  for (int n = 2; n <= total; ++n) {
    const bool from_ball = cfg.ball && n > 2;
    bool placed = false;
    std::string last_reason = "no candidate tried";
    double last_bound = 0.0;
    for (int k = 1; k < n && !placed; ++k) {
      if (from_ball && k != 1) break;
      const Params& tk = st.targets[k - 1];
      const Sample& sk = st.samples[k - 1];
      for (int c = 0; c < cfg.budget && !placed; ++c) {
        const unsigned long idx = static_cast<unsigned long>(n) * 1000 + c + 1;
        const double u1 = detail::van_der_corput(idx, 2), u2 = detail::van_der_corput(idx, 3);
        double lambda = 0.0, mu = 0.0;
        Params tn;
        if (from_ball) {
          const double rho = cfg.ball_radius * std::sqrt(u1);
          const double ang = 2.0 * std::numbers::pi * u2;
          tn = Params(st.targets[1].w[0] + rho * std::cos(ang),
                      st.targets[1].a + rho * std::sin(ang));
        } else {
          lambda = cfg.lambda_lo + (cfg.lambda_hi - cfg.lambda_lo) * u1;
          mu = cfg.mu_lo + (cfg.mu_hi - cfg.mu_lo) * u2;
          tn = Params(w0 + (w0 - tk.w[0]) * lambda, a0 * mu);
        }
        const double wn = tn.w[0], an = tn.a;
        // Same-sign constraints keep x_n * hull[w0, w_n*] away from 0.
        if (wn * w0 <= 0 || an * a0 <= 0 || an * an == a0 * a0) {
          last_reason = "target violates sign constraints";
          continue;
        }
        if (std::min(w0, wn) <= tk.w[0] && tk.w[0] <= std::max(w0, wn)) {
          last_reason = "w_k* lies between w0 and w_n*";
          continue;
        }
        bool dup = false;
        for (const auto& t : st.targets) dup = dup || sup_dist(t, tn) <= cfg.distinct_min;
        if (dup) {
          last_reason = "target too close to an earlier target";
          continue;
        }
        const double scale = std::max(1.0, detail::sup_abs(st.E));
        const double margin = cfg.margin_rel * scale;
        // theta_n* on the minima set of S_k: pin sigma at x_k w_n*.
        const double za = sk.x0() * wn;
        const Interval pa{za, za};
        if (za == 0.0 || !detail::clear_of(pa, st.segments, margin)) {
          last_reason = "x_k w_n* collides with an existing region";
          continue;
        }
        // Projection bound: x_n * |w| must clear every region in use.
        std::vector<Interval> used;
        for (const auto& s : st.segments) used.push_back(s.interval);
        used.push_back(pa);
        const double bound = detail::sup_abs(used) /
                             std::min({std::abs(tk.w[0]), std::abs(w0), std::abs(wn)});
        last_bound = bound;
        double xn = cfg.growth * bound;
        if (auto it = cfg.x_override.find(n); it != cfg.x_override.end()) {
          if (!(std::abs(it->second) > bound))
            throw ConstraintFailure("x_" + std::to_string(n) + " = " + detail::fmt(it->second) +
                                    " violates the projection bound sup|E|/min|w| = " +
                                    detail::fmt(bound));
          xn = std::abs(it->second);
        }
        const double x_tilde = 2.0 * (wn - w0) / (an * an - a0 * a0);
        const double rate = x_tilde / xn;
        Segment seg{detail::padded(xn * w0, xn * wn, cfg.pad_rel),
                    SegmentBase{Kind::Exp, 1.0, rate, 0.0, 1.0}};
        const double zb = xn * tk.w[0];
        const Interval pb{zb, zb};
        if (!detail::clear_of(seg.interval, st.segments, margin) ||
            !detail::clear_of(pb, st.segments, margin) ||
            !(detail::gap_to(seg.interval, pb) > margin) ||
            !(detail::gap_to(seg.interval, pa) > margin) || !(detail::gap_to(pa, pb) > margin)) {
          last_reason = "new segment collides with an existing region";
          continue;
        }
        const double yn = an * seg.base.eval(xn * wn, 0);
        st.segments.push_back(pinned_knot(za, sk.y / an));
        st.segments.push_back(seg);
        st.segments.push_back(pinned_knot(zb, yn / tk.a));
        std::sort(st.segments.begin(), st.segments.end(), [](const Segment& a, const Segment& b) {
          return a.interval.lo < b.interval.lo;
        });
        st.sigma_n = detail::build_sigma(st.segments);
        st.samples.emplace_back(xn, yn);
        st.targets.push_back(tn);
        st.pairings.emplace_back(k, n);
        st.pairings.emplace_back(n, k);
        st.steps.push_back({n, k, lambda, mu, bound, x_tilde, rate});
        auto tr = integrate(theta0, st.samples.back(), st.sigma_n, cfg.flow);
        if (tr.status != Status::Converged)
          throw NonConvergence("recipe B: flow " + std::to_string(n) + " ended " +
                               status_name(tr.status));
        st.E.push_back(detail::hull_of(tr, xn));
        st.E.push_back(pa);
        st.E.push_back(pb);
        placed = true;
      }
    }
    if (!placed)
      throw ConstraintFailure("recipe B step " + std::to_string(n) +
                              ": no admissible target within budget (last: " + last_reason +
                              ", bound " + detail::fmt(last_bound) + ")");
  }
  st.n = total;
  detail::certify(st, cfg.flow, cfg.pairing_tol, cfg.distinct_min, cfg.target_tol, trajectories);
  return st;
}

/// Rebuilds the activation from the stored table and re-derives limits, E and
/// the certificate; a faithful state reproduces itself exactly.
inline RecipeBState recipe_b_replay(const RecipeBState& stored, const GFConfig& flow = {},
                                    double pairing_tol = 1e-8, double distinct_min = 1e-2,
                                    double target_tol = 1e-6) {
  RecipeBState st = stored;
  st.sigma_n = detail::build_sigma(st.segments);
  detail::certify(st, flow, pairing_tol, distinct_min, target_tol, nullptr);
  return st;
}

// ---------------------------------------------------------------------------
// Trace-back search for a common start of two flows.

struct TraceBackOptions {
  double displacement = 1e-4;    // offset from each limit along the normal
  double reach = 10.0;           // stop once |theta - limit|_inf exceeds this
  double t_max = 1e3;
  double max_state_change = 0.005;
  double candidate_gap = 1e-2;   // curves must come this close
  double verify_tol = 1e-3;      // forward flows must land this close
  int max_candidates = 16;
  int refine_window = 40;        // polyline vertices searched each side when refining
  int refine_iters = 50;
};

struct TraceBackResult {
  Params theta0;
  double curve_gap = 0.0;  // distance between the backward curves at theta0
  std::pair<double, double> limit_errors;  // forward limits vs limit1 / limit2
  std::vector<Trajectory> backward;        // [s1 +n, s1 -n, s2 +n, s2 -n]
  // Every verified crossing, theta0 first. The two trajectories may cross
  // more than once; each crossing is then an equally valid initialization.
  std::vector<Params> crossings;
  int candidates_tried = 0;
};

namespace detail {

struct ClosestPair {
  double dist;
  double px, py;  // point reported for the pair
  int curve = 0;       // index of the s1 backward curve
  std::size_t seg = 0;  // segment of that curve
};

inline ClosestPair segment_closest(double ax, double ay, double bx, double by, double cx,
                                   double cy, double dx, double dy) {
  // Proper intersection first.
  const double rx = bx - ax, ry = by - ay, sx = dx - cx, sy = dy - cy;
  const double den = rx * sy - ry * sx;
  if (den != 0.0) {
    const double t = ((cx - ax) * sy - (cy - ay) * sx) / den;
    const double u = ((cx - ax) * ry - (cy - ay) * rx) / den;
    if (t >= 0 && t <= 1 && u >= 0 && u <= 1) return {0.0, ax + t * rx, ay + t * ry};
  }
  auto point_seg = [](double px, double py, double qx, double qy, double ex, double ey) {
    const double vx = ex - qx, vy = ey - qy;
    const double l2 = vx * vx + vy * vy;
    double t = l2 > 0 ? ((px - qx) * vx + (py - qy) * vy) / l2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double fx = qx + t * vx, fy = qy + t * vy;
    return std::array<double, 3>{std::hypot(px - fx, py - fy), fx, fy};
  };
  ClosestPair best{std::numeric_limits<double>::infinity(), 0, 0};
  auto consider = [&](double px, double py, const std::array<double, 3>& r) {
    if (r[0] < best.dist) best = {r[0], 0.5 * (px + r[1]), 0.5 * (py + r[2])};
  };
  consider(ax, ay, point_seg(ax, ay, cx, cy, dx, dy));
  consider(bx, by, point_seg(bx, by, cx, cy, dx, dy));
  consider(cx, cy, point_seg(cx, cy, ax, ay, bx, by));
  consider(dx, dy, point_seg(dx, dy, ax, ay, bx, by));
  return best;
}

}  // namespace detail

/// Integrates reverse-time flows from points displaced off each limit along
/// +/- the normal of its minima set, then looks for a point where a backward
/// curve of s1 meets one of s2. Candidates are verified by forward flows.
inline TraceBackResult trace_back_search(const Params& limit1, const Params& limit2,
                                         const Sample& s1, const Sample& s2,
                                         const Activation& act,
                                         const TraceBackOptions& opt = {}) {
  if (limit1.w.size() != 1 || limit2.w.size() != 1 || s1.x.size() != 1 || s2.x.size() != 1)
    throw PreconditionError("trace-back search is two-dimensional");
  GFConfig back;
  back.t_max = opt.t_max;
  back.max_state_change = opt.max_state_change;

  TraceBackResult res;
  auto run = [&](const Params& lim, const Sample& s, double sign) {
    const double z = s.x0() * lim.w[0];
    double nw = lim.a * s.x0() * act.eval(z, 1), na = act.eval(z, 0);
    const double len = std::hypot(nw, na);
    if (!(len > 0)) throw PreconditionError("minima set has no normal at the limit");
    const Params start(lim.w[0] + sign * opt.displacement * nw / len,
                       lim.a + sign * opt.displacement * na / len);
    return integrate_backward(start, s, act, back, [&](const State& st) {
      return sup_dist(st.theta, lim) > opt.reach;
    });
  };
  res.backward = {run(limit1, s1, 1.0), run(limit1, s1, -1.0), run(limit2, s2, 1.0),
                  run(limit2, s2, -1.0)};

  std::vector<detail::ClosestPair> cands;
  for (int i = 0; i < 2; ++i) {
    for (int j = 2; j < 4; ++j) {
      const auto& P = res.backward[i].states;
      const auto& Q = res.backward[j].states;
      for (std::size_t p = 0; p + 1 < P.size(); ++p) {
        const double ax = P[p].theta.w[0], ay = P[p].theta.a;
        const double bx = P[p + 1].theta.w[0], by = P[p + 1].theta.a;
        for (std::size_t q = 0; q + 1 < Q.size(); ++q) {
          const double cx = Q[q].theta.w[0], cy = Q[q].theta.a;
          const double dx = Q[q + 1].theta.w[0], dy = Q[q + 1].theta.a;
          // Cheap bounding-box rejection.
          if (std::max(cx, dx) < std::min(ax, bx) - opt.candidate_gap ||
              std::min(cx, dx) > std::max(ax, bx) + opt.candidate_gap ||
              std::max(cy, dy) < std::min(ay, by) - opt.candidate_gap ||
              std::min(cy, dy) > std::max(ay, by) + opt.candidate_gap)
            continue;
          const auto c = detail::segment_closest(ax, ay, bx, by, cx, cy, dx, dy);
          if (c.dist < opt.candidate_gap) {
            auto cc = c;
            cc.curve = i;
            cc.seg = p;
            cands.push_back(cc);
          }
        }
      }
    }
  }
  if (cands.empty())
    throw NoCrossing("backward curves never come within " + detail::fmt(opt.candidate_gap));
  std::stable_sort(cands.begin(), cands.end(),
                   [](const auto& a, const auto& b) { return a.dist < b.dist; });

  // Near-tangent crossings are poorly located by the polylines. Points on an
  // s1 backward curve all flow to limit1, so slide along it and bisect on the
  // signed miss of the s2 limit along the tangent of its minima set.
  const double z2 = s2.x0() * limit2.w[0];
  const double tw = act.eval(z2, 0), ta = -limit2.a * s2.x0() * act.eval(z2, 1);
  auto miss = [&](const Params& th) -> std::optional<double> {
    try {
      auto f = integrate(th, s2, act);
      if (f.status != Status::Converged) return std::nullopt;
      return (f.limit->w[0] - limit2.w[0]) * tw + (f.limit->a - limit2.a) * ta;
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  auto refine = [&](const detail::ClosestPair& c, TraceBackResult& out) {
    const auto& P = res.backward[c.curve].states;
    const auto at = [&](double u) {
      const auto k = std::min(static_cast<std::size_t>(u), P.size() - 2);
      const double f = u - static_cast<double>(k);
      return Params((1 - f) * P[k].theta.w[0] + f * P[k + 1].theta.w[0],
                    (1 - f) * P[k].theta.a + f * P[k + 1].theta.a);
    };
    const auto lo_i = static_cast<std::ptrdiff_t>(c.seg) - opt.refine_window;
    const auto hi_i = static_cast<std::ptrdiff_t>(c.seg) + 1 + opt.refine_window;
    const auto first = static_cast<std::size_t>(std::max<std::ptrdiff_t>(lo_i, 0));
    const auto last = static_cast<std::size_t>(std::min<std::ptrdiff_t>(hi_i, P.size() - 1));
    // Bracket nearest the candidate segment.
    std::optional<std::pair<double, double>> bracket;
    double bracket_off = std::numeric_limits<double>::infinity();
    std::optional<double> prev;
    for (std::size_t k = first; k <= last; ++k) {
      const auto g = miss(P[k].theta);
      if (g && prev && k > first && ((*g <= 0) != (*prev <= 0))) {
        const double off = std::abs(static_cast<double>(k) - 0.5 - static_cast<double>(c.seg));
        if (off < bracket_off) {
          bracket_off = off;
          bracket = {static_cast<double>(k - 1), static_cast<double>(k)};
        }
      }
      prev = g;
    }
    if (!bracket) return;
    double a = bracket->first, b = bracket->second;
    auto ga = miss(at(a));
    if (!ga) return;
    for (int it = 0; it < opt.refine_iters && b - a > 1e-12; ++it) {
      const double m = 0.5 * (a + b);
      const auto gm = miss(at(m));
      if (!gm) return;
      if ((*gm <= 0) == (*ga <= 0)) {
        a = m;
        ga = gm;
      } else {
        b = m;
      }
    }
    const Params th = at(0.5 * (a + b));
    try {
      auto f1 = integrate(th, s1, act);
      auto f2 = integrate(th, s2, act);
      if (f1.status != Status::Converged || f2.status != Status::Converged) return;
      const double e1 = sup_dist(*f1.limit, limit1), e2 = sup_dist(*f2.limit, limit2);
      if (std::max(e1, e2) <= std::max(out.limit_errors.first, out.limit_errors.second)) {
        out.theta0 = th;
        out.limit_errors = {e1, e2};
      }
    } catch (const Error&) {
    }
  };

  std::vector<detail::ClosestPair> tried;
  for (const auto& c : cands) {
    bool near_tried = false;
    for (const auto& t : tried)
      near_tried = near_tried || std::hypot(c.px - t.px, c.py - t.py) < opt.candidate_gap;
    if (near_tried) continue;
    if (static_cast<int>(tried.size()) >= opt.max_candidates) break;
    tried.push_back(c);
    ++res.candidates_tried;
    const Params th(c.px, c.py);
    try {
      auto f1 = integrate(th, s1, act);
      auto f2 = integrate(th, s2, act);
      if (f1.status != Status::Converged || f2.status != Status::Converged) continue;
      const double e1 = sup_dist(*f1.limit, limit1), e2 = sup_dist(*f2.limit, limit2);
      if (e1 <= opt.verify_tol && e2 <= opt.verify_tol) {
        TraceBackResult found;
        found.theta0 = th;
        found.curve_gap = c.dist;
        found.limit_errors = {e1, e2};
        refine(c, found);
        bool dup = false;
        for (const auto& x : res.crossings) dup = dup || sup_dist(x, found.theta0) < opt.candidate_gap;
        if (dup) continue;
        if (res.crossings.empty()) {
          res.theta0 = found.theta0;
          res.curve_gap = found.curve_gap;
          res.limit_errors = found.limit_errors;
        }
        res.crossings.push_back(found.theta0);
      }
    } catch (const Error&) {
      continue;
    }
  }
  if (!res.crossings.empty()) return res;
  throw LimitMismatch("no crossing of the backward curves leads forward to both limits (" +
                      std::to_string(res.candidates_tried) + " candidates tried)");
}

}  // namespace overlap
