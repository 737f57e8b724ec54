#pragma once

// Gradient flow theta' = -grad L for the one-sample loss
// L(theta) = (a sigma(x^T w) - y)^2, integrated with Dormand-Prince 5(4).

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "activation.hpp"
#include "errors.hpp"
#include "ode.hpp"
#include "potential.hpp"
#include "types.hpp"

namespace overlap {

struct GFConfig {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  double grad_tol = 1e-8;          // sup-norm of the gradient at convergence
  double loss_tol = 1e-12;         // membership threshold for the limit
  double t_max = 1e6;
  double diverge_norm = 1e6;       // abort once |theta|_inf exceeds this
  double max_state_change = 0.05;  // sup-norm cap on one recorded step
  int plateau_steps = 10;          // convergence also needs a loss plateau ...
  double plateau_decrease = 1e-14; // ... of this size over that many steps
  long max_steps = 5'000'000;
  // Step cap h <= stability_cap / (2 |grad r|^2), r = a sigma - y. Near the
  // minima set the flow contracts at rate 2 |grad r|^2; keeping h lambda inside
  // the real stability interval lets that mode decay instead of hovering at
  // the error-control level.
  double stability_cap = 2.0;
  // The residual r cannot fall below rounding of max(|y|, |a sigma|), so the
  // gradient 2 r grad r has a floor of about 2 eps |y| |grad r|. Convergence
  // accepts grad_norm below this floor times roundoff_factor when that exceeds
  // grad_tol (badly scaled samples only); 0 disables the allowance.
  double roundoff_factor = 8.0;

  void validate() const {
    const bool ok = abs_tol > 0 && rel_tol > 0 && grad_tol > 0 && grad_tol < 1 && loss_tol > 0 &&
                    loss_tol < 1 && t_max > 0 && diverge_norm > 0 && max_state_change > 0 &&
                    plateau_steps >= 0 && max_steps > 0 && stability_cap > 0 && roundoff_factor >= 0;
    if (!ok) throw PreconditionError("invalid gradient-flow configuration");
  }
};

enum class Status {
  Converged,
  MaxTime,
  Diverged,
  Stopped  // reverse-time run ended by its stop rule
};

inline std::string status_name(Status s) {
  switch (s) {
    case Status::Converged: return "Converged";
    case Status::MaxTime: return "MaxTime";
    case Status::Diverged: return "Diverged";
    case Status::Stopped: return "Stopped";
  }
  return "Unknown";
}

struct State {
  double t = 0.0;
  Params theta;
  double loss = 0.0;
  double grad_norm = 0.0;  // sup-norm
};

struct Trajectory {
  std::vector<State> states;
  Status status = Status::MaxTime;
  std::optional<Params> limit;  // present iff Converged
  long rejected_steps = 0;
};

inline double preactivation(const Params& theta, const Sample& s) { return dot(s.x, theta.w); }

inline double loss(const Params& theta, const Sample& s, const Activation& act) {
  const double z = preactivation(theta, s);
  if (!act.in_domain(z))
    throw DomainError("loss: x^T w = " + detail::fmt(z) + " outside the activation domain");
  const double r = theta.a * act.eval(z, 0) - s.y;
  return r * r;
}

/// Gradient of the loss, ordered (dL/dw_1, ..., dL/dw_{M-1}, dL/da).
inline std::vector<double> grad(const Params& theta, const Sample& s, const Activation& act) {
  const double z = preactivation(theta, s);
  if (!act.in_domain(z))
    throw DomainError("grad: x^T w = " + detail::fmt(z) + " outside the activation domain");
  const double sig = act.eval(z, 0);
  const double dsig = act.eval(z, 1);
  const double r = theta.a * sig - s.y;
  std::vector<double> g(theta.w.size() + 1);
  for (std::size_t i = 0; i < theta.w.size(); ++i) g[i] = 2.0 * r * theta.a * s.x[i] * dsig;
  g.back() = 2.0 * r * sig;
  return g;
}

namespace detail {

using StopRule = std::function<bool(const State&)>;

// sign = +1 integrates theta' = -grad L, sign = -1 integrates theta' = +grad L.
inline Trajectory run_flow(const Params& theta0, const Sample& s, const Activation& act,
                           const GFConfig& cfg, double sign, const StopRule& stop) {
  cfg.validate();
  if (!theta0.finite()) throw PreconditionError("initial parameters must be finite");
  if (theta0.w.size() != s.x.size()) throw PreconditionError("dimension mismatch between x and w");
  if (act.smoothness() < 1) throw SmoothnessError("gradient flow needs sigma'");
  const bool forward = sign > 0;

  auto rhs = [&](double, const ode::State& y) {
    auto g = grad(Params::from_flat(y), s, act);
    for (double& v : g) v *= -sign;
    return g;
  };

  Trajectory traj;
  ode::State y = theta0.flat();
  ode::State dydt = rhs(0.0, y);
  double t = 0.0;
  auto record = [&](double tt, const ode::State& yy, const ode::State& dd) {
    State st;
    st.t = tt;
    st.theta = Params::from_flat(yy);
    st.loss = loss(st.theta, s, act);
    st.grad_norm = sup_norm(dd);
    traj.states.push_back(std::move(st));
  };
  record(t, y, dydt);

  auto grad_floor = [&](const Params& th) {
    if (cfg.roundoff_factor == 0.0) return 0.0;
    const double z = preactivation(th, s);
    const double sig = act.eval(z, 0), dsig = act.eval(z, 1);
    const double dr = std::max(std::abs(th.a * dsig) * sup_norm(s.x), std::abs(sig));
    const double scale = std::max(std::abs(s.y), std::abs(th.a * sig));
    return 2.0 * cfg.roundoff_factor * std::numeric_limits<double>::epsilon() * scale * dr;
  };
  auto converged = [&]() {
    const auto& last = traj.states.back();
    if (!(last.grad_norm < std::max(cfg.grad_tol, grad_floor(last.theta)))) return false;
    const auto n = traj.states.size();
    if (n <= static_cast<std::size_t>(cfg.plateau_steps)) return true;
    const double drop = traj.states[n - 1 - cfg.plateau_steps].loss - last.loss;
    return drop < cfg.plateau_decrease;
  };
  if (forward && converged()) {
    traj.status = Status::Converged;
    traj.limit = traj.states.back().theta;
    return traj;
  }

  auto stiffness = [&](const ode::State& yy) {
    const Params th = Params::from_flat(yy);
    const double z = preactivation(th, s);
    const double sig = act.eval(z, 0), dsig = act.eval(z, 1);
    return 2.0 * (th.a * th.a * dsig * dsig * dot(s.x, s.x) + sig * sig);
  };
  auto cap = [&](double hh) {
    const double lam = stiffness(y);
    return lam > 0 ? std::min(hh, cfg.stability_cap / lam) : hh;
  };

  const ode::Tolerance tol{cfg.abs_tol, cfg.rel_tol};
  ode::PIController controller;
  double h = cap(std::min(ode::initial_step(y, dydt, tol), cfg.t_max));
  long steps = 0;
  while (true) {
    if (++steps > cfg.max_steps) {
      traj.status = Status::MaxTime;
      return traj;
    }
    const double h_min = 1e-14 * std::max(1.0, std::abs(t));
    if (h < h_min) {
      throw StepFailure("step size underflow at t = " + fmt(t) + ", x^T w = " +
                        fmt(dot(s.x, Params::from_flat(y).w)) + ", a = " + fmt(y.back()));
    }
    ode::StepResult trial;
    bool finite = true;
    try {
      trial = ode::dopri_step(rhs, t, y, dydt, h, tol);
      finite = std::isfinite(trial.error_norm);
      for (double v : trial.y) finite = finite && std::isfinite(v);
    } catch (const DomainError&) {
      finite = false;  // stage left the domain; retry with a smaller step
    }
    if (!finite) {
      h *= 0.25;
      ++traj.rejected_steps;
      continue;
    }
    if (trial.error_norm > 1.0) {
      h = controller.next(h, trial.error_norm, false);
      ++traj.rejected_steps;
      continue;
    }
    double change = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) change = std::max(change, std::abs(trial.y[i] - y[i]));
    if (change > cfg.max_state_change) {
      h *= 0.9 * cfg.max_state_change / change;
      ++traj.rejected_steps;
      continue;
    }
    t += h;
    y = std::move(trial.y);
    dydt = std::move(trial.dydt);
    record(t, y, dydt);

    if (sup_norm(y) > cfg.diverge_norm) {
      traj.status = Status::Diverged;
      return traj;
    }
    if (forward && converged()) {
      traj.status = Status::Converged;
      traj.limit = traj.states.back().theta;
      return traj;
    }
    if (stop && stop(traj.states.back())) {
      traj.status = Status::Stopped;
      return traj;
    }
    if (t >= cfg.t_max) {
      traj.status = Status::MaxTime;
      return traj;
    }
    h = cap(std::min(controller.next(h, trial.error_norm, true), cfg.t_max - t));
  }
}

}  // namespace detail

/// Forward gradient flow from theta0.
inline Trajectory integrate(const Params& theta0, const Sample& s, const Activation& act,
                            const GFConfig& cfg = {}) {
  return detail::run_flow(theta0, s, act, cfg, 1.0, nullptr);
}

/// Reverse-time flow theta' = +grad L started at `start`; ends when `stop`
/// returns true, at t_max, or on divergence. Never reports Converged.
inline Trajectory integrate_backward(const Params& start, const Sample& s, const Activation& act,
                                     const GFConfig& cfg,
                                     const std::function<bool(const State&)>& stop) {
  return detail::run_flow(start, s, act, cfg, -1.0, stop);
}

namespace detail {

inline void require_scalar_flow(const Trajectory& traj, const Sample& s) {
  if (traj.states.empty()) throw PreconditionError("empty trajectory");
  if (s.x.size() != 1) throw PreconditionError("conserved quantity check needs M = 2");
  if (s.x[0] == 0.0) throw PreconditionError("conserved quantity check needs x != 0");
}

}  // namespace detail

/// max over recorded states of |a^2/2 - a0^2/2 - (h(w) - h(w0))|.
inline double conserved_residual(const Trajectory& traj, const Sample& s, const Activation& act) {
  detail::require_scalar_flow(traj, s);
  if (act.kind() == Kind::Gaussian)
    throw UnsupportedActivation("conserved quantity needs an increasing activation");
  const auto& first = traj.states.front().theta;
  Potential pot(act, s.x[0], first.w[0]);
  double worst = 0.0;
  for (const auto& st : traj.states) {
    const double lhs = 0.5 * (st.theta.a * st.theta.a - first.a * first.a);
    worst = std::max(worst, std::abs(lhs - pot.h(st.theta.w[0])));
  }
  return worst;
}

/// For the exponential activation: max over states and components of
/// |w(t) - w0 - x (a(t)^2 - a0^2) / 2|. Any M.
inline double exp_parabola_residual(const Trajectory& traj, const Sample& s) {
  if (traj.states.empty()) throw PreconditionError("empty trajectory");
  const auto& first = traj.states.front().theta;
  double worst = 0.0;
  for (const auto& st : traj.states) {
    const double da2 = 0.5 * (st.theta.a * st.theta.a - first.a * first.a);
    for (std::size_t i = 0; i < s.x.size(); ++i)
      worst = std::max(worst, std::abs(st.theta.w[i] - first.w[i] - s.x[i] * da2));
  }
  return worst;
}

/// Largest sup-norm drift of the component of w orthogonal to x.
inline double orthogonal_drift(const Trajectory& traj, const Sample& s) {
  if (traj.states.empty()) throw PreconditionError("empty trajectory");
  const double xx = dot(s.x, s.x);
  const auto& w0 = traj.states.front().theta.w;
  double worst = 0.0;
  for (const auto& st : traj.states) {
    std::vector<double> d(w0.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = st.theta.w[i] - w0[i];
    const double c = xx > 0 ? dot(d, s.x) / xx : 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
      worst = std::max(worst, std::abs(d[i] - c * s.x[i]));
  }
  return worst;
}

namespace detail {

inline std::vector<double> secant_direction(const Trajectory& traj, double fraction) {
  const auto& st = traj.states;
  const std::size_t n = st.size();
  std::vector<double> seg(n, 0.0);  // seg[i]: length from state i to i+1
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto a = st[i + 1].theta.flat();
    const auto b = st[i].theta.flat();
    double sq = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sq += (a[k] - b[k]) * (a[k] - b[k]);
    seg[i] = std::sqrt(sq);
    total += seg[i];
  }
  if (!(total > 0.0)) throw UnstableDirection("trajectory has zero path length");
  double remaining = total;
  std::size_t start = n - 2;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (remaining < fraction * total) {
      start = std::min(i, n - 2);
      break;
    }
    remaining -= seg[i];
  }
  auto d = st.back().theta.flat();
  const auto from = st[start].theta.flat();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] -= from[k];
  const double len = norm2(d);
  if (!(len > 0.0)) throw UnstableDirection("degenerate terminal secant");
  for (double& v : d) v /= len;
  return d;
}

}  // namespace detail

/// Angle in [0, pi/2] between the lines spanned by two nonzero vectors.
inline double line_angle(const std::vector<double>& u, const std::vector<double>& v) {
  const double c = std::abs(dot(u, v)) / (norm2(u) * norm2(v));
  return std::acos(std::min(1.0, c));
}

/// Unit vector (w..., a) estimating the limiting direction of motion, taken as
/// the secant from the first state whose remaining path length is below 1e-3
/// of the total, toward the limit. Re-estimated with half the threshold; the two
/// must agree to 1e-2 rad.
inline std::vector<double> terminal_direction(const Trajectory& traj) {
  if (traj.status != Status::Converged) throw NotConverged("terminal direction needs a converged flow");
  if (traj.states.size() < 10)
    throw UnstableDirection("terminal direction needs at least 10 recorded states");
  const auto d1 = detail::secant_direction(traj, 1e-3);
  const auto d2 = detail::secant_direction(traj, 5e-4);
  const double c = std::min(1.0, dot(d1, d2));
  if (!(std::acos(c) < 1e-2))
    throw UnstableDirection("terminal direction changes by " + detail::fmt(std::acos(c)) +
                            " rad when the threshold is halved");
  return d1;
}

}  // namespace overlap
