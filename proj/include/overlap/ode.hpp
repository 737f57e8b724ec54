#pragma once

// Dormand-Prince 5(4) embedded Runge-Kutta pair with a PI step-size controller.
// The stepper is stateless apart from the FSAL derivative; callers own the
// acceptance loop so that they can attach their own stopping rules.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace overlap::ode {

using State = std::vector<double>;

namespace dp {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b_hat (error weights)
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dp

struct Tolerance {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
};

struct StepResult {
  State y;      // fifth-order solution at t + h
  State dydt;   // derivative at (t + h, y) (first stage of the next step)
  double error_norm = 0.0;  // scaled RMS error; <= 1 means acceptable
};

/// One trial step of size h from (t, y) with derivative dydt = f(t, y).
template <class Rhs>
StepResult dopri_step(Rhs& f, double t, const State& y, const State& dydt, double h,
                      const Tolerance& tol) {
  using namespace dp;
  const std::size_t n = y.size();
  State tmp(n), k2, k3, k4, k5, k6;
  const State& k1 = dydt;
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
  k2 = f(t + c2 * h, tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
  k3 = f(t + c3 * h, tmp);
  for (std::size_t i = 0; i < n; ++i)
    tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
  k4 = f(t + c4 * h, tmp);
  for (std::size_t i = 0; i < n; ++i)
    tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
  k5 = f(t + c5 * h, tmp);
  for (std::size_t i = 0; i < n; ++i)
    tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
  k6 = f(t + h, tmp);

  StepResult out;
  out.y.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.y[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
  out.dydt = f(t + h, out.y);

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double err = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                            e7 * out.dydt[i]);
    const double scale = tol.abs_tol + tol.rel_tol * std::max(std::abs(y[i]), std::abs(out.y[i]));
    sum += (err / scale) * (err / scale);
  }
  out.error_norm = std::sqrt(sum / static_cast<double>(n));
  return out;
}

/// PI controller (Gustafsson) for a fifth-order method.
class PIController {
 public:
  double next(double h, double error_norm, bool accepted) {
    constexpr double alpha = 0.7 / 5.0;
    constexpr double beta = 0.4 / 5.0;
    constexpr double safety = 0.9;
    const double err = std::max(error_norm, 1e-10);
    double factor;
    if (accepted) {
      factor = safety * std::pow(err, -alpha) * std::pow(previous_, beta);
      factor = std::clamp(factor, 0.2, 5.0);
      previous_ = err;
    } else {
      factor = std::clamp(safety * std::pow(err, -0.2), 0.1, 0.9);
    }
    return h * factor;
  }

 private:
  double previous_ = 1.0;
};

/// Rough initial step from the scale of y and f(y) (Hairer, Norsett & Wanner).
inline double initial_step(const State& y, const State& dydt, const Tolerance& tol) {
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double scale = tol.abs_tol + tol.rel_tol * std::abs(y[i]);
    d0 = std::max(d0, std::abs(y[i]) / scale);
    d1 = std::max(d1, std::abs(dydt[i]) / scale);
  }
  if (d0 < 1e-5 || d1 < 1e-5) return 1e-6;
  return std::min(0.01 * d0 / d1, 1.0);
}

}  // namespace overlap::ode
