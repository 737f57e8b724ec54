#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "overlap/ode.hpp"
#include "overlap/quadrature.hpp"
#include "overlap/roots.hpp"

using namespace overlap;

TEST(Quadrature, PolynomialIsExact) {
  auto r = quad::integrate([](double x) { return 3 * x * x - 2 * x + 1; }, -1.0, 2.0, 1e-14);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, 9.0 - 3.0 + 3.0, 1e-13);
}

TEST(Quadrature, ReversedLimitsFlipSign) {
  auto f = [](double x) { return std::exp(x); };
  auto a = quad::integrate(f, 0.0, 1.0, 1e-14);
  auto b = quad::integrate(f, 1.0, 0.0, 1e-14);
  EXPECT_NEAR(a.value, std::numbers::e - 1.0, 1e-14);
  EXPECT_NEAR(a.value, -b.value, 1e-15);
}

TEST(Quadrature, PeakedIntegrandRefines) {
  auto f = [](double x) { return 1.0 / (1e-4 + x * x); };
  auto r = quad::integrate(f, -1.0, 1.0, 1e-10, 1e-12);
  const double exact = 2.0 * std::atan(1.0 / 1e-2) / 1e-2;
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, exact, 1e-8 * exact);
  EXPECT_GT(r.intervals, 1u);
}

TEST(Roots, BisectAndBrentAgree) {
  auto f = [](double x) { return x * x * x - 2.0; };
  auto b = roots::bisect(f, 0.0, 2.0, 1e-14);
  auto r = roots::brent(f, 0.0, 2.0, 1e-15);
  EXPECT_TRUE(b.converged);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(b.root, std::cbrt(2.0), 1e-13);
  EXPECT_NEAR(r.root, std::cbrt(2.0), 1e-14);
  EXPECT_LT(r.iterations, b.iterations);
}

TEST(Roots, NoSignChangeIsReported) {
  auto f = [](double x) { return x * x + 1.0; };
  EXPECT_FALSE(roots::bisect(f, -1.0, 1.0, 1e-10).converged);
  EXPECT_FALSE(roots::brent(f, -1.0, 1.0, 1e-10).converged);
}

TEST(Ode, DopriIntegratesExponentialDecay) {
  ode::Tolerance tol{1e-12, 1e-10};
  auto f = [](double, const ode::State& y) { return ode::State{-y[0], y[1]}; };
  ode::State y{1.0, 1.0};
  ode::State dy = f(0.0, y);
  double t = 0.0, h = ode::initial_step(y, dy, tol);
  ode::PIController pi;
  while (t < 2.0) {
    h = std::min(h, 2.0 - t);
    auto s = ode::dopri_step(f, t, y, dy, h, tol);
    if (s.error_norm <= 1.0) {
      t += h;
      y = s.y;
      dy = s.dydt;
      h = pi.next(h, s.error_norm, true);
    } else {
      h = pi.next(h, s.error_norm, false);
    }
  }
  EXPECT_NEAR(y[0], std::exp(-2.0), 1e-9);
  EXPECT_NEAR(y[1], std::exp(2.0), 1e-8);
}
