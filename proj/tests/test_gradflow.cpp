#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "overlap/gradflow.hpp"
#include "overlap/limits.hpp"

using namespace overlap;

namespace {

constexpr double kE = std::numbers::e;

double softplus_oracle(double z) { return std::log1p(std::exp(z)); }

std::vector<double> fd_grad(const Params& th, const Sample& s, const Activation& act, double h) {
  std::vector<double> out;
  for (std::size_t i = 0; i <= th.w.size(); ++i) {
    auto p = th.flat(), m = th.flat();
    p[i] += h;
    m[i] -= h;
    out.push_back((loss(Params::from_flat(p), s, act) - loss(Params::from_flat(m), s, act)) /
                  (2 * h));
  }
  return out;
}

}  // namespace

TEST(Loss, Examples) {
  const auto sp = Activation::softplus();
  const double s03 = softplus_oracle(0.3);
  EXPECT_NEAR(loss(Params(0.3, -1.0), Sample(1.0, -s03), sp), 0.0, 1e-30);
  EXPECT_DOUBLE_EQ(loss(Params(0.0, 1.0), Sample(1.0, 0.0), Activation::exp()), 1.0);
  EXPECT_NEAR(loss(Params(0.3, 1.0), Sample(1.0, -s03), sp), 4 * s03 * s03, 1e-14);
}

TEST(Grad, Examples) {
  auto g = grad(Params(0.0, 1.0), Sample(1.0, 0.0), Activation::exp());
  EXPECT_DOUBLE_EQ(g[0], 2.0);
  EXPECT_DOUBLE_EQ(g[1], 2.0);
  auto z = grad(Params(2.0, 3.0), Sample(0.25, 3.0 * std::exp(0.5)), Activation::exp());
  EXPECT_NEAR(z[0], 0.0, 1e-14);
  EXPECT_NEAR(z[1], 0.0, 1e-14);
  const auto sig = Activation::sigmoid();
  auto a = grad(Params(1.0, 1.0), Sample(1.0, 1.0), sig);
  auto f = fd_grad(Params(1.0, 1.0), Sample(1.0, 1.0), sig, 1e-5);
  for (int i = 0; i < 2; ++i) EXPECT_LT(std::abs(a[i] - f[i]) / std::abs(a[i]), 1e-6);
}

TEST(Grad, RandomFiniteDifferenceConsistency) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const auto& act : {Activation::exp(), Activation::sigmoid(), Activation::softplus(),
                          Activation::gaussian()}) {
    for (int k = 0; k < 100; ++k) {
      Params th(u(rng), u(rng));
      Sample s(u(rng), u(rng));
      auto a = grad(th, s, act);
      auto f = fd_grad(th, s, act, 1e-5);
      for (int i = 0; i < 2; ++i) {
        const double den = std::max(std::abs(a[i]), 1e-3);
        EXPECT_LT(std::abs(a[i] - f[i]) / den, 1e-6) << act.name();
      }
    }
  }
}

TEST(Integrate, ExpRecipeInstanceConverges) {
  const Sample s(0.25, 3.0 * std::exp(0.5));
  auto tr = integrate(Params(1.0, 1.0), s, Activation::exp());
  ASSERT_EQ(tr.status, Status::Converged);
  EXPECT_LT(sup_dist(*tr.limit, Params(2.0, 3.0)), 1e-6);
  EXPECT_LT(sup_dist(*tr.limit, predict_limit(Params(1.0, 1.0), s, Activation::exp())), 1e-6);
  EXPECT_LT(tr.states.back().grad_norm, 1e-8);
  EXPECT_LT(exp_parabola_residual(tr, s), 1e-8);
  EXPECT_LT(conserved_residual(tr, s, Activation::exp()), 1e-8);
}

TEST(Integrate, SoftplusOnePointLimit) {
  const Sample s(1.0, -softplus_oracle(0.3));
  auto tr = integrate(Params(0.3, 1.0), s, Activation::softplus());
  ASSERT_EQ(tr.status, Status::Converged);
  EXPECT_LT(sup_dist(*tr.limit, Params(0.3, -1.0)), 1e-4);
  EXPECT_LT(conserved_residual(tr, s, Activation::softplus()), 1e-6);
}

TEST(Integrate, EquilibriumStartConvergesImmediately) {
  const Sample s(1.0, 2.0);
  const Params th(0.0, 4.0);  // sigmoid(0) = 1/2
  auto tr = integrate(th, s, Activation::sigmoid());
  ASSERT_EQ(tr.status, Status::Converged);
  EXPECT_EQ(tr.states.size(), 1u);
  EXPECT_EQ(*tr.limit, th);
  EXPECT_EQ(conserved_residual(tr, s, Activation::sigmoid()), 0.0);
}

TEST(Integrate, TrajectoryInvariants) {
  const Sample s(1.3, 0.7);
  GFConfig cfg;
  auto tr = integrate(Params(-0.4, 1.5), s, Activation::sigmoid(), cfg);
  ASSERT_EQ(tr.status, Status::Converged);
  for (std::size_t i = 1; i < tr.states.size(); ++i) {
    const auto& p = tr.states[i - 1];
    const auto& q = tr.states[i];
    EXPECT_GT(q.t, p.t);
    EXPECT_LE(q.loss, p.loss + 10 * cfg.abs_tol);
    EXPECT_LT(sup_dist(p.theta, q.theta), cfg.max_state_change + 1e-15);
  }
  EXPECT_LT(loss(*tr.limit, s, Activation::sigmoid()), cfg.loss_tol);
}

TEST(Integrate, ZeroInputFreezesW) {
  const Sample s(0.0, -0.5);
  auto tr = integrate(Params(0.7, 1.0), s, Activation::sigmoid());
  ASSERT_EQ(tr.status, Status::Converged);
  for (const auto& st : tr.states) EXPECT_EQ(st.theta.w[0], 0.7);
  EXPECT_NEAR(tr.limit->a, -1.0, 1e-8);
  auto d = terminal_direction(tr);
  EXPECT_NEAR(std::abs(d[1]), 1.0, 1e-12);
  EXPECT_EQ(d[0], 0.0);
}

TEST(Integrate, HigherDimensionalOrthogonalPartIsConstant) {
  const Sample s(std::vector<double>{0.6, -0.8, 0.3}, 1.2);
  auto tr = integrate(Params(std::vector<double>{0.2, 0.5, -0.1}, 0.9), s, Activation::softplus());
  ASSERT_EQ(tr.status, Status::Converged);
  EXPECT_LT(orthogonal_drift(tr, s), 1e-8);
  const auto pred = predict_limit(Params(std::vector<double>{0.2, 0.5, -0.1}, 0.9), s,
                                  Activation::softplus());
  EXPECT_LT(sup_dist(pred, *tr.limit), 1e-6);
}

TEST(Integrate, DivergenceIsReported) {
  GFConfig cfg;
  cfg.diverge_norm = 2.0;  // the limit has |theta|_inf ~ 2.6
  auto tr = integrate(Params(0.0, 1.0), Sample(1.0, 40.0), Activation::exp(), cfg);
  EXPECT_EQ(tr.status, Status::Diverged);
  EXPECT_FALSE(tr.limit.has_value());
}

TEST(Integrate, MaxTimeIsReported) {
  GFConfig cfg;
  cfg.t_max = 1e-3;
  auto tr = integrate(Params(0.0, 1.0), Sample(1.0, 3.0), Activation::sigmoid(), cfg);
  EXPECT_EQ(tr.status, Status::MaxTime);
  EXPECT_NEAR(tr.states.back().t, 1e-3, 1e-15);
}

TEST(Integrate, ContinuousOnlyActivationIsRejected) {
  // C^0 piecewise activation: no derivative, so no gradient flow.
  SegmentBase up{Kind::Exp, 1.0, 1.0, 0.0, 1.0};
  SegmentBase flat{Kind::Exp, 1.0, 0.0, 0.0, 2.0};
  auto act = make_piecewise({{{-10, 0}, up}, {{0.5, 10}, flat}}, {}, 0);
  EXPECT_THROW(integrate(Params(0.0, 1.0), Sample(1.0, 1.0), act), SmoothnessError);
}

TEST(TerminalDirection, SoftplusSlopeMatchesFormula) {
  const double w0 = 0.3, a0 = 1.0, x = 1.0;
  const Sample s(x, -a0 * softplus_oracle(x * w0));
  auto tr = integrate(Params(w0, a0), s, Activation::softplus());
  auto d = terminal_direction(tr);
  const double slope = d[1] / d[0];
  // Oracle: sigma / sigma' = softplus / logistic at x w0.
  const double oracle = -softplus_oracle(x * w0) * (1 + std::exp(-x * w0)) / (a0 * x);
  EXPECT_NEAR(slope / oracle, 1.0, 1e-2);
}

TEST(TerminalDirection, Fig2TrajectoriesApproachFromDifferentDirections) {
  const Params th(0.3, 1.0);
  auto dir = [&](double x) {
    return terminal_direction(
        integrate(th, Sample(x, -softplus_oracle(x * 0.3)), Activation::softplus()));
  };
  EXPECT_GT(line_angle(dir(0.6), dir(1.8)), 1e-2);
}

TEST(TerminalDirection, Errors) {
  Trajectory tr;
  tr.states.resize(20);
  EXPECT_THROW(terminal_direction(tr), NotConverged);
  auto eq = integrate(Params(0.0, 4.0), Sample(1.0, 2.0), Activation::sigmoid());
  EXPECT_THROW(terminal_direction(eq), UnstableDirection);
}

TEST(ConservedResidual, RejectsGaussian) {
  auto tr = integrate(Params(0.5, 1.0), Sample(1.0, 0.5), Activation::sigmoid());
  EXPECT_THROW(conserved_residual(tr, Sample(1.0, 0.5), Activation::gaussian()),
               UnsupportedActivation);
}

TEST(BackwardFlow, MovesAwayFromMinimaAndStops) {
  const Sample s(1.0, 1.0);
  const Params start(0.0, 2.0 + 1e-4);
  GFConfig cfg;
  cfg.t_max = 50;
  auto tr = integrate_backward(start, s, Activation::sigmoid(), cfg,
                               [&](const State& st) { return sup_dist(st.theta, start) > 3.0; });
  EXPECT_EQ(tr.status, Status::Stopped);
  for (std::size_t i = 1; i < tr.states.size(); ++i)
    EXPECT_GE(tr.states[i].loss, tr.states[i - 1].loss);
}
