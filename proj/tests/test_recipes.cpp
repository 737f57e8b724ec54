#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "overlap/recipes.hpp"

using namespace overlap;

namespace {

constexpr double kE = std::numbers::e;

// sigma~ = 1/sigmoid; the minima curve of (x, y) is a = y (1 + exp(-x w)).
double sigmoid_curve(double x, double y, double w) { return y * (1.0 + std::exp(-x * w)); }

}  // namespace

TEST(RecipeA, WorkedExample) {
  const auto s = recipe_a_sample(Params(1.0, 1.0), Params(2.0, 3.0));
  EXPECT_DOUBLE_EQ(s.x0(), 0.25);
  EXPECT_NEAR(s.y, 3.0 * std::exp(0.5), 1e-14);
}

TEST(RecipeA, RandomTargetsAreReached) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> w(0.3, 2.0), a(0.3, 2.5);
  const auto ex = Activation::exp();
  for (int i = 0; i < 20; ++i) {
    const Params th0(w(rng), a(rng));
    Params ts(w(rng), a(rng));
    if (std::abs(ts.a * ts.a - th0.a * th0.a) < 0.2) continue;
    const auto s = recipe_a_sample(th0, ts);
    auto tr = integrate(th0, s, ex);
    ASSERT_EQ(tr.status, Status::Converged) << i;
    EXPECT_LT(sup_dist(*tr.limit, ts), 1e-6) << i;
  }
}

TEST(RecipeA, VectorInput) {
  const Params th0(std::vector<double>{1.0, -0.5}, 1.0);
  const Params ts(std::vector<double>{1.4, -0.2}, 2.0);
  const auto s = recipe_a_sample(th0, ts);
  EXPECT_NEAR(s.x[0], 2 * 0.4 / 3.0, 1e-15);
  EXPECT_NEAR(s.x[1], 2 * 0.3 / 3.0, 1e-15);
  auto tr = integrate(th0, s, Activation::exp());
  ASSERT_EQ(tr.status, Status::Converged);
  EXPECT_LT(sup_dist(*tr.limit, ts), 1e-6);
}

TEST(RecipeA, Errors) {
  EXPECT_THROW(recipe_a_sample(Params(1.0, 1.0), Params(2.0, 1.0)), EqualOutputWeights);
  EXPECT_THROW(recipe_a_sample(Params(1.0, 1.0), Params(2.0, -1.0)), EqualOutputWeights);
  EXPECT_THROW(recipe_a_sample(Params(0.0, 1.0), Params(2.0, 3.0)), PreconditionError);
  const auto s = recipe_a_sample(Params(1.0, 1.0), Params(1.0, -1.0));
  EXPECT_EQ(s.x0(), 0.0);
  EXPECT_EQ(s.y, -1.0);
}

TEST(TwoPoint, Fig1InstanceOverlaps) {
  const Params th(0.922, 2.868);
  const Sample s1(1.0, 1.0), s2(12.307, 1.400);
  const auto r = verify_two_point(th, s1, s2, Activation::sigmoid(), 1e-4, 0.05);
  EXPECT_TRUE(r.verdict);
  EXPECT_LT(r.self_losses.first, 1e-10);
  EXPECT_LT(r.self_losses.second, 1e-10);
  EXPECT_GT(r.separation, 0.05);
  // Each limit lies on the other sample's curve, up to the 3-digit rounding of
  // the published data (a cross loss of 1e-4 allows a residual of 1e-2 in a sigma).
  EXPECT_NEAR(r.limit1.a, sigmoid_curve(12.307, 1.4, r.limit1.w[0]), 2e-2);
  EXPECT_NEAR(r.limit2.a, sigmoid_curve(1.0, 1.0, r.limit2.w[0]), 2e-2);
}

TEST(TwoPoint, SameSampleTwiceFailsSeparation) {
  const Sample s(1.0, 1.0);
  const auto r = verify_two_point(Params(0.922, 2.868), s, s, Activation::sigmoid());
  EXPECT_FALSE(r.verdict);
  EXPECT_EQ(r.separation, 0.0);
}

TEST(TwoPoint, NonConvergenceIsRaised) {
  GFConfig cfg;
  cfg.t_max = 1e-3;
  EXPECT_THROW(verify_two_point(Params(0.922, 2.868), Sample(1.0, 1.0), Sample(12.307, 1.4),
                                Activation::sigmoid(), 1e-6, 1e-2, cfg),
               NonConvergence);
}

TEST(OnePoint, SamplesFollowDefinition) {
  const auto sp = Activation::softplus();
  const auto ss = one_point_samples(Params(0.5, 1.0), {0.5, 2.0}, sp);
  ASSERT_EQ(ss.size(), 2u);
  EXPECT_NEAR(ss[1].y, -std::log1p(std::exp(1.0)), 1e-15);
  EXPECT_THROW(one_point_samples(Params(0.5, 0.0), {1.0}, sp), ZeroOutputWeight);
}

TEST(OnePoint, SoftplusDirectionsAreIndependent) {
  const auto sp = Activation::softplus();
  const Params th(0.5, 1.0);
  const auto r = verify_one_point(th, one_point_samples(th, {0.5, 1.0, 2.0}, sp), sp);
  EXPECT_EQ(r.flag, DirectionFlag::Independent);
  EXPECT_TRUE(r.verdict);
  EXPECT_LT(r.max_limit_error, 1e-6);
  for (std::size_t i = 0; i < r.directions.size(); ++i) {
    const double slope = r.directions[i][1] / r.directions[i][0];
    EXPECT_NEAR(std::atan(slope), std::atan(r.formula_slopes[i]), 1e-2) << i;
  }
}

TEST(OnePoint, ExpSlopeIsMinusOneOverA0X) {
  const Params th(0.7, 1.3);
  for (double x : {0.5, 1.0, -2.0})
    EXPECT_NEAR(limiting_direction_formula(th, x, Activation::exp()), -1.0 / (1.3 * x), 1e-15);
}

TEST(OnePoint, PowerIsFlaggedDegenerate) {
  const auto pw = Activation::power(2.0);
  // a^2 - w^2/2 is conserved; a can only change sign if a0^2 < w0^2 / 2.
  const Params th(2.0, 1.0);
  // sigma/sigma' = z/2, so every slope equals -w0 / (2 a0).
  for (double x : {0.5, 1.5}) EXPECT_NEAR(limiting_direction_formula(th, x, pw), -1.0, 1e-15);
  const auto r = verify_one_point(th, one_point_samples(th, {0.5, 1.5}, pw), pw);
  EXPECT_EQ(r.flag, DirectionFlag::PowerDegenerate);
  EXPECT_FALSE(r.verdict);
}

TEST(OnePoint, RepeatedInputIsDegenerate) {
  const auto sp = Activation::softplus();
  const Params th(0.5, 1.0);
  const auto r = verify_one_point(th, one_point_samples(th, {1.0, 1.0}, sp), sp);
  EXPECT_EQ(r.flag, DirectionFlag::Degenerate);
  EXPECT_LT(r.min_pairwise_angle, 1e-2);
}

TEST(OnePoint, ZeroInputGivesVerticalDirection) {
  const auto sp = Activation::softplus();
  const Params th(0.5, 1.0);
  const auto r = verify_one_point(th, one_point_samples(th, {0.0, 1.0}, sp), sp);
  EXPECT_TRUE(std::isnan(r.formula_slopes[0]));
  EXPECT_NEAR(std::abs(r.directions[0][1]), 1.0, 1e-9);
  EXPECT_EQ(r.flag, DirectionFlag::Independent);
}

TEST(OnePoint, Errors) {
  EXPECT_THROW(limiting_direction_formula(Params(0.5, 0.0), 1.0, Activation::exp()),
               ZeroOutputWeight);
  EXPECT_THROW(limiting_direction_formula(Params(0.5, 1.0), 0.0, Activation::exp()),
               PreconditionError);
  EXPECT_THROW(limiting_direction_formula(Params(0.0, 1.0), 1.0, Activation::gaussian()),
               DerivativeZero);
  const auto sp = Activation::softplus();
  EXPECT_THROW(verify_one_point(Params(0.5, 1.0), {Sample(1.0, 0.0)}, sp), PreconditionError);
  // A sample off the one-point family ends elsewhere.
  EXPECT_THROW(verify_one_point(Params(0.5, 1.0), {Sample(1.0, 1.0), Sample(2.0, 1.0)}, sp),
               LimitMismatch);
}

TEST(OnePoint, DistinctStartsGiveDistinctLimits) {
  const auto r = verify_distinct_starts(0.5, 1.0, 2.0, {0.5, 1.0, 2.0}, Activation::softplus());
  EXPECT_TRUE(r.verdict);
  EXPECT_NEAR(r.limit_separation, 1.0, 1e-12);
  EXPECT_THROW(verify_distinct_starts(0.5, 1.0, 1.0, {1.0, 2.0}, Activation::softplus()),
               PreconditionError);
}

TEST(RecipeB, FirstStepIsRecipeA) {
  RecipeBConfig cfg;
  cfg.n = 1;
  const auto st = recipe_b_run(Params(1.0, 1.0), cfg);
  const auto sa = recipe_a_sample(Params(1.0, 1.0), Params(1.25, 1.5));
  ASSERT_EQ(st.samples.size(), 1u);
  EXPECT_DOUBLE_EQ(st.samples[0].x0(), sa.x0());
  EXPECT_NEAR(st.samples[0].y, sa.y, 1e-14);
  EXPECT_LT(st.worst_target_error, 1e-6);
}

TEST(RecipeB, ChainOfThreeIsCertified) {
  RecipeBConfig cfg;
  cfg.n = 3;
  std::vector<Trajectory> trs;
  const auto st = recipe_b_run(Params(1.0, 1.0), cfg, &trs);
  ASSERT_EQ(st.samples.size(), 3u);
  ASSERT_EQ(trs.size(), 3u);
  EXPECT_TRUE(st.verified);
  EXPECT_LT(st.worst_pairing_loss, 1e-8);
  EXPECT_GT(st.min_pairing_distance, 1e-2);
  EXPECT_LT(st.worst_target_error, 1e-6);
  EXPECT_EQ(st.pairings.size(), 4u);
  // Pairings hold by direct loss evaluation.
  for (auto [i, j] : st.pairings)
    EXPECT_LT(loss(st.limits[i - 1], st.samples[j - 1], st.sigma_n), 1e-8) << i << "," << j;
  // Each later input clears the projection bound.
  for (std::size_t n = 1; n < st.steps.size(); ++n)
    EXPECT_GT(st.samples[n].x0(), st.steps[n].x_bound);
  // The final activation is C1 across all knots and blends.
  const auto& pw = *st.sigma_n.piecewise();
  (void)pw;
  for (const auto& seg : st.segments) {
    for (double z : {seg.interval.lo, seg.interval.hi}) {
      const double h = 1e-7 * std::max(1.0, std::abs(z));
      EXPECT_NEAR(st.sigma_n.eval(z - h, 0), st.sigma_n.eval(z + h, 0),
                  1e-5 * std::max(1.0, std::abs(st.sigma_n.eval(z, 0))));
    }
  }
}

TEST(RecipeB, TwoSampleCaseIsATwoPointOverlap) {
  RecipeBConfig cfg;
  cfg.n = 2;
  const auto st = recipe_b_run(Params(1.0, 1.0), cfg);
  const auto r = verify_two_point(Params(1.0, 1.0), st.samples[0], st.samples[1], st.sigma_n,
                                  1e-8, 1e-2);
  EXPECT_TRUE(r.verdict);
}

TEST(RecipeB, ReplayReproducesState) {
  RecipeBConfig cfg;
  cfg.n = 3;
  const auto st = recipe_b_run(Params(1.0, 1.0), cfg);
  const auto re = recipe_b_replay(st);
  ASSERT_EQ(re.limits.size(), st.limits.size());
  for (std::size_t i = 0; i < st.limits.size(); ++i) EXPECT_EQ(re.limits[i], st.limits[i]);
  EXPECT_EQ(re.verified, st.verified);
}

TEST(RecipeB, BallModeCertifiesAllPairs) {
  RecipeBConfig cfg;
  cfg.ball = true;
  cfg.ball_m = 4;
  const auto st = recipe_b_run(Params(1.0, 1.0), cfg);
  EXPECT_EQ(st.samples.size(), 6u);
  EXPECT_TRUE(st.verified);
  for (std::size_t i = 2; i < st.targets.size(); ++i)
    EXPECT_LE(sup_dist(st.targets[i], st.targets[1]), cfg.ball_radius + 1e-15);
}

TEST(RecipeB, Errors) {
  RecipeBConfig cfg;
  cfg.n = 7;
  EXPECT_THROW(recipe_b_run(Params(1.0, 1.0), cfg), PreconditionError);
  cfg.n = 2;
  cfg.x_override[2] = 0.1;
  EXPECT_THROW(recipe_b_run(Params(1.0, 1.0), cfg), ConstraintFailure);
  cfg.x_override.clear();
  EXPECT_THROW(recipe_b_run(Params(0.0, 1.0), cfg), PreconditionError);
  cfg.ball = true;
  cfg.ball_m = 33;
  EXPECT_THROW(recipe_b_run(Params(1.0, 1.0), cfg), PreconditionError);
}

TEST(TraceBack, RecoversFig1Start) {
  const auto sig = Activation::sigmoid();
  const Params th(0.922, 2.868);
  const Sample s1(1.0, 1.0), s2(12.307, 1.400);
  const auto l1 = *integrate(th, s1, sig).limit;
  const auto l2 = *integrate(th, s2, sig).limit;
  const auto r = trace_back_search(l1, l2, s1, s2, sig);
  EXPECT_LT(sup_dist(r.theta0, th), 0.05);
  EXPECT_LE(r.limit_errors.first, 1e-3);
  EXPECT_LE(r.limit_errors.second, 1e-3);
}

TEST(TraceBack, ParallelExpFamiliesNeverCross) {
  const auto ex = Activation::exp();
  EXPECT_THROW(trace_back_search(Params(1.0, 1.0), Params(1.0, 2.0), Sample(1.0, kE),
                                 Sample(1.0, 2 * kE), ex),
               NoCrossing);
}

TEST(TraceBack, ReportsEveryVerifiedCrossing) {
  // s2 starts near the edge of its exp segment, bends back in the blend and
  // meets the s1 trajectory a second time; both points are valid starts.
  RecipeBConfig cfg;
  cfg.n = 2;
  const Params th(1.0, 1.0);
  const auto st = recipe_b_run(th, cfg);
  const auto l1 = *integrate(th, st.samples[0], st.sigma_n).limit;
  const auto l2 = *integrate(th, st.samples[1], st.sigma_n).limit;
  const auto r = trace_back_search(l1, l2, st.samples[0], st.samples[1], st.sigma_n);
  ASSERT_FALSE(r.crossings.empty());
  EXPECT_EQ(r.crossings.front(), r.theta0);
  double nearest = 1e9;
  for (const auto& c : r.crossings) {
    nearest = std::min(nearest, sup_dist(c, th));
    EXPECT_LT(sup_dist(*integrate(c, st.samples[0], st.sigma_n).limit, l1), 1e-6);
    EXPECT_LT(sup_dist(*integrate(c, st.samples[1], st.sigma_n).limit, l2), 1e-6);
  }
  EXPECT_LT(nearest, 1e-3);
}
