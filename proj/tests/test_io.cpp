#include <gtest/gtest.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "overlap/cli.hpp"

using namespace overlap;
namespace fs = std::filesystem;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("overlap_io_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Csv, NumbersRoundTripExactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    const auto s = num(v);
    double back = 0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v) << s;
    // At most 17 significant digits: drop sign, exponent, point and leading zeros.
    std::string mant;
    for (char c : s.substr(0, s.find('e')))
      if (std::isdigit(static_cast<unsigned char>(c))) mant += c;
    mant.erase(0, mant.find_first_not_of('0'));
    EXPECT_LE(mant.size(), 17u) << s;
  }
  EXPECT_EQ(num(0.1), "0.1");
  EXPECT_EQ(num(1.0), "1");
}

TEST(Csv, TrajectoryHeaderAndRows) {
  const auto tr = integrate(Params(0.3, 1.0), Sample(1.0, 2.0), Activation::softplus());
  const auto text = trajectory_csv(tr);
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,w_1,a,loss,grad_norm");
  EXPECT_EQ(count(text, "\n"), tr.states.size() + 1);
  const Trajectory tr3 = integrate(Params(std::vector<double>{0.1, 0.2}, 1.0),
                                   Sample(std::vector<double>{1.0, -1.0}, 0.5), Activation::exp());
  const auto t3 = trajectory_csv(tr3);
  EXPECT_EQ(t3.substr(0, t3.find('\n')), "t,w_1,w_2,a,loss,grad_norm");
}

TEST(Csv, MinimaCurveMarksPoles) {
  const auto mc = minima_curve(Sample(1.0, 1.0), Activation::power(2.0), -1.0, 1.0, 3);
  EXPECT_EQ(minima_csv(mc), "w,a,is_pole\n-1,nan,1\n0,nan,1\n1,1,0\n");
}

TEST(Json, ParamsAndSamplesRoundTrip) {
  const Params p(std::vector<double>{0.1, -2.5}, 3.0);
  EXPECT_EQ(json(p).get<Params>(), p);
  const Sample s(std::vector<double>{1.5}, -0.25);
  const auto back = json(s).get<Sample>();
  EXPECT_EQ(back.x, s.x);
  EXPECT_EQ(back.y, s.y);
}

TEST(Json, ActivationSpecRoundTrip) {
  const auto pw = make_piecewise({{{-1.0, 0.0}, SegmentBase{Kind::Softplus, 1, 1, 0, 1}},
                                  {{1.0, 2.0}, SegmentBase{Kind::Exp, 1, 0.5, 0, 2}}},
                                 {}, 1, BlendShape::Hermite);
  const auto j = activation_json(pw);
  const auto back = activation_from_json(j);
  EXPECT_EQ(activation_json(back).dump(), j.dump());
  for (double z : {-1.5, -0.5, 0.3, 0.7, 1.5, 3.0}) EXPECT_EQ(back.eval(z, 0), pw.eval(z, 0));
  EXPECT_EQ(activation_from_json(json{{"kind", "power"}, {"q", 0.5}}).q(), 0.5);
  EXPECT_THROW(activation_from_json(json{{"kind", "relu"}}), ConfigError);
  EXPECT_THROW(activation_from_json(json{{"kind", "piecewise"}}), ConfigError);
}

TEST(Json, RecipeBStateIsByteIdenticalOnReplay) {
  RecipeBConfig cfg;
  cfg.n = 3;
  const auto st = recipe_b_run(Params(1.0, 1.0), cfg);
  const auto text = recipe_b_json(st).dump(2);
  const auto loaded = recipe_b_from_json(json::parse(text));
  EXPECT_EQ(recipe_b_json(loaded).dump(2), text);
  const auto replayed = recipe_b_replay(loaded);
  EXPECT_EQ(recipe_b_json(replayed).dump(2), text);
}

TEST(Svg, SinglePolylineHasOnePath) {
  const auto svg = render_svg({Curve{"line", {{0, 0}, {1, 1}}, CurveStyle::Trajectory}});
  EXPECT_EQ(count(svg, "<path"), 1u);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
}

TEST(Svg, ViewBoxHasFivePercentMargin) {
  const auto svg = render_svg({Curve{"m", {{0, 0}, {10, 20}}, CurveStyle::Minima}});
  // w in [0, 10] -> [-0.5, 10.5]; a in [0, 20] flipped -> [-21, 1].
  EXPECT_NE(svg.find("viewBox=\"-0.5 -21 11 22\""), std::string::npos);
  EXPECT_EQ(svg.find("stroke-dasharray"), std::string::npos);
}

TEST(Svg, Fig2CompositionAndDeterminism) {
  const auto sp = Activation::softplus();
  const Params th(0.3, 1.0);
  const auto ss = one_point_samples(th, {0.6, 1.0, 1.4, 1.8}, sp);
  std::vector<Curve> curves;
  for (const auto& s : ss) curves.push_back(trajectory_curve(integrate(th, s, sp), "t"));
  for (const auto& s : ss) curves.push_back(minima_curve_points(minima_curve(s, sp, -0.6, 1.2, 200), "m"));
  const auto a = render_svg(curves), b = render_svg(curves);
  EXPECT_EQ(count(a, "<path"), 8u);
  EXPECT_EQ(count(a, "stroke-dasharray"), 4u);
  EXPECT_EQ(a, b);
}

TEST(Svg, EmptyInputIsRejected) {
  EXPECT_THROW(render_svg({}), EmptyInput);
  EXPECT_THROW(render_svg({Curve{"dot", {{0, 0}}, CurveStyle::Minima}}), EmptyInput);
}

TEST(Cli, CriterionGaussianExample) {
  const auto dir = scratch("criterion");
  const auto res = cli::run(json{{"command", "criterion"}, {"activation", "gaussian"}, {"w", 1.0}, {"x0", 1.0}}, dir);
  EXPECT_EQ(res.exit_code, 0);
  const auto rep = json::parse(slurp(dir / "criterion.json"));
  EXPECT_NEAR(rep["criterion"].get<double>(), 2.0, 1e-12);
  EXPECT_EQ(rep["verdict"], "Nondegenerate");
  const auto sum = json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(sum["command"], "criterion");
  EXPECT_TRUE(sum["all_passed"].get<bool>());
  for (const auto& c : sum["checks"])
    for (const char* key : {"name", "passed", "value", "threshold", "margin"}) EXPECT_TRUE(c.contains(key));
}

TEST(Cli, Fig1Artifacts) {
  const auto dir = scratch("fig1");
  const auto res = cli::run(json{{"command", "fig1"}}, dir);
  EXPECT_EQ(res.exit_code, 0);
  for (const char* f : {"trajectory_1.csv", "trajectory_2.csv", "minima_1.csv", "minima_2.csv", "fig1.svg",
                        "two_point.json", "summary.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_TRUE(json::parse(slurp(dir / "two_point.json"))["verdict"].get<bool>());
}

TEST(Cli, Fig2Artifacts) {
  const auto dir = scratch("fig2");
  EXPECT_EQ(cli::run(json{{"command", "fig2"}}, dir).exit_code, 0);
  const auto rep = json::parse(slurp(dir / "one_point.json"));
  EXPECT_EQ(rep["common_limit"]["w"][0].get<double>(), 0.3);
  EXPECT_EQ(rep["common_limit"]["a"].get<double>(), -1.0);
  EXPECT_EQ(count(slurp(dir / "fig2.svg"), "<path"), 8u);
}

TEST(Cli, FailedVerificationExitsOneWithSummary) {
  const auto dir = scratch("fail");
  const json cfg{{"command", "two-point"},
                 {"theta0", {{"w", {0.922}}, {"a", 2.868}}},
                 {"samples", {{{"x", {1.0}}, {"y", 1.0}}, {{"x", {1.0}}, {"y", 1.0}}}}};
  const auto res = cli::run(cfg, dir);
  EXPECT_EQ(res.exit_code, 1);
  const auto sum = json::parse(slurp(dir / "summary.json"));
  EXPECT_FALSE(sum["all_passed"].get<bool>());
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto dir = scratch("bad");
  EXPECT_EQ(cli::run(json{{"command", "nope"}}, dir).exit_code, 2);
  EXPECT_EQ(cli::run(json{{"command", "fig1"}, {"typo", 1}}, dir).exit_code, 2);
  EXPECT_EQ(cli::run(json{{"command", "simulate"}}, dir).exit_code, 2);
  EXPECT_EQ(cli::run(json{{"command", "fig1"}, {"activation", "relu"}}, dir).exit_code, 2);
  EXPECT_EQ(cli::run(json::array(), dir).exit_code, 2);
  EXPECT_EQ(cli::run(json{{"command", "minima"}, {"samples", {{{"x", 1.0}, {"y", 1.0}}}}, {"w_range", {1, 0}}}, dir)
                .exit_code,
            2);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(cli::run(json{{"command", "fig1"}}, a).exit_code, 0);
  ASSERT_EQ(cli::run(json{{"command", "fig1"}}, b).exit_code, 0);
  for (const auto& e : fs::directory_iterator(a))
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
}
