#pragma once

// Config-driven experiment runner. Every command writes its artifacts plus a
// summary.json listing each check with its value, threshold and margin.
// Exit codes: 0 all checks pass, 1 some check failed, 2 bad configuration.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "activation.hpp"
#include "errors.hpp"
#include "gradflow.hpp"
#include "io.hpp"
#include "limits.hpp"
#include "minima.hpp"
#include "recipes.hpp"
#include "svg.hpp"
#include "types.hpp"

namespace overlap::cli {

namespace fs = std::filesystem;

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {
      "simulate",  "minima",    "intersect", "predict-limit", "recipe-a", "recipe-b",
      "one-point", "two-point", "criterion", "fig1",          "fig2",     "suite"};
  return c;
}

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  double margin = 0.0;  // positive when passing
};

class Summary {
 public:
  explicit Summary(std::string prefix = {}) : prefix_(std::move(prefix)) {}

  void less(const std::string& name, double value, double threshold) {
    add(name, value < threshold, value, threshold, threshold - value);
  }
  void greater(const std::string& name, double value, double threshold) {
    add(name, value > threshold, value, threshold, value - threshold);
  }
  void truth(const std::string& name, bool ok) { add(name, ok, ok ? 1.0 : 0.0, 1.0, ok ? 0.0 : -1.0); }

  Summary scoped(const std::string& sub) const {
    Summary s(prefix_ + sub + "/");
    s.sink_ = sink_ ? sink_ : const_cast<std::vector<Check>*>(&checks_);
    return s;
  }

  const std::vector<Check>& checks() const { return sink_ ? *sink_ : checks_; }
  bool all_passed() const {
    for (const auto& c : checks())
      if (!c.passed) return false;
    return !checks().empty();
  }

 private:
  void add(const std::string& name, bool ok, double v, double t, double m) {
    auto& dst = sink_ ? *sink_ : checks_;
    dst.push_back({prefix_ + name, ok && std::isfinite(v), v, t, m});
  }
  std::string prefix_;
  std::vector<Check> checks_;
  std::vector<Check>* sink_ = nullptr;
};

inline json summary_json(const std::string& command, const Summary& s) {
  json checks = json::array();
  for (const auto& c : s.checks())
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"value", finite_or_null(c.value)},
                      {"threshold", c.threshold},
                      {"margin", finite_or_null(c.margin)}});
  return json{{"command", command}, {"checks", checks}, {"all_passed", s.all_passed()}};
}

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> k = {
      "command", "activation", "theta0", "theta_star", "samples", "xs",   "w_range",
      "a_range", "n",          "w",      "x0",         "tolerances", "recipe_b", "output_dir",
      "seed",    "instances"};
  return k;
}

template <class F>
auto guarded(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + what + "': " + e.what());
  }
}

inline std::vector<double> vec(const json& j) {
  if (j.is_number()) return {j.get<double>()};
  return j.get<std::vector<double>>();
}

inline Params params(const json& cfg, const std::string& key, std::optional<Params> fallback = {}) {
  if (!cfg.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("config needs '" + key + "'");
  }
  return guarded(key, [&] {
    const auto& j = cfg.at(key);
    return Params(vec(j.at("w")), j.at("a").get<double>());
  });
}

inline std::vector<Sample> samples(const json& cfg, std::vector<Sample> fallback = {}) {
  if (!cfg.contains("samples")) {
    if (!fallback.empty()) return fallback;
    throw ConfigError("config needs 'samples'");
  }
  return guarded("samples", [&] {
    std::vector<Sample> out;
    for (const auto& s : cfg.at("samples")) out.emplace_back(vec(s.at("x")), s.at("y").get<double>());
    if (out.empty()) throw ConfigError("'samples' is empty");
    return out;
  });
}

inline Activation activation(const json& cfg, const std::string& fallback) {
  if (!cfg.contains("activation")) return Activation::builtin(kind_from_name(fallback));
  const auto& j = cfg.at("activation");
  if (j.is_string()) return Activation::builtin(kind_from_name(j.get<std::string>()));
  return activation_from_json(j);
}

inline double tol(const json& cfg, const std::string& key, double fallback) {
  if (!cfg.contains("tolerances")) return fallback;
  return guarded("tolerances." + key, [&] { return cfg.at("tolerances").value(key, fallback); });
}

template <class T>
T get_or(const json& cfg, const std::string& key, T fallback) {
  return guarded(key, [&] { return cfg.value(key, fallback); });
}

inline std::pair<double, double> range(const json& cfg, const std::string& key,
                                       std::pair<double, double> fallback) {
  if (!cfg.contains(key)) return fallback;
  return guarded(key, [&] {
    const auto v = cfg.at(key).get<std::vector<double>>();
    if (v.size() != 2 || !(v[0] < v[1])) throw ConfigError("'" + key + "' must be [lo, hi] with lo < hi");
    return std::pair{v[0], v[1]};
  });
}

inline void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

inline std::pair<double, double> w_extent(const std::vector<Trajectory>& trs, double pad) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& tr : trs)
    for (const auto& s : tr.states) {
      lo = std::min(lo, s.theta.w.at(0));
      hi = std::max(hi, s.theta.w.at(0));
    }
  const double span = std::max(hi - lo, 1e-3);
  return {lo - pad * span, hi + pad * span};
}

inline std::pair<double, double> a_extent(const std::vector<Trajectory>& trs, double pad) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& tr : trs)
    for (const auto& s : tr.states) {
      lo = std::min(lo, s.theta.a);
      hi = std::max(hi, s.theta.a);
    }
  const double span = std::max(hi - lo, 1e-3);
  return {lo - pad * span, hi + pad * span};
}

// Trajectory CSV/JSON plus minima CSV for each flow, and one overlay SVG.
inline void portrait(const fs::path& dir, const std::string& svg_name,
                     const std::vector<Trajectory>& trs, const std::vector<Sample>& ss,
                     const Activation& act, std::pair<double, double> wr,
                     std::pair<double, double> ar, int n) {
  std::vector<Curve> curves;
  for (std::size_t i = 0; i < trs.size(); ++i) {
    const auto tag = std::to_string(i + 1);
    write_file(dir / ("trajectory_" + tag + ".csv"), trajectory_csv(trs[i]));
    write_json(dir / ("trajectory_" + tag + ".json"), trajectory_json(trs[i]));
    if (trs[i].states.front().theta.w.size() == 1)
      curves.push_back(trajectory_curve(trs[i], "trajectory " + tag));
  }
  for (std::size_t i = 0; i < ss.size(); ++i) {
    if (ss[i].x.size() != 1) continue;
    const auto tag = std::to_string(i + 1);
    const auto mc = minima_curve(ss[i], act, wr.first, wr.second, n);
    write_file(dir / ("minima_" + tag + ".csv"), minima_csv(mc));
    curves.push_back(minima_curve_points(mc, "minima " + tag));
  }
  if (curves.empty()) return;
  SvgOptions opt;
  opt.w_lo = wr.first;
  opt.w_hi = wr.second;
  opt.a_lo = ar.first;
  opt.a_hi = ar.second;
  write_file(dir / svg_name, render_svg(curves, opt));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

using Handler = std::function<void(const json&, const fs::path&, Summary&)>;

namespace cmd {

inline void simulate(const json& cfg, const fs::path& dir, Summary& sum) {
  const auto act = detail::activation(cfg, "sigmoid");
  const auto th = detail::params(cfg, "theta0");
  const auto ss = detail::samples(cfg);
  std::vector<Trajectory> trs;
  for (std::size_t i = 0; i < ss.size(); ++i) {
    trs.push_back(integrate(th, ss[i], act));
    sum.truth("flow_" + std::to_string(i + 1) + "_converged", trs.back().status == Status::Converged);
    sum.less("flow_" + std::to_string(i + 1) + "_final_loss", trs.back().states.back().loss,
             detail::tol(cfg, "loss", 1e-10));
  }
  if (th.w.size() == 1)
    detail::portrait(dir, "simulate.svg", trs, ss, act,
                     detail::range(cfg, "w_range", detail::w_extent(trs, 0.25)),
                     detail::range(cfg, "a_range", detail::a_extent(trs, 0.25)),
                     detail::get_or(cfg, "n", 400));
  else
    for (std::size_t i = 0; i < trs.size(); ++i)
      write_file(dir / ("trajectory_" + std::to_string(i + 1) + ".csv"), trajectory_csv(trs[i]));
}

inline void minima(const json& cfg, const fs::path& dir, Summary& sum) {
  const auto act = detail::activation(cfg, "sigmoid");
  const auto ss = detail::samples(cfg);
  const auto wr = detail::range(cfg, "w_range", {-2.0, 2.0});
  const int n = detail::get_or(cfg, "n", 400);
  std::vector<Curve> curves;
  json out = json::array();
  for (std::size_t i = 0; i < ss.size(); ++i) {
    const auto mc = minima_curve(ss[i], act, wr.first, wr.second, n);
    const auto tag = std::to_string(i + 1);
    write_file(dir / ("minima_" + tag + ".csv"), minima_csv(mc));
    out.push_back(minima_json(mc));
    std::size_t finite = 0;
    for (double a : mc.a_values) finite += std::isfinite(a) ? 1 : 0;
    sum.greater("curve_" + tag + "_finite_points", static_cast<double>(finite), 1.0);
    curves.push_back(minima_curve_points(mc, "minima " + tag));
  }
  detail::write_json(dir / "minima.json", out);
  SvgOptions opt;
  if (cfg.contains("a_range")) {
    const auto ar = detail::range(cfg, "a_range", {0, 1});
    opt.a_lo = ar.first;
    opt.a_hi = ar.second;
  }
  write_file(dir / "minima.svg", render_svg(curves, opt));
}

inline void intersect(const json& cfg, const fs::path& dir, Summary& sum) {
  const auto act = detail::activation(cfg, "sigmoid");
  const auto ss = detail::samples(cfg);
  if (ss.size() != 2) throw ConfigError("intersect needs exactly two samples");
  const auto wr = detail::range(cfg, "w_range", {-2.0, 2.0});
  const auto r = curve_intersections(ss[0], ss[1], act, wr.first, wr.second,
                                     detail::get_or(cfg, "n", 4096));
  detail::write_json(dir / "intersections.json", report_json(r));
  sum.truth("intersection_found", r.all_coincident || !r.points.empty());
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto tag = std::to_string(i + 1);
    sum.less("point_" + tag + "_loss_1", loss(r.points[i], ss[0], act), 1e-10);
    sum.less("point_" + tag + "_loss_2", loss(r.points[i], ss[1], act), 1e-10);
  }
}

inline void predict(const json& cfg, const fs::path& dir, Summary& sum) {
  const auto act = detail::activation(cfg, "sigmoid");
  const auto th = detail::params(cfg, "theta0");
  const auto ss = detail::samples(cfg);
  const double tol = detail::tol(cfg, "agreement", 1e-6);
  json out = json::array();
  for (std::size_t i = 0; i < ss.size(); ++i) {
    const auto tag = std::to_string(i + 1);
    const auto pred = predict_limit_report(th, ss[i], act);
    const auto tr = integrate(th, ss[i], act);
    sum.truth("flow_" + tag + "_converged", tr.status == Status::Converged);
    const double diff = tr.limit ? sup_dist(pred.limit, *tr.limit) : INFINITY;
    sum.less("limit_" + tag + "_agreement", diff, tol);
    sum.less("limit_" + tag + "_loss", loss(pred.limit, ss[i], act), 1e-10);
    out.push_back({{"sample", ss[i]},
                   {"predicted", pred.limit},
                   {"bracket", {pred.bracket_lo, pred.bracket_hi}},
                   {"flow_limit", tr.limit ? json(*tr.limit) : json(nullptr)},
                   {"difference", finite_or_null(diff)}});
  }
  detail::write_json(dir / "predict_limit.json", out);
}

inline void recipe_a(const json& cfg, const fs::path& dir, Summary& sum) {
  const auto th = detail::params(cfg, "theta0");
  const auto ts = detail::params(cfg, "theta_star");
  const auto s = recipe_a_sample(th, ts);
  const auto ex = Activation::exp();
  const auto tr = integrate(th, s, ex);
  sum.truth("flow_converged", tr.status == Status::Converged);
  const double err = tr.limit ? sup_dist(*tr.limit, ts) : INFINITY;
  sum.less("target_error", err, detail::tol(cfg, "target", 1e-6));
  detail::write_json(dir / "recipe_a.json",
                     {{"theta0", th}, {"theta_star", ts}, {"sample", s},
                      {"limit", tr.limit ? json(*tr.limit) : json(nullptr)},
                      {"target_error", finite_or_null(err)}});
  if (th.w.size() == 1)
    detail::portrait(dir, "recipe_a.svg", {tr}, {s}, ex, detail::w_extent({tr}, 0.25),
                     detail::a_extent({tr}, 0.25), 400);
}

inline RecipeBConfig recipe_b_config(const json& cfg) {
  RecipeBConfig rc;
  if (!cfg.contains("recipe_b")) return rc;
  return detail::guarded("recipe_b", [&] {
    const auto& j = cfg.at("recipe_b");
    rc.n = j.value("n", rc.n);
    rc.ball = j.value("ball", rc.ball);
    rc.ball_m = j.value("ball_m", rc.ball_m);
    rc.ball_radius = j.value("ball_radius", rc.ball_radius);
    rc.budget = j.value("budget", rc.budget);
    if (j.contains("theta1_star"))
      rc.theta1_star = Params(detail::vec(j.at("theta1_star").at("w")),
                              j.at("theta1_star").at("a").get<double>());
    if (j.contains("x_override"))
      for (const auto& [k, v] : j.at("x_override").items()) rc.x_override[std::stoi(k)] = v.get<double>();
    return rc;
  });
}

inline void recipe_b(const json& cfg, const fs::path& dir, Summary& sum) {
  const auto th = detail::params(cfg, "theta0", Params(1.0, 1.0));
  const auto rc = recipe_b_config(cfg);
  std::vector<Trajectory> trs;
  const auto st = recipe_b_run(th, rc, &trs);
  const json state = recipe_b_json(st);
  const std::string text = state.dump(2) + "\n";
  write_file(dir / "recipe_b_state.json", text);
  // Replay from the serialized state; the re-serialized result must match.
  const auto replayed = recipe_b_replay(recipe_b_from_json(json::parse(text)), rc.flow,
                                        rc.pairing_tol, rc.distinct_min, rc.target_tol);
  sum.truth("replay_byte_identical", recipe_b_json(replayed).dump(2) + "\n" == text);
  sum.less("worst_pairing_loss", st.worst_pairing_loss, rc.pairing_tol);
  sum.greater("min_pairing_distance", st.min_pairing_distance, rc.distinct_min);
  sum.less("worst_target_error", st.worst_target_error, rc.target_tol);
  sum.truth("verified", st.verified);
  for (std::size_t i = 0; i < trs.size(); ++i)
    write_file(dir / ("trajectory_" + std::to_string(i + 1) + ".csv"), trajectory_csv(trs[i]));
  // The phase portrait shows the flows only: the inputs span many orders of
  // magnitude, so the minima curves would not share a useful window.
  std::vector<Curve> curves;
  for (std::size_t i = 0; i < trs.size(); ++i)
    curves.push_back(trajectory_curve(trs[i], "trajectory " + std::to_string(i + 1)));
  write_file(dir / "recipe_b.svg", render_svg(curves));
}

inline void one_point(const json& cfg, const fs::path& dir, Summary& sum, double w_lo = NAN,
                      double w_hi = NAN, double a_lo = NAN, double a_hi = NAN) {
  const auto act = detail::activation(cfg, "softplus");
  const auto th = detail::params(cfg, "theta0", Params(0.3, 1.0));
  const auto xs = detail::guarded("xs", [&] {
    return cfg.contains("xs") ? cfg.at("xs").get<std::vector<double>>()
                              : std::vector<double>{0.6, 1.0, 1.4, 1.8};
  });
  const double tol = detail::tol(cfg, "limit", 1e-4);
  const auto ss = one_point_samples(th, xs, act);
  std::vector<Trajectory> trs;
  const auto r = verify_one_point(th, ss, act, tol, {}, &trs);
  detail::write_json(dir / "one_point.json", report_json(r));
  for (std::size_t i = 0; i < r.limits.size(); ++i)
    sum.less("limit_" + std::to_string(i + 1) + "_error", sup_dist(r.limits[i], r.common_limit), tol);
  sum.greater("min_pairwise_angle", r.min_pairwise_angle, detail::tol(cfg, "angle", 1e-2));
  sum.truth("directions_independent", r.flag == DirectionFlag::Independent);
  auto wr = std::isfinite(w_lo) ? std::pair{w_lo, w_hi} : detail::w_extent(trs, 0.5);
  auto ar = std::isfinite(a_lo) ? std::pair{a_lo, a_hi} : detail::a_extent(trs, 0.25);
  detail::portrait(dir, "one_point.svg", trs, ss, act, detail::range(cfg, "w_range", wr),
                   detail::range(cfg, "a_range", ar), detail::get_or(cfg, "n", 400));
}

inline void two_point(const json& cfg, const fs::path& dir, Summary& sum,
                      std::vector<Sample> fallback = {}, std::optional<Params> th_fb = {},
                      const char* fb_act = "sigmoid", double w_lo = NAN, double w_hi = NAN,
                      double a_lo = NAN, double a_hi = NAN) {
  const auto act = detail::activation(cfg, fb_act);
  const auto th = detail::params(cfg, "theta0", th_fb);
  const auto ss = detail::samples(cfg, fallback);
  if (ss.size() != 2) throw ConfigError("two-point needs exactly two samples");
  const double cross = detail::tol(cfg, "cross", 1e-4);
  const double self = detail::tol(cfg, "self", 1e-10);
  const double sep = detail::tol(cfg, "separation", 0.05);
  std::vector<Trajectory> trs;
  const auto r = verify_two_point(th, ss[0], ss[1], act, cross, sep, {}, &trs);
  detail::write_json(dir / "two_point.json", report_json(r));
  sum.less("self_loss_1", r.self_losses.first, self);
  sum.less("self_loss_2", r.self_losses.second, self);
  sum.less("cross_loss_1", r.cross_losses.first, cross);
  sum.less("cross_loss_2", r.cross_losses.second, cross);
  sum.greater("separation", r.separation, sep);
  sum.truth("verdict", r.verdict);
  auto wr = std::isfinite(w_lo) ? std::pair{w_lo, w_hi} : detail::w_extent(trs, 0.25);
  auto ar = std::isfinite(a_lo) ? std::pair{a_lo, a_hi} : detail::a_extent(trs, 0.25);
  detail::portrait(dir, "two_point.svg", trs, ss, act, detail::range(cfg, "w_range", wr),
                   detail::range(cfg, "a_range", ar), detail::get_or(cfg, "n", 400));
}

inline void criterion(const json& cfg, const fs::path& dir, Summary& sum) {
  const auto act = detail::activation(cfg, "gaussian");
  const double w = detail::get_or(cfg, "w", 1.0), x0 = detail::get_or(cfg, "x0", 1.0);
  const auto r = nondegeneracy(act, w, x0);
  detail::write_json(dir / "criterion.json", report_json(r));
  sum.truth("criterion_finite", std::isfinite(r.criterion));
  if (r.verdict == Verdict::Nondegenerate)
    sum.greater("local_bound_ratio", r.worst_bound_ratio, 1.0);
  else if (r.verdict == Verdict::PowerLike)
    sum.less("grid_max_absF", r.grid_max_absF, 1e-12);
}

inline void fig1(const json& cfg, const fs::path& dir, Summary& sum) {
  two_point(cfg, dir, sum, {Sample(1.0, 1.0), Sample(12.307, 1.400)}, Params(0.922, 2.868),
            "sigmoid", -0.2, 1.2, 1.0, 3.2);
  if (fs::exists(dir / "two_point.svg")) fs::rename(dir / "two_point.svg", dir / "fig1.svg");
}

inline void fig2(const json& cfg, const fs::path& dir, Summary& sum) {
  one_point(cfg, dir, sum, -0.6, 1.2, -2.5, 1.3);
  if (fs::exists(dir / "one_point.svg")) fs::rename(dir / "one_point.svg", dir / "fig2.svg");
}

void suite(const json& cfg, const fs::path& dir, Summary& sum);

}  // namespace cmd

inline const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h = {
      {"simulate", cmd::simulate},
      {"minima", cmd::minima},
      {"intersect", cmd::intersect},
      {"predict-limit", cmd::predict},
      {"recipe-a", cmd::recipe_a},
      {"recipe-b", cmd::recipe_b},
      {"one-point", [](const json& c, const fs::path& d, Summary& s) { cmd::one_point(c, d, s); }},
      {"two-point", [](const json& c, const fs::path& d, Summary& s) { cmd::two_point(c, d, s); }},
      {"criterion", cmd::criterion},
      {"fig1", cmd::fig1},
      {"fig2", cmd::fig2},
      {"suite", cmd::suite},
  };
  return h;
}

namespace cmd {

// Fixed experiments plus a seeded random batch, each in its own subdirectory.
// Runs sequentially; independent parts could run concurrently since they never
// share files.
inline void suite(const json& cfg, const fs::path& dir, Summary& sum) {
  const auto seed = detail::get_or<std::uint64_t>(cfg, "seed", 20240601);
  const int instances = detail::get_or(cfg, "instances", 20);
  const json empty = json::object();
  const std::vector<std::pair<std::string, json>> fixed = {
      {"fig1", empty},
      {"fig2", empty},
      {"recipe-b", json{{"recipe_b", {{"n", 3}}}}},
      {"criterion", json{{"activation", "gaussian"}, {"w", 1.0}, {"x0", 1.0}}},
      {"criterion-exp", json{{"activation", "exp"}, {"w", 2.0}, {"x0", 0.5}}},
  };
  for (const auto& [name, sub] : fixed) {
    auto scoped = sum.scoped(name);
    const std::string cmd_name = name == "criterion-exp" ? "criterion" : name;
    handlers().at(cmd_name)(sub, dir / name, scoped);
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const Activation acts[] = {Activation::exp(), Activation::sigmoid(), Activation::softplus()};
  auto oracle = sum.scoped("random_oracle");
  json cases = json::array();
  for (int done = 0; done < instances;) {
    const Params th(u(rng), u(rng));
    const Sample s(u(rng), u(rng));
    if (std::abs(s.x0()) < 0.1 || std::abs(th.a) < 0.1) continue;
    const auto& act = acts[done % 3];
    const auto tr = integrate(th, s, act);
    const auto pred = predict_limit(th, s, act);
    const double diff = tr.limit ? sup_dist(pred, *tr.limit) : INFINITY;
    oracle.less("case_" + std::to_string(done + 1) + "_agreement", diff, 1e-6);
    cases.push_back({{"activation", act.name()}, {"theta0", th}, {"sample", s},
                     {"predicted", pred}, {"difference", finite_or_null(diff)}});
    ++done;
  }
  detail::write_json(dir / "random_oracle" / "cases.json", cases);

  std::uniform_real_distribution<double> uw(0.3, 2.0), ua(0.3, 2.5);
  auto ra = sum.scoped("random_recipe_a");
  json rcases = json::array();
  for (int done = 0; done < instances;) {
    const Params th(uw(rng), ua(rng));
    const Params ts(uw(rng), ua(rng));
    if (std::abs(ts.a * ts.a - th.a * th.a) < 0.2) continue;
    const auto s = recipe_a_sample(th, ts);
    const auto tr = integrate(th, s, Activation::exp());
    const double err = tr.limit ? sup_dist(*tr.limit, ts) : INFINITY;
    ra.less("case_" + std::to_string(done + 1) + "_target_error", err, 1e-6);
    rcases.push_back({{"theta0", th}, {"theta_star", ts}, {"sample", s},
                      {"target_error", finite_or_null(err)}});
    ++done;
  }
  detail::write_json(dir / "random_recipe_a" / "cases.json", rcases);
}

}  // namespace cmd

struct RunResult {
  int exit_code = 0;
  json summary;
  std::string message;  // error text for exit code 2
};

/// Runs one configuration, writing artifacts and summary.json into out_dir.
inline RunResult run(const json& config, const fs::path& out_dir) {
  RunResult res;
  std::string command;
  try {
    if (!config.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : config.items())
      if (!detail::known_keys().count(k)) throw ConfigError("unknown config field '" + k + "'");
    command = detail::guarded("command", [&] { return config.at("command").get<std::string>(); });
    const auto it = handlers().find(command);
    if (it == handlers().end()) throw ConfigError("unknown command '" + command + "'");
    fs::create_directories(out_dir);
    Summary sum;
    try {
      it->second(config, out_dir, sum);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      // A numerical failure is a failed verification, not a bad config.
      sum.truth(std::string("completed: ") + e.what(), false);
    }
    res.summary = summary_json(command, sum);
    write_file(out_dir / "summary.json", res.summary.dump(2) + "\n");
    res.exit_code = sum.all_passed() ? 0 : 1;
  } catch (const ConfigError& e) {
    res.exit_code = 2;
    res.message = e.what();
  } catch (const fs::filesystem_error& e) {
    res.exit_code = 2;
    res.message = e.what();
  }
  return res;
}

}  // namespace overlap::cli
