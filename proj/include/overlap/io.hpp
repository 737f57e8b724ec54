#pragma once

// CSV and JSON export. Numbers in CSV use the shortest decimal that reads back
// to the same double, so files reload bit-exactly and compare byte-for-byte.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "activation.hpp"
#include "errors.hpp"
#include "gradflow.hpp"
#include "minima.hpp"
#include "recipes.hpp"
#include "types.hpp"

namespace overlap {

using json = nlohmann::json;

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general);
  return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------
// CSV

inline std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  const std::size_t d = tr.states.empty() ? 1 : tr.states.front().theta.w.size();
  os << 't';
  for (std::size_t i = 1; i <= d; ++i) os << ",w_" << i;
  os << ",a,loss,grad_norm\n";
  for (const auto& s : tr.states) {
    os << num(s.t);
    for (double w : s.theta.w) os << ',' << num(w);
    os << ',' << num(s.theta.a) << ',' << num(s.loss) << ',' << num(s.grad_norm) << '\n';
  }
  return os.str();
}

inline std::string minima_csv(const MinimaCurve& c) {
  std::ostringstream os;
  os << "w,a,is_pole\n";
  for (std::size_t i = 0; i < c.w_grid.size(); ++i)
    os << num(c.w_grid[i]) << ',' << num(c.a_values[i]) << ',' << (c.is_pole[i] ? 1 : 0) << '\n';
  return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << text;
  if (!f) throw ConfigError("write failed for " + p.string());
}

// ---------------------------------------------------------------------------
// JSON: plain types

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline void to_json(json& j, const Params& p) { j = json{{"w", p.w}, {"a", p.a}}; }
inline void from_json(const json& j, Params& p) {
  p.w = j.at("w").get<std::vector<double>>();
  p.a = j.at("a").get<double>();
}

inline void to_json(json& j, const Sample& s) { j = json{{"x", s.x}, {"y", s.y}}; }
inline void from_json(const json& j, Sample& s) {
  s.x = j.at("x").get<std::vector<double>>();
  s.y = j.at("y").get<double>();
}

inline void to_json(json& j, const Interval& iv) { j = json{{"lo", iv.lo}, {"hi", iv.hi}}; }
inline void from_json(const json& j, Interval& iv) {
  iv.lo = j.at("lo").get<double>();
  iv.hi = j.at("hi").get<double>();
}

inline void to_json(json& j, const SegmentBase& b) {
  j = json{{"kind", kind_name(b.kind)}, {"q", b.q},           {"scale", b.scale},
           {"shift", b.shift},          {"amplitude", b.amplitude}};
}
inline void from_json(const json& j, SegmentBase& b) {
  b.kind = kind_from_name(j.value("kind", std::string("exp")));
  b.q = j.value("q", 1.0);
  b.scale = j.value("scale", 1.0);
  b.shift = j.value("shift", 0.0);
  b.amplitude = j.value("amplitude", 1.0);
}

inline void to_json(json& j, const Segment& s) {
  j = json{{"lo", s.interval.lo}, {"hi", s.interval.hi}, {"base", s.base}};
}
inline void from_json(const json& j, Segment& s) {
  s.interval = {j.at("lo").get<double>(), j.at("hi").get<double>()};
  s.base = j.contains("base") ? j.at("base").get<SegmentBase>() : SegmentBase{};
}

inline void to_json(json& j, const ExceptionPoint& e) { j = json{{"z", e.z}, {"value", e.value}}; }
inline void from_json(const json& j, ExceptionPoint& e) {
  e.z = j.at("z").get<double>();
  e.value = j.at("value").get<double>();
}

// ---------------------------------------------------------------------------
// Activation JSON: {"kind": ..., "q": ...} for builtins; piecewise adds
// segments, exceptions, smoothness, shape and (on output) the blend table.

inline json activation_json(const Activation& act) {
  json j{{"kind", kind_name(act.kind())}};
  if (act.kind() == Kind::Power) j["q"] = act.q();
  if (const auto* pw = act.piecewise()) {
    j["smoothness"] = pw->smoothness();
    j["shape"] = pw->shape() == BlendShape::Hermite ? "hermite" : "monotone";
    j["segments"] = pw->segments();
    j["exceptions"] = pw->exceptions();
    json blends = json::array();
    for (const auto& gap : pw->blends()) {
      json g = json::array();
      for (const auto& p : gap)
        g.push_back({{"z0", p.z0}, {"z1", p.z1}, {"c", std::vector<double>(p.c.begin(), p.c.end())}});
      blends.push_back(std::move(g));
    }
    j["blends"] = std::move(blends);
  }
  return j;
}

inline Activation activation_from_json(const json& j) {
  try {
    const Kind k = kind_from_name(j.at("kind").get<std::string>());
    if (k != Kind::Piecewise) return Activation::builtin(k, j.value("q", 1.0));
    const auto segs = j.at("segments").get<std::vector<Segment>>();
    const auto exc = j.value("exceptions", std::vector<ExceptionPoint>{});
    const std::string shape = j.value("shape", std::string("monotone"));
    if (shape != "monotone" && shape != "hermite")
      throw ConfigError("unknown blend shape '" + shape + "'");
    return make_piecewise(segs, exc, j.value("smoothness", 1),
                          shape == "hermite" ? BlendShape::Hermite : BlendShape::Monotone);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad activation: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Results

inline json trajectory_json(const Trajectory& tr) {
  json states = json::array();
  for (const auto& s : tr.states)
    states.push_back({{"t", s.t}, {"theta", s.theta}, {"loss", s.loss}, {"grad_norm", s.grad_norm}});
  return json{{"status", status_name(tr.status)},
              {"limit", tr.limit ? json(*tr.limit) : json(nullptr)},
              {"rejected_steps", tr.rejected_steps},
              {"states", std::move(states)}};
}

inline json minima_json(const MinimaCurve& c) {
  std::vector<json> a;
  for (double v : c.a_values) a.push_back(finite_or_null(v));
  return json{{"sample", c.sample}, {"w", c.w_grid},      {"a", a},
              {"poles", c.poles},   {"horizontal", c.horizontal}};
}

inline json report_json(const TwoPointReport& r) {
  return json{{"theta0", r.theta0},
              {"s1", r.s1},
              {"s2", r.s2},
              {"limit1", r.limit1},
              {"limit2", r.limit2},
              {"self_losses", {r.self_losses.first, r.self_losses.second}},
              {"cross_losses", {r.cross_losses.first, r.cross_losses.second}},
              {"separation", r.separation},
              {"tol", r.tol},
              {"sep_min", r.sep_min},
              {"verdict", r.verdict}};
}

inline json report_json(const OnePointReport& r) {
  std::vector<json> slopes;
  for (double s : r.formula_slopes) slopes.push_back(finite_or_null(s));
  return json{{"theta0", r.theta0},
              {"samples", r.samples},
              {"limits", r.limits},
              {"common_limit", r.common_limit},
              {"directions", r.directions},
              {"formula_slopes", slopes},
              {"min_pairwise_angle", r.min_pairwise_angle},
              {"max_limit_error", r.max_limit_error},
              {"flag", direction_flag_name(r.flag)},
              {"verdict", r.verdict}};
}

inline json report_json(const NondegeneracyReport& r) {
  return json{{"w", r.w},
              {"x0", r.x0},
              {"criterion", r.criterion},
              {"verdict", verdict_name(r.verdict)},
              {"grid_min_absF", r.grid_min_absF},
              {"grid_max_absF", r.grid_max_absF},
              {"bound_constant", r.bound_constant},
              {"bound_holds", r.bound_holds},
              {"worst_bound_ratio", finite_or_null(r.worst_bound_ratio)}};
}

inline json report_json(const IntersectionResult& r) {
  return json{{"points", r.points},
              {"all_coincident", r.all_coincident},
              {"pole_in_range", r.pole_in_range}};
}

// ---------------------------------------------------------------------------
// Recipe B state: everything needed to rebuild sigma_n and re-run the flows.

inline json recipe_b_json(const RecipeBState& st) {
  json steps = json::array();
  for (const auto& s : st.steps)
    steps.push_back({{"index", s.index},
                     {"k", s.k},
                     {"lambda", s.lambda},
                     {"mu", s.mu},
                     {"x_bound", s.x_bound},
                     {"x_tilde", s.x_tilde},
                     {"rate", s.rate}});
  json pairs = json::array();
  for (const auto& [i, j] : st.pairings) pairs.push_back({i, j});
  return json{{"n", st.n},
              {"theta0", st.theta0},
              {"activation", activation_json(st.sigma_n)},
              {"samples", st.samples},
              {"targets", st.targets},
              {"limits", st.limits},
              {"E", st.E},
              {"pairings", pairs},
              {"steps", steps},
              {"worst_pairing_loss", st.worst_pairing_loss},
              {"min_pairing_distance", finite_or_null(st.min_pairing_distance)},
              {"worst_target_error", st.worst_target_error},
              {"verified", st.verified}};
}

inline RecipeBState recipe_b_from_json(const json& j) {
  try {
    RecipeBState st;
    st.n = j.at("n").get<int>();
    st.theta0 = j.at("theta0").get<Params>();
    st.segments = j.at("activation").at("segments").get<std::vector<Segment>>();
    st.sigma_n = activation_from_json(j.at("activation"));
    st.samples = j.at("samples").get<std::vector<Sample>>();
    st.targets = j.at("targets").get<std::vector<Params>>();
    st.limits = j.at("limits").get<std::vector<Params>>();
    st.E = j.at("E").get<std::vector<Interval>>();
    for (const auto& p : j.at("pairings")) st.pairings.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    for (const auto& s : j.at("steps"))
      st.steps.push_back({s.at("index").get<int>(), s.at("k").get<int>(), s.at("lambda").get<double>(),
                          s.at("mu").get<double>(), s.at("x_bound").get<double>(),
                          s.at("x_tilde").get<double>(), s.at("rate").get<double>()});
    st.worst_pairing_loss = j.at("worst_pairing_loss").get<double>();
    const auto& md = j.at("min_pairing_distance");
    st.min_pairing_distance = md.is_null() ? std::numeric_limits<double>::infinity() : md.get<double>();
    st.worst_target_error = j.at("worst_target_error").get<double>();
    st.verified = j.at("verified").get<bool>();
    return st;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad recipe B state: ") + e.what());
  }
}

}  // namespace overlap
