// overlap_lab: command-line front end for the experiment runner.
//
//   overlap_lab fig1 --out out/fig1
//   overlap_lab --config configs/suite.json
//   overlap_lab criterion --activation gaussian --w 1 --x0 1

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "overlap/cli.hpp"

namespace {

using overlap::json;

std::vector<double> split_numbers(const std::string& text, char sep) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw overlap::ConfigError("not a number: '" + item + "'");
    }
  }
  return out;
}

// "x,y" with x possibly "x1;x2;..." for higher-dimensional inputs.
json parse_sample(const std::string& text) {
  const auto comma = text.rfind(',');
  if (comma == std::string::npos) throw overlap::ConfigError("sample must be 'x,y': " + text);
  const auto x = split_numbers(text.substr(0, comma), ';');
  const auto y = split_numbers(text.substr(comma + 1), ';');
  if (x.empty() || y.size() != 1) throw overlap::ConfigError("sample must be 'x,y': " + text);
  return json{{"x", x}, {"y", y[0]}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-flow overlap experiments"};
  app.set_help_all_flag("--help-all");

  std::string command, config_path, out_dir, activation;
  std::vector<double> w0, theta_star_w, xs, w_range, a_range;
  std::vector<std::string> samples, tolerances;
  double q = 0, a0 = 0, theta_star_a = 0, w = 0, x0 = 0;
  int n = 0, instances = 0, rb_n = 0, rb_ball_m = 0;
  double rb_ball_radius = 0;
  bool rb_ball = false;
  std::uint64_t seed = 0;

  app.add_option("command", command, "one of: simulate, minima, intersect, predict-limit, recipe-a, "
                                     "recipe-b, one-point, two-point, criterion, fig1, fig2, suite");
  app.add_option("--config", config_path, "JSON config file; flags override its fields")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (OVERLAP_LAB_OUT takes precedence)");
  auto* o_act = app.add_option("--activation", activation, "exp|sigmoid|softplus|gaussian|power");
  auto* o_q = app.add_option("--q", q, "power exponent");
  auto* o_w0 = app.add_option("--w0", w0, "initial input weights")->delimiter(',');
  auto* o_a0 = app.add_option("--a0", a0, "initial output weight");
  auto* o_tsw = app.add_option("--theta-star-w", theta_star_w, "target input weights")->delimiter(',');
  auto* o_tsa = app.add_option("--theta-star-a", theta_star_a, "target output weight");
  auto* o_s = app.add_option("--sample", samples, "sample 'x,y' (x components separated by ';')");
  auto* o_xs = app.add_option("--xs", xs, "one-point inputs")->delimiter(',');
  auto* o_wr = app.add_option("--w-range", w_range, "w range: lo hi")->expected(2);
  auto* o_ar = app.add_option("--a-range", a_range, "a range: lo hi")->expected(2);
  auto* o_n = app.add_option("--n", n, "grid size");
  auto* o_w = app.add_option("--w", w, "criterion weight");
  auto* o_x0 = app.add_option("--x0", x0, "criterion base input");
  app.add_option("--tol", tolerances, "tolerance override key=value");
  auto* o_seed = app.add_option("--seed", seed, "random seed for suites");
  auto* o_inst = app.add_option("--instances", instances, "random instances per suite batch");
  auto* o_rbn = app.add_option("--recipe-b-n", rb_n, "recipe B chain length");
  auto* o_rbb = app.add_flag("--recipe-b-ball", rb_ball, "recipe B dense-ball mode");
  auto* o_rbm = app.add_option("--recipe-b-ball-m", rb_ball_m, "recipe B ball targets");
  auto* o_rbr = app.add_option("--recipe-b-ball-radius", rb_ball_radius, "recipe B ball radius");

  CLI11_PARSE(app, argc, argv);

  json cfg = json::object();
  try {
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      try {
        cfg = json::parse(f);
      } catch (const json::exception& e) {
        throw overlap::ConfigError(std::string("cannot parse config: ") + e.what());
      }
    }
    if (!command.empty()) cfg["command"] = command;
    if (*o_act) {
      cfg["activation"] = json{{"kind", activation}};
      if (*o_q) cfg["activation"]["q"] = q;
    } else if (*o_q) {
      throw overlap::ConfigError("--q needs --activation power");
    }
    if (*o_w0 || *o_a0) {
      if (!(*o_w0 && *o_a0)) throw overlap::ConfigError("--w0 and --a0 go together");
      cfg["theta0"] = json{{"w", w0}, {"a", a0}};
    }
    if (*o_tsw || *o_tsa) {
      if (!(*o_tsw && *o_tsa)) throw overlap::ConfigError("--theta-star-w and --theta-star-a go together");
      cfg["theta_star"] = json{{"w", theta_star_w}, {"a", theta_star_a}};
    }
    if (*o_s) {
      cfg["samples"] = json::array();
      for (const auto& s : samples) cfg["samples"].push_back(parse_sample(s));
    }
    if (*o_xs) cfg["xs"] = xs;
    if (*o_wr) cfg["w_range"] = w_range;
    if (*o_ar) cfg["a_range"] = a_range;
    if (*o_n) cfg["n"] = n;
    if (*o_w) cfg["w"] = w;
    if (*o_x0) cfg["x0"] = x0;
    for (const auto& t : tolerances) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw overlap::ConfigError("--tol expects key=value: " + t);
      cfg["tolerances"][t.substr(0, eq)] = split_numbers(t.substr(eq + 1), ',').at(0);
    }
    if (*o_seed) cfg["seed"] = seed;
    if (*o_inst) cfg["instances"] = instances;
    if (*o_rbn) cfg["recipe_b"]["n"] = rb_n;
    if (*o_rbb) cfg["recipe_b"]["ball"] = rb_ball;
    if (*o_rbm) cfg["recipe_b"]["ball_m"] = rb_ball_m;
    if (*o_rbr) cfg["recipe_b"]["ball_radius"] = rb_ball_radius;
  } catch (const overlap::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  std::string dir = out_dir;
  if (dir.empty() && cfg.contains("output_dir") && cfg["output_dir"].is_string())
    dir = cfg["output_dir"].get<std::string>();
  if (dir.empty()) dir = "out/" + cfg.value("command", std::string("run"));
  if (const char* env = std::getenv("OVERLAP_LAB_OUT"); env && *env) dir = env;

  const auto res = overlap::cli::run(cfg, dir);
  if (res.exit_code == 2) {
    std::cerr << "config error: " << res.message << "\n";
    return 2;
  }
  std::size_t failed = 0;
  for (const auto& c : res.summary["checks"])
    if (!c["passed"].get<bool>()) {
      ++failed;
      std::cerr << "FAIL " << c["name"].get<std::string>() << "\n";
    }
  std::cout << res.summary["command"].get<std::string>() << ": " << res.summary["checks"].size() - failed
            << "/" << res.summary["checks"].size() << " checks passed; artifacts in " << dir << "\n";
  return res.exit_code;
}
