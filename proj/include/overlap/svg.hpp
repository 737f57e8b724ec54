#pragma once

// Phase-portrait SVG: trajectories dashed, minima curves solid. The viewBox is
// in data units (w horizontal, a vertical, flipped), padded by 5% per side.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "io.hpp"

namespace overlap {

enum class CurveStyle { Trajectory, Minima };

struct Curve {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (w, a); non-finite points break the line
  CurveStyle style = CurveStyle::Trajectory;
};

struct SvgOptions {
  int size_px = 640;  // longer side; the other follows the data aspect ratio
  // Optional clip of the plotted region; NaN means "from the data".
  double w_lo = std::numeric_limits<double>::quiet_NaN(), w_hi = w_lo;
  double a_lo = w_lo, a_hi = w_lo;
};

inline Curve trajectory_curve(const Trajectory& tr, std::string label) {
  Curve c{std::move(label), {}, CurveStyle::Trajectory};
  for (const auto& s : tr.states) c.points.emplace_back(s.theta.w.at(0), s.theta.a);
  return c;
}

inline Curve minima_curve_points(const MinimaCurve& mc, std::string label) {
  Curve c{std::move(label), {}, CurveStyle::Minima};
  for (std::size_t i = 0; i < mc.w_grid.size(); ++i) c.points.emplace_back(mc.w_grid[i], mc.a_values[i]);
  return c;
}

inline std::string render_svg(const std::vector<Curve>& curves, const SvgOptions& opt = {}) {
  if (curves.empty()) throw EmptyInput("render_svg needs at least one curve");
  double wl = std::numeric_limits<double>::infinity(), wh = -wl, al = wl, ah = -wl;
  for (const auto& c : curves) {
    if (c.points.size() < 2) throw EmptyInput("curve '" + c.label + "' has fewer than 2 points");
    for (auto [w, a] : c.points) {
      if (!std::isfinite(w) || !std::isfinite(a)) continue;
      wl = std::min(wl, w);
      wh = std::max(wh, w);
      al = std::min(al, a);
      ah = std::max(ah, a);
    }
  }
  if (!(wl <= wh) || !(al <= ah)) throw EmptyInput("no finite points to draw");
  if (std::isfinite(opt.w_lo)) wl = opt.w_lo;
  if (std::isfinite(opt.w_hi)) wh = opt.w_hi;
  if (std::isfinite(opt.a_lo)) al = opt.a_lo;
  if (std::isfinite(opt.a_hi)) ah = opt.a_hi;
  const double sw = std::max(wh - wl, 1e-9), sa = std::max(ah - al, 1e-9);
  const double mw = 0.05 * sw, ma = 0.05 * sa;
  const double vx = wl - mw, vy = -(ah + ma), vw = sw + 2 * mw, vh = sa + 2 * ma;

  // Isotropic pixel scale, so stroke widths given in data units look uniform.
  const double px = opt.size_px / std::max(vw, vh);
  const long width = std::lround(vw * px), height = std::lround(vh * px);
  const std::string stroke = num(1.5 / px), dash = num(6.0 / px) + ' ' + num(4.0 / px);

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"" << num(vx) << ' ' << num(vy) << ' ' << num(vw) << ' ' << num(vh) << "\">\n";
  std::size_t traj_i = 0, min_i = 0;
  for (const auto& c : curves) {
    const bool dashed = c.style == CurveStyle::Trajectory;
    const char* color = palette[(dashed ? traj_i++ : min_i++) % 8];
    os << "<path fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"" << stroke << "\" stroke-linejoin=\"round\"";
    if (dashed) os << " stroke-dasharray=\"" << dash << "\"";
    os << " d=\"";
    bool pen_down = false, first = true;
    for (auto [w, a] : c.points) {
      // Clip to the view so that poles and tails do not swamp the figure.
      const bool ok = std::isfinite(w) && std::isfinite(a) && a >= al - ma && a <= ah + ma &&
                      w >= wl - mw && w <= wh + mw;
      if (!ok) {
        pen_down = false;
        continue;
      }
      os << (pen_down ? " L" : first ? "M" : " M") << num(w) << ',' << num(-a);
      pen_down = true;
      first = false;
    }
    os << "\"><title>" << c.label << "</title></path>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace overlap
