#pragma once

// Parameters and samples of the one-hidden-neuron model f(theta, x) = a * sigma(x^T w).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace overlap {

struct Params {
  std::vector<double> w;  // hidden weights, length M-1
  double a = 0.0;         // output weight

  Params() = default;
  Params(std::vector<double> w_, double a_) : w(std::move(w_)), a(a_) {}
  Params(double w_, double a_) : w{w_}, a(a_) {}

  std::size_t dim() const { return w.size() + 1; }  // M
  double w0() const { return w.at(0); }
  bool finite() const {
    return std::isfinite(a) &&
           std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); });
  }
  std::vector<double> flat() const {
    std::vector<double> v = w;
    v.push_back(a);
    return v;
  }
  static Params from_flat(const std::vector<double>& v) {
    return Params(std::vector<double>(v.begin(), v.end() - 1), v.back());
  }
  bool operator==(const Params&) const = default;
};

struct Sample {
  std::vector<double> x;  // input, length M-1
  double y = 0.0;         // target

  Sample() = default;
  Sample(std::vector<double> x_, double y_) : x(std::move(x_)), y(y_) {}
  Sample(double x_, double y_) : x{x_}, y(y_) {}

  double x0() const { return x.at(0); }
  bool operator==(const Sample&) const = default;
};

inline double dot(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) throw PreconditionError("dimension mismatch between x and w");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm2(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

inline double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

/// Sup-norm distance between two parameter points of equal dimension.
inline double sup_dist(const Params& p, const Params& q) {
  if (p.w.size() != q.w.size()) throw PreconditionError("dimension mismatch between params");
  double m = std::abs(p.a - q.a);
  for (std::size_t i = 0; i < p.w.size(); ++i) m = std::max(m, std::abs(p.w[i] - q.w[i]));
  return m;
}

}  // namespace overlap
