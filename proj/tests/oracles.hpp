#pragma once

// Test-side oracles that do not share code paths with the library.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Fn = std::function<double(const Vec&)>;

/// Richardson-extrapolated central difference of d f / dx_i.
inline double diff1(const Fn& f, Vec p, int i, double h = 1e-3) {
  auto central = [&](double s) {
    Vec a = p, b = p;
    a[static_cast<std::size_t>(i)] += s;
    b[static_cast<std::size_t>(i)] -= s;
    return (f(a) - f(b)) / (2 * s);
  };
  return (4 * central(h / 2) - central(h)) / 3;
}

/// Nested Richardson differences along the listed variables.
inline double diff(const Fn& f, const Vec& p, std::vector<int> vars, double h = 1e-2) {
  if (vars.empty()) return f(p);
  int last = vars.back();
  vars.pop_back();
  Fn inner = [&, vars](const Vec& q) { return diff(f, q, vars, h); };
  return diff1(inner, p, last, h);
}

/// Random polynomial of total degree <= degree in `dim` variables, as source text.
inline std::string random_polynomial(std::mt19937_64& rng, int dim, int degree, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::string s = std::to_string(u(rng));
  for (int i = 1; i <= dim; ++i) {
    s += " + " + std::to_string(u(rng)) + "*x" + std::to_string(i);
    if (degree >= 2)
      for (int j = i; j <= dim; ++j) s += " + " + std::to_string(u(rng)) + "*x" + std::to_string(i) + "*x" + std::to_string(j);
    if (degree >= 3)
      for (int j = i; j <= dim; ++j) s += " + " + std::to_string(u(rng)) + "*x" + std::to_string(i) + "*x" + std::to_string(j) + "^2";
  }
  return s;
}

inline Vec random_point(std::mt19937_64& rng, int dim, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec p(static_cast<std::size_t>(dim));
  for (auto& v : p) v = u(rng);
  return p;
}

}  // namespace oracle

namespace oracle {

/// Random symmetric metric delta + small cubic polynomials, as source strings.
inline std::vector<std::vector<std::string>> random_metric(std::mt19937_64& rng, int dim, double scale = 0.15) {
  std::vector<std::vector<std::string>> g(static_cast<std::size_t>(dim), std::vector<std::string>(static_cast<std::size_t>(dim)));
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) {
      std::string p = random_polynomial(rng, dim, 3, scale);
      std::string s = (i == j ? "1 + " : "") + std::string("(") + p + ")";
      g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s;
      g[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = s;
    }
  return g;
}

/// Random affine 1-form components.
inline std::vector<std::string> random_linear_form(std::mt19937_64& rng, int dim, double scale = 0.5) {
  std::vector<std::string> out;
  for (int i = 0; i < dim; ++i) out.push_back(random_polynomial(rng, dim, 1, scale));
  return out;
}

}  // namespace oracle
