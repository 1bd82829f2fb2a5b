#pragma once

// Ambient spaces, submanifolds and Weyl 1-forms shared by the unit and
// acceptance suites.

#include <random>
#include <string>
#include <vector>

#include "confgeom/embedding.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace confgeom;

/// Unit sphere S^n in R^{n+1} through inverse stereographic projection.
inline Immersion unit_sphere(int n) {
  std::string r2 = "(0";
  for (int i = 1; i <= n; ++i) r2 += " + x" + std::to_string(i) + "^2";
  r2 += ")";
  std::vector<std::string> c;
  for (int i = 1; i <= n; ++i) c.push_back("2*x" + std::to_string(i) + "/(1 + " + r2 + ")");
  c.push_back("(" + r2 + " - 1)/(1 + " + r2 + ")");
  return Immersion::from_strings(ConformalChart::euclidean(n + 1), n, c);
}

/// R^3 x S^2 with the product of the flat and the unit round metric.
inline ConformalChart product_r3_s2() {
  std::vector<std::vector<std::string>> g(5, std::vector<std::string>(5, "0"));
  for (int i = 0; i < 3; ++i) g[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = "1";
  g[3][3] = g[4][4] = "4/(1 + x4^2 + x5^2)^2";
  return ConformalChart::from_strings(g);
}

/// Random immersion x -> (x + small cubic, small cubic) of R^n into R^m.
inline Immersion random_immersion(std::mt19937_64& rng, const ConformalChart& ambient, int n, double scale = 0.3) {
  std::vector<std::string> c;
  for (int a = 0; a < ambient.dim(); ++a) {
    std::string poly = oracle::random_polynomial(rng, n, 3, scale);
    c.push_back(a < n ? "x" + std::to_string(a + 1) + " + " + poly : poly);
  }
  return Immersion::from_strings(ambient, n, c);
}

inline std::vector<Expr> random_theta(std::mt19937_64& rng, int m) {
  std::vector<Expr> out;
  for (int i = 0; i < m; ++i) out.push_back(parse(oracle::random_polynomial(rng, m, 2, 0.5)));
  return out;
}

}  // namespace fixtures
