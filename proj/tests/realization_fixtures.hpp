#pragma once

// Random realization instances shared by the unit and acceptance suites.

#include <cstdint>
#include <random>
#include <vector>

#include "confgeom/realization.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace confgeom;

inline std::size_t uz(int i) { return static_cast<std::size_t>(i); }

inline Expr poly(std::mt19937_64& rng, int dim, int degree, double scale) {
  return parse(oracle::random_polynomial(rng, dim, degree, scale));
}

inline ExprMatrix zero_matrix(int rows, int cols) {
  return ExprMatrix(uz(rows), std::vector<Expr>(uz(cols), Expr::constant(0.0)));
}

inline ExprMatrix symmetric_poly(std::mt19937_64& rng, int n, int degree, double scale) {
  ExprMatrix a = zero_matrix(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) a[uz(i)][uz(j)] = a[uz(j)][uz(i)] = poly(rng, n, degree, scale);
  return a;
}

inline Mat random_spd(std::mt19937_64& rng, int r) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  Mat a(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) a(i, j) = u(rng);
  return Mat::Identity(r, r) + 0.5 * (a + a.transpose());
}

/// Symbolic trace-free projection against g (test-side cofactor inverse).
inline ExprMatrix trace_free_2(const ExprMatrix& P, const ExprMatrix& g) {
  const Expr det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
  const Expr tr = (g[1][1] * P[0][0] + g[0][0] * P[1][1] - 2.0 * g[0][1] * P[0][1]) / det;
  ExprMatrix out = P;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out[uz(i)][uz(j)] = P[uz(i)][uz(j)] - 0.5 * tr * g[uz(i)][uz(j)];
  return out;
}

struct Instance {
  RealizationData geometry;
  PrescribedInvariants targets;
  std::vector<std::vector<double>> samples;
};

/// Curved base surface, rank-2 bundle with a metric connection, random B0, mu, rho.
inline Instance random_surface_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Instance I;
  RealizationData d = RealizationData::trivial(2, 2);
  d.base_metric = ConformalChart::from_strings(oracle::random_metric(rng, 2, 0.1)).metric_exprs();
  d.fiber_metric = random_spd(rng, 2);
  const Mat gi = d.fiber_metric.inverse();
  for (int i = 0; i < 2; ++i) {
    const Expr s = poly(rng, 2, 2, 0.3);  // A_i = g_nu^{-1} S_i with S_i skew
    d.connection[uz(i)] = {{-gi(0, 1) * s, gi(0, 0) * s}, {-gi(1, 1) * s, gi(1, 0) * s}};
  }
  for (int al = 0; al < 2; ++al) d.B0[uz(al)] = trace_free_2(symmetric_poly(rng, 2, 2, 0.3), d.base_metric);
  d.base_low.mobius = MobiusStructure(d.base_chart(), symmetric_poly(rng, 2, 2, 0.3));
  I.geometry = d;
  I.targets.mu = zero_matrix(2, 2);
  for (auto& row : I.targets.mu)
    for (auto& e : row) e = poly(rng, 2, 2, 0.3);
  I.targets.rho = symmetric_poly(rng, 2, 2, 0.3);
  for (int k = 0; k < 3; ++k) I.samples.push_back(oracle::random_point(rng, 2, 0.3));
  return I;
}

}  // namespace fixtures
