#pragma once

// Curve helpers shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <random>

#include "confgeom/geodesic.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace confgeom;

inline Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline Vec random_vec(std::mt19937_64& rng, int m, double scale) {
  auto p = oracle::random_point(rng, m, scale);
  return Eigen::Map<Vec>(p.data(), m);
}

/// Largest distance of trace points from the circle through three of them.
inline double circle_deviation(const GeodesicTrace& trace) {
  const auto& S = trace.samples;
  const Vec a = S.front().x, b = S[S.size() / 2].x, c = S.back().x;
  const Vec u = b - a, w = c - a;
  const double uu = u.dot(u), ww = w.dot(w), uw = u.dot(w);
  const double det = uu * ww - uw * uw;
  const double alpha = ww * (uu - uw) / (2 * det), beta = uu * (ww - uw) / (2 * det);
  const Vec center = a + alpha * u + beta * w;
  const double radius = (a - center).norm();
  // normal of the plane through a, b, c
  double dev = 0.0;
  for (const auto& s : S) {
    const Vec d = s.x - a;
    const Vec in_plane = d - (d.dot(u) * ww - d.dot(w) * uw) / det * u - (d.dot(w) * uu - d.dot(u) * uw) / det * w;
    dev = std::max(dev, in_plane.norm());
    dev = std::max(dev, std::abs((s.x - center).norm() - radius));
  }
  return dev;
}

}  // namespace fixtures
