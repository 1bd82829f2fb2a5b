#pragma once

// Conformal acceleration of curves and the conformal geodesic integrator.
//
// Curves are described by coordinate derivatives (x, x', x'', x''').  The
// covariant derivatives A = nabla^g_v v and J = nabla^g_v A of the gauge
// Levi-Civita connection are formed internally.

#include <iosfwd>
#include <vector>

#include "confgeom/conformal.hpp"

namespace confgeom {

struct CurveState {
  double t = 0.0;
  Vec x;  // position
  Vec v;  // x'
  Vec w;  // x''
};

struct TraceSample {
  double t;
  Vec x, v, w;
  double residual;
};

struct GeodesicTrace {
  int dim = 0;
  std::vector<TraceSample> samples;

  double max_residual() const;
  /// Columns t, x1..xm, v1..vm, w1..wm, residual_norm.
  void write_csv(std::ostream& out) const;
};

/// Gauge data along a curve: metric, Christoffel symbols and their first
/// derivatives, and the gauge Schouten tensor.
struct GaugeFrame {
  Mat g;
  std::vector<double> gamma;   // (k * m + i) * m + j
  std::vector<double> dgamma;  // ((k * m + i) * m + j) * m + l = d_l Gamma^k_ij
  Mat h;

  static GaugeFrame at(const ConformalChart& chart, const Vec& x, const LowDimStructure& low);
  Vec gamma_vv(const Vec& a, const Vec& b) const;
};

/// Covariant acceleration A = x'' + Gamma(x', x').
Vec covariant_acceleration(const GaugeFrame& G, const CurveState& s);
/// Covariant jerk J = nabla_v A from the coordinate third derivative.
Vec covariant_jerk(const GaugeFrame& G, const CurveState& s, const Vec& x3);

/// Conformal acceleration of the curve at s with coordinate third derivative x3.
Vec conformal_acceleration(const ConformalChart& chart, const CurveState& s, const Vec& x3,
                           const LowDimStructure& low = {});
/// Split of a vector into its part along v and the g-orthogonal remainder.
std::pair<Vec, Vec> tangential_normal(const Mat& g, const Vec& v, const Vec& a);

/// Covector theta at x making nabla^g + theta~ adapted to the curve.
Vec adapted_theta_along_curve(const ConformalChart& chart, const CurveState& s);

/// |a(gamma) - c(v, v) h^nabla(v)^#| with nabla the adapted Weyl structure,
/// its Schouten tensor obtained from the curvature of an extension of theta.
double accel_equivalence_check(const ConformalChart& chart, const CurveState& s, const Vec& x3,
                               const LowDimStructure& low = {});

struct IntegrationOptions {
  double t0 = 0.0;
  double t1 = 1.0;
  double step = 1e-3;
  /// Record every n-th step.
  int sample_every = 1;
};

/// Coordinate third derivative that makes the conformal acceleration vanish.
Vec geodesic_third_derivative(const ConformalChart& chart, const CurveState& s, const LowDimStructure& low = {});

/// Fixed-step classical Runge-Kutta integration of a(gamma) = 0.
GeodesicTrace integrate_conformal_geodesic(const ConformalChart& chart, const CurveState& init,
                                           const IntegrationOptions& options = {}, const LowDimStructure& low = {});

}  // namespace confgeom
