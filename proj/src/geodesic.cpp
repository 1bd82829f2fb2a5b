#include "confgeom/geodesic.hpp"

#include <cmath>
#include <ostream>

#include "confgeom/errors.hpp"

namespace confgeom {

namespace {

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

std::span<const double> span_of(const Vec& x) { return {x.data(), static_cast<std::size_t>(x.size())}; }

double speed2(const Mat& g, const Vec& v) {
  const double s = v.dot(g * v);
  if (!(s > 1e-14)) throw DomainError("curve velocity is null");
  return s;
}

/// Symmetric Schouten tensor of the gauge Levi-Civita connection.
Mat gauge_schouten(const ConformalChart& chart, const Vec& x, const LowDimStructure& low) {
  return schouten(WeylStructure(chart), span_of(x), low);
}

}  // namespace

double GeodesicTrace::max_residual() const {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.residual);
  return m;
}

void GeodesicTrace::write_csv(std::ostream& out) const {
  out << "t";
  for (const char* prefix : {"x", "v", "w"})
    for (int i = 1; i <= dim; ++i) out << ',' << prefix << i;
  out << ",residual_norm\n";
  out.precision(17);
  for (const auto& s : samples) {
    out << s.t;
    for (const Vec* v : {&s.x, &s.v, &s.w})
      for (int i = 0; i < dim; ++i) out << ',' << (*v)(i);
    out << ',' << s.residual << '\n';
  }
}

GaugeFrame GaugeFrame::at(const ConformalChart& chart, const Vec& x, const LowDimStructure& low) {
  const int m = chart.dim();
  LocalGeometry L = local_geometry(WeylStructure(chart), span_of(x), 2);
  GaugeFrame G;
  G.g = L.metric();
  G.gamma = L.christoffel();
  G.dgamma.resize(uz(m * m * m * m));
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l) G.dgamma[uz(((k * m + i) * m + j) * m + l)] = L.Gam(k, i, j).derivative({l});
  G.h = symmetric_part(gauge_schouten(chart, x, low));
  return G;
}

Vec GaugeFrame::gamma_vv(const Vec& a, const Vec& b) const {
  const int m = static_cast<int>(g.rows());
  Vec out = Vec::Zero(m);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) out(k) += gamma[uz((k * m + i) * m + j)] * a(i) * b(j);
  return out;
}

Vec covariant_acceleration(const GaugeFrame& G, const CurveState& s) { return s.w + G.gamma_vv(s.v, s.v); }

Vec covariant_jerk(const GaugeFrame& G, const CurveState& s, const Vec& x3) {
  const int m = static_cast<int>(G.g.rows());
  const Vec A = covariant_acceleration(G, s);
  Vec dA = x3 + 2.0 * G.gamma_vv(s.w, s.v);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l) dA(k) += G.dgamma[uz(((k * m + i) * m + j) * m + l)] * s.v(l) * s.v(i) * s.v(j);
  return dA + G.gamma_vv(s.v, A);
}

namespace {

Vec acceleration_from_covariant(const GaugeFrame& G, const Vec& v, const Vec& A, const Vec& J) {
  const Mat& g = G.g;
  const double s = speed2(g, v);
  const double vA = v.dot(g * A), AA = A.dot(g * A), vJ = v.dot(g * J);
  const Vec hv_sharp = g.ldlt().solve(G.h * v);
  return s * hv_sharp - J + 3.0 * vA / s * A + (-6.0 * vA * vA / (s * s) + 1.5 * AA / s + 2.0 * vJ / s) * v;
}

}  // namespace

Vec conformal_acceleration(const ConformalChart& chart, const CurveState& s, const Vec& x3, const LowDimStructure& low) {
  GaugeFrame G = GaugeFrame::at(chart, s.x, low);
  return acceleration_from_covariant(G, s.v, covariant_acceleration(G, s), covariant_jerk(G, s, x3));
}

std::pair<Vec, Vec> tangential_normal(const Mat& g, const Vec& v, const Vec& a) {
  const Vec tangential = (v.dot(g * a) / speed2(g, v)) * v;
  return {tangential, a - tangential};
}

Vec adapted_theta_along_curve(const ConformalChart& chart, const CurveState& s) {
  const Mat g = chart.metric_at(span_of(s.x));
  const double sp = speed2(g, s.v);
  LocalGeometry L = local_geometry(WeylStructure(chart), span_of(s.x), 1);
  GaugeFrame G;
  G.g = g;
  G.gamma = L.christoffel();
  const Vec A = covariant_acceleration(G, s);
  const Vec T = A / sp - 2.0 * s.v.dot(g * A) / (sp * sp) * s.v;
  return g * T;
}

double accel_equivalence_check(const ConformalChart& chart, const CurveState& s, const Vec& x3,
                               const LowDimStructure& low) {
  const int m = chart.dim();
  if (m < 2 || (m == 2 && !low.mobius))
    throw MissingStructureError("accel_equivalence_check needs m >= 3 or a Möbius surface");
  GaugeFrame G = GaugeFrame::at(chart, s.x, low);
  const Mat& g = G.g;
  const double sp = speed2(g, s.v);
  const Vec A = covariant_acceleration(G, s), J = covariant_jerk(G, s, x3);
  const Vec a = acceleration_from_covariant(G, s.v, A, J);

  // T = A/s - 2 g(A,v) v / s^2 and its covariant derivative along the curve
  const double p = s.v.dot(g * A);
  const Vec T = A / sp - 2.0 * p / (sp * sp) * s.v;
  const Vec DT = J / sp - 4.0 * p / (sp * sp) * A - 2.0 * (s.v.dot(g * J) + A.dot(g * A)) / (sp * sp) * s.v +
                 8.0 * p * p / (sp * sp * sp) * s.v;
  const Vec theta = g * T;
  // d/dt of the covector components: nabla_v theta + Gamma(v, .) theta
  Vec dtheta = g * DT;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k) dtheta(j) += G.gamma[uz((k * m + i) * m + j)] * s.v(i) * theta(k);
  // affine extension theta(y) = theta + dtheta * <v, y - x> / <v, v> (Euclidean pairing)
  const double vv = s.v.squaredNorm();
  Expr along = Expr::constant(0.0);
  for (int i = 0; i < m; ++i) along = along + (s.v(i) / vv) * (Expr::variable(i) - s.x(i));
  std::vector<Expr> theta_field;
  for (int j = 0; j < m; ++j) theta_field.push_back(theta(j) + dtheta(j) * along);
  WeylStructure adapted(chart, theta_field);
  const Mat h = curvature_package(adapted, span_of(s.x), low).h;
  const Vec rhs = sp * g.ldlt().solve(h.transpose() * s.v);
  return (a - rhs).cwiseAbs().maxCoeff();
}

Vec geodesic_third_derivative(const ConformalChart& chart, const CurveState& s, const LowDimStructure& low) {
  GaugeFrame G = GaugeFrame::at(chart, s.x, low);
  const Mat& g = G.g;
  const double sp = speed2(g, s.v);
  const Vec A = covariant_acceleration(G, s);
  const double vA = s.v.dot(g * A), AA = A.dot(g * A);
  const Vec K = sp * g.ldlt().solve(G.h * s.v) + 3.0 * vA / sp * A + (-6.0 * vA * vA / (sp * sp) + 1.5 * AA / sp) * s.v;
  const Vec J = K - 2.0 * s.v.dot(g * K) / sp * s.v;
  // invert J = x''' + 2 Gamma(w, v) + dGamma(v; v, v) + Gamma(v, A)
  const Vec zero = Vec::Zero(s.v.size());
  return J - (covariant_jerk(G, s, zero));
}

GeodesicTrace integrate_conformal_geodesic(const ConformalChart& chart, const CurveState& init,
                                           const IntegrationOptions& options, const LowDimStructure& low) {
  const int m = chart.dim();
  if (m < 1 || init.x.size() != m || init.v.size() != m || init.w.size() != m)
    throw DimensionError("initial state does not match the chart dimension");
  if (m == 2 && !low.mobius) throw MissingStructureError("conformal geodesics on a surface need a Möbius structure");
  if (m == 1 && !low.laplace) throw MissingStructureError("conformal geodesics on a curve need a Laplace structure");
  if (!(options.step > 0.0) || !std::isfinite(options.step)) throw IntegrationError("step size collapsed to zero");
  const double span = options.t1 - options.t0;
  const long n = std::lround(std::abs(span) / options.step);
  if (n < 1) throw IntegrationError("integration span shorter than one step");
  const double h = span / static_cast<double>(n);

  auto rhs = [&](const CurveState& s) -> Vec {
    try {
      return geodesic_third_derivative(chart, s, low);
    } catch (const DomainError& e) {
      throw IntegrationError(std::string("integration failed at t = ") + std::to_string(s.t) + ": " + e.what());
    } catch (const SingularMetricError& e) {
      throw IntegrationError(std::string("left the chart domain at t = ") + std::to_string(s.t) + ": " + e.what());
    }
  };
  auto residual = [&](const CurveState& s) {
    return conformal_acceleration(chart, s, rhs(s), low).cwiseAbs().maxCoeff();
  };

  GeodesicTrace trace;
  trace.dim = m;
  CurveState s = init;
  s.t = options.t0;
  trace.samples.push_back({s.t, s.x, s.v, s.w, residual(s)});
  const int every = std::max(1, options.sample_every);
  for (long step = 1; step <= n; ++step) {
    auto shifted = [&](const CurveState& base, double c, const Vec& dx, const Vec& dv, const Vec& dw) {
      return CurveState{base.t + c * h, base.x + c * h * dx, base.v + c * h * dv, base.w + c * h * dw};
    };
    const Vec k1x = s.v, k1v = s.w, k1w = rhs(s);
    CurveState s2 = shifted(s, 0.5, k1x, k1v, k1w);
    const Vec k2x = s2.v, k2v = s2.w, k2w = rhs(s2);
    CurveState s3 = shifted(s, 0.5, k2x, k2v, k2w);
    const Vec k3x = s3.v, k3v = s3.w, k3w = rhs(s3);
    CurveState s4 = shifted(s, 1.0, k3x, k3v, k3w);
    const Vec k4x = s4.v, k4v = s4.w, k4w = rhs(s4);
    s.x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    s.v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    s.w += h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w);
    s.t = options.t0 + static_cast<double>(step) * h;
    if (!s.x.allFinite() || !s.v.allFinite() || !s.w.allFinite())
      throw IntegrationError("non-finite state at t = " + std::to_string(s.t));
    if (s.v.dot(chart.metric_at(span_of(s.x)) * s.v) < 1e-14)
      throw IntegrationError("velocity degenerated at t = " + std::to_string(s.t));
    if (step % every == 0 || step == n) trace.samples.push_back({s.t, s.x, s.v, s.w, residual(s)});
  }
  return trace;
}

}  // namespace confgeom
