#include "confgeom/conformal.hpp"

#include <cmath>

#include "confgeom/errors.hpp"

namespace confgeom {

namespace {

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

void require_point(int dim, std::span<const double> p) {
  if (static_cast<int>(p.size()) != dim)
    throw DimensionError("point has " + std::to_string(p.size()) + " coordinates, chart has " + std::to_string(dim));
}

Mat symmetric_check_positive(Mat g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  if (es.eigenvalues().minCoeff() <= 0.0) throw SingularMetricError("gauge metric is not positive definite");
  return g;
}

/// Theta of w written relative to the Levi-Civita connection of `target`'s gauge.
/// Both charts must carry the same conformal class: g_w = e^{2f} g_target.
std::vector<Expr> theta_relative_to(const WeylStructure& w, const ConformalChart& target) {
  const ConformalChart& source = w.chart();
  if (source.dim() != target.dim()) throw DimensionError("charts of different dimension");
  const int m = source.dim();
  bool same = true;
  for (int i = 0; i < m && same; ++i)
    for (int j = 0; j < m && same; ++j)
      same = structurally_equal(source.metric_expr(i, j), target.metric_expr(i, j));
  if (same) return w.theta();
  // nabla^{g_w} = nabla^{g_target} + (df)~ with e^{2f} = g_w,11 / g_target,11
  Expr f = 0.5 * log(source.metric_expr(0, 0) / target.metric_expr(0, 0));
  auto df = gradient(f, m);
  std::vector<Expr> out(uz(m));
  for (int i = 0; i < m; ++i) out[uz(i)] = w.theta()[uz(i)] + df[uz(i)];
  return out;
}

/// Conformal factor e^{2f} = g_w / g_target at p.
double conformal_ratio(const ConformalChart& source, const ConformalChart& target, std::span<const double> p) {
  return evaluate(source.metric_expr(0, 0), p) / evaluate(target.metric_expr(0, 0), p);
}

Mat mat_from_jets(const std::vector<Jet>& a, int m) {
  Mat out(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out(i, j) = a[uz(i * m + j)].value();
  return out;
}

}  // namespace

// Charts ---------------------------------------------------------------------

ConformalChart::ConformalChart(int dim, ExprMatrix metric, std::map<std::string, Expr> gauge_factors)
    : dim_(dim), metric_(std::move(metric)), factors_(std::move(gauge_factors)) {
  if (dim < 1 || dim > kMaxJetDim) throw DimensionError("chart dimension outside [1, 8]");
  if (static_cast<int>(metric_.size()) != dim) throw DimensionError("metric row count differs from dimension");
  for (const auto& row : metric_)
    if (static_cast<int>(row.size()) != dim) throw DimensionError("metric column count differs from dimension");
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      if (metric_expr(i, j).max_variable() >= dim)
        throw DimensionError("metric entry uses a variable beyond the chart dimension");
      if (j > i && !structurally_equal(metric_expr(i, j), metric_expr(j, i)))
        throw ValidationError("metric is not symmetric at (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
    }
  for (const auto& [name, f] : factors_)
    if (f.max_variable() >= dim) throw DimensionError("gauge factor '" + name + "' uses a variable beyond the chart");
}

ConformalChart ConformalChart::from_strings(const std::vector<std::vector<std::string>>& metric,
                                            const std::map<std::string, std::string>& gauge_factors) {
  ExprMatrix m;
  for (const auto& row : metric) {
    std::vector<Expr> r;
    for (const auto& s : row) r.push_back(parse(s));
    m.push_back(std::move(r));
  }
  std::map<std::string, Expr> factors;
  for (const auto& [k, v] : gauge_factors) factors.emplace(k, parse(v));
  return ConformalChart(static_cast<int>(metric.size()), std::move(m), std::move(factors));
}

ConformalChart ConformalChart::euclidean(int dim) {
  ExprMatrix m(uz(dim), std::vector<Expr>(uz(dim), Expr::constant(0.0)));
  for (int i = 0; i < dim; ++i) m[uz(i)][uz(i)] = Expr::constant(1.0);
  return ConformalChart(dim, std::move(m));
}

ConformalChart ConformalChart::round_sphere(int dim) {
  Expr r2 = Expr::constant(1.0);
  for (int i = 0; i < dim; ++i) r2 = r2 + pow(Expr::variable(i), 2);
  Expr factor = 4.0 / pow(r2, 2);
  ExprMatrix m(uz(dim), std::vector<Expr>(uz(dim), Expr::constant(0.0)));
  for (int i = 0; i < dim; ++i) m[uz(i)][uz(i)] = factor;
  return ConformalChart(dim, std::move(m));
}

const Expr& ConformalChart::gauge_factor(const std::string& name) const {
  auto it = factors_.find(name);
  if (it == factors_.end()) throw ValidationError("unknown gauge factor '" + name + "'");
  return it->second;
}

Mat ConformalChart::metric_at(std::span<const double> p) const {
  require_point(dim_, p);
  std::vector<Expr> upper;
  for (int i = 0; i < dim_; ++i)
    for (int j = i; j < dim_; ++j) upper.push_back(metric_expr(i, j));
  const std::vector<double> values = evaluate(std::span<const Expr>(upper), p);
  Mat g(dim_, dim_);
  std::size_t k = 0;
  for (int i = 0; i < dim_; ++i)
    for (int j = i; j < dim_; ++j, ++k) g(i, j) = g(j, i) = values[k];
  return symmetric_check_positive(g);
}

std::vector<Jet> ConformalChart::metric_jets(std::span<const double> p, int order) const {
  require_point(dim_, p);
  auto x = coordinate_jets(p, order);
  std::vector<Expr> upper;
  for (int i = 0; i < dim_; ++i)
    for (int j = i; j < dim_; ++j) upper.push_back(metric_expr(i, j));
  const std::vector<Jet> values = evaluate(std::span<const Expr>(upper), std::span<const Jet>(x));
  std::vector<Jet> g(uz(dim_ * dim_));
  std::size_t k = 0;
  for (int i = 0; i < dim_; ++i)
    for (int j = i; j < dim_; ++j, ++k) g[uz(i * dim_ + j)] = g[uz(j * dim_ + i)] = values[k];
  return g;
}

ConformalChart ConformalChart::rescaled(const Expr& f) const {
  Expr factor = exp(2.0 * f);
  ExprMatrix m = metric_;
  for (auto& row : m)
    for (auto& e : row) e = factor * e;
  return ConformalChart(dim_, std::move(m), factors_);
}

std::vector<Expr> gradient(const Expr& f, int dim) {
  std::vector<Expr> out;
  for (int i = 0; i < dim; ++i) out.push_back(differentiate(f, i));
  return out;
}

// Weyl structures ------------------------------------------------------------

WeylStructure::WeylStructure(ConformalChart chart)
    : chart_(std::move(chart)), theta_(uz(chart_.dim()), Expr::constant(0.0)) {}

WeylStructure::WeylStructure(ConformalChart chart, std::vector<Expr> theta)
    : chart_(std::move(chart)), theta_(std::move(theta)) {
  if (static_cast<int>(theta_.size()) != chart_.dim()) throw DimensionError("Weyl 1-form has wrong length");
  for (const auto& t : theta_)
    if (t.max_variable() >= chart_.dim()) throw DimensionError("Weyl 1-form uses a variable beyond the chart");
}

Vec WeylStructure::theta_at(std::span<const double> p) const {
  require_point(dim(), p);
  Vec v(dim());
  for (int i = 0; i < dim(); ++i) v(i) = evaluate(theta_[uz(i)], p);
  return v;
}

WeylStructure WeylStructure::shifted(const std::vector<Expr>& eta) const {
  if (eta.size() != theta_.size()) throw DimensionError("shift 1-form has wrong length");
  std::vector<Expr> t(theta_.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = theta_[i] + eta[i];
  return WeylStructure(chart_, std::move(t));
}

WeylStructure WeylStructure::regauged(const Expr& f) const {
  auto df = gradient(f, dim());
  std::vector<Expr> t(theta_.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = theta_[i] - df[i];
  return WeylStructure(chart_.rescaled(f), std::move(t));
}

Density Density::regauged(const Expr& f) const {
  return {exp(boost::rational_cast<double>(weight) * f) * value, weight};
}

// Local geometry -------------------------------------------------------------

std::vector<Jet> invert_jet_matrix(const std::vector<Jet>& a, int m) {
  std::vector<Jet> work = a;
  std::vector<Jet> inv(uz(m * m));
  const Jet& like = a[0];
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) inv[uz(i * m + j)] = Jet(like.dim(), like.order(), i == j ? 1.0 : 0.0);
  for (int c = 0; c < m; ++c) {
    const Jet& pivot = work[uz(c * m + c)];
    if (std::abs(pivot.value()) < 1e-300) throw SingularMetricError("singular metric in jet inversion");
    const Jet rp = reciprocal(pivot);
    for (int j = 0; j < m; ++j) {
      work[uz(c * m + j)] = work[uz(c * m + j)] * rp;
      inv[uz(c * m + j)] = inv[uz(c * m + j)] * rp;
    }
    for (int r = 0; r < m; ++r) {
      if (r == c) continue;
      const Jet factor = work[uz(r * m + c)];
      if (factor.value() == 0.0) {
        bool all_zero = true;
        for (double v : factor.coefficients()) all_zero = all_zero && v == 0.0;
        if (all_zero) continue;
      }
      for (int j = 0; j < m; ++j) {
        work[uz(r * m + j)] -= factor * work[uz(c * m + j)];
        inv[uz(r * m + j)] -= factor * inv[uz(c * m + j)];
      }
    }
  }
  return inv;
}

LocalGeometry local_geometry(std::vector<Jet> g, std::vector<Jet> theta) {
  LocalGeometry L;
  L.m = static_cast<int>(theta.size());
  const int m = L.m;
  if (static_cast<int>(g.size()) != m * m) throw DimensionError("metric jets have wrong size");
  L.order = g[0].order();
  if (L.order < 1) throw DimensionError("Christoffel symbols need metric jets of order >= 1");
  L.g = std::move(g);
  L.theta = std::move(theta);
  L.ginv = invert_jet_matrix(L.g, m);
  const int k1 = L.order - 1;
  // dg[c][a][b] = d_c g_ab
  std::vector<Jet> dg(uz(m * m * m));
  for (int c = 0; c < m; ++c)
    for (int a = 0; a < m; ++a)
      for (int b = a; b < m; ++b) {
        dg[uz((c * m + a) * m + b)] = L.G(a, b).partial(c);
        dg[uz((c * m + b) * m + a)] = dg[uz((c * m + a) * m + b)];
      }
  auto DG = [&](int c, int a, int b) -> const Jet& { return dg[uz((c * m + a) * m + b)]; };
  std::vector<Jet> th(uz(m)), th_up(uz(m));
  for (int i = 0; i < m; ++i) th[uz(i)] = L.theta[uz(i)].truncated(k1);
  for (int k = 0; k < m; ++k) {
    Jet s(m, k1);
    for (int l = 0; l < m; ++l) s += L.Ginv(k, l).truncated(k1) * th[uz(l)];
    th_up[uz(k)] = s;
  }
  L.gamma.assign(uz(m * m * m), Jet(m, k1));
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      std::vector<Jet> lowered(uz(m));
      for (int l = 0; l < m; ++l) lowered[uz(l)] = 0.5 * (DG(i, l, j) + DG(j, l, i) - DG(l, i, j));
      for (int k = 0; k < m; ++k) {
        Jet s(m, k1);
        for (int l = 0; l < m; ++l) s += L.Ginv(k, l).truncated(k1) * lowered[uz(l)];
        s -= L.G(i, j).truncated(k1) * th_up[uz(k)];
        if (k == i) s += th[uz(j)];
        if (k == j) s += th[uz(i)];
        L.gamma[uz((k * m + i) * m + j)] = s;
        L.gamma[uz((k * m + j) * m + i)] = s;
      }
    }
  if (L.order >= 2) {
    const int k2 = L.order - 2;
    L.riem.assign(uz(m * m * m * m), Jet(m, k2));
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        for (int k = 0; k < m; ++k)
          for (int l = 0; l < m; ++l) {
            Jet s = L.Gam(l, j, k).partial(i) - L.Gam(l, i, k).partial(j);
            for (int p = 0; p < m; ++p)
              s += L.Gam(l, i, p).truncated(k2) * L.Gam(p, j, k).truncated(k2) -
                   L.Gam(l, j, p).truncated(k2) * L.Gam(p, i, k).truncated(k2);
            L.riem[uz(((i * m + j) * m + k) * m + l)] = s;
            L.riem[uz(((j * m + i) * m + k) * m + l)] = -s;
          }
  }
  return L;
}

LocalGeometry local_geometry(const WeylStructure& w, std::span<const double> p, int order) {
  require_point(w.dim(), p);
  w.chart().metric_at(p);  // positivity
  auto x = coordinate_jets(p, order);
  std::vector<Jet> th;
  for (const auto& t : w.theta()) th.push_back(evaluate(t, std::span<const Jet>(x)));
  return local_geometry(w.chart().metric_jets(p, order), std::move(th));
}

Mat LocalGeometry::metric() const { return mat_from_jets(g, m); }
Mat LocalGeometry::inverse_metric() const { return mat_from_jets(ginv, m); }

Vec LocalGeometry::theta_value() const {
  Vec v(m);
  for (int i = 0; i < m; ++i) v(i) = theta[uz(i)].value();
  return v;
}

std::vector<double> LocalGeometry::christoffel() const {
  std::vector<double> out(gamma.size());
  for (std::size_t k = 0; k < gamma.size(); ++k) out[k] = gamma[k].value();
  return out;
}

CurvatureTensor LocalGeometry::curvature() const {
  if (riem.empty()) throw DimensionError("curvature needs metric jets of order >= 2");
  CurvatureTensor r(m, metric());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l) r(i, j, k, l) = R(i, j, k, l).value();
  return r;
}

std::vector<double> christoffel(const WeylStructure& w, std::span<const double> p) {
  return local_geometry(w, p, 1).christoffel();
}

// Low-dimensional structures -------------------------------------------------

MobiusStructure::MobiusStructure(ConformalChart chart, ExprMatrix h0) : chart_(std::move(chart)), h0_(std::move(h0)) {
  if (chart_.dim() != 2) throw DimensionError("a Möbius structure lives on a surface");
  if (h0_.size() != 2 || h0_[0].size() != 2 || h0_[1].size() != 2) throw DimensionError("h0 must be 2 x 2");
  if (!structurally_equal(h0_[0][1], h0_[1][0])) throw ValidationError("Möbius h0 is not symmetric");
}

MobiusStructure MobiusStructure::flat(ConformalChart chart) {
  return MobiusStructure(std::move(chart), ExprMatrix(2, std::vector<Expr>(2, Expr::constant(0.0))));
}

Mat MobiusStructure::h0_gauge_at(std::span<const double> p) const {
  Mat h(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) h(i, j) = evaluate(h0_[uz(i)][uz(j)], p);
  return trace_free(symmetric_part(h), chart_.metric_at(p));
}

LaplaceStructure::LaplaceStructure(ConformalChart chart, Expr sigma) : chart_(std::move(chart)), sigma_(std::move(sigma)) {
  if (chart_.dim() != 1) throw DimensionError("a Laplace structure lives on a curve");
}

LaplaceStructure LaplaceStructure::flat(ConformalChart chart) { return LaplaceStructure(std::move(chart), Expr::constant(0.0)); }

Mat covariant_derivative_1form(const WeylStructure& w, const std::vector<Expr>& eta, std::span<const double> p) {
  const int m = w.dim();
  LocalGeometry L = local_geometry(w, p, 1);
  auto x = coordinate_jets(p, 1);
  Mat out(m, m);
  std::vector<Jet> e;
  for (const auto& t : eta) e.push_back(evaluate(t, std::span<const Jet>(x)));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double s = e[uz(j)].derivative({i});
      for (int k = 0; k < m; ++k) s -= L.Gam(k, i, j).value() * e[uz(k)].value();
      out(i, j) = s;
    }
  return out;
}

Mat mobius_h0_at(const MobiusStructure& M, const WeylStructure& w, std::span<const double> p) {
  if (w.dim() != 2) throw DimensionError("mobius_h0_at needs dimension 2");
  auto theta = theta_relative_to(w, M.chart());
  WeylStructure gauge(M.chart());
  Mat g = M.chart().metric_at(p);
  Mat dtheta = covariant_derivative_1form(gauge, theta, p);
  Vec th(2);
  for (int i = 0; i < 2; ++i) th(i) = evaluate(theta[uz(i)], p);
  Mat tt = th * th.transpose();
  return M.h0_gauge_at(p) - trace_free(symmetric_part(dtheta), g) + trace_free(tt, g);
}

double laplace_sigma_at(const LaplaceStructure& L, const WeylStructure& w, std::span<const double> p) {
  if (w.dim() != 1) throw DimensionError("laplace_sigma_at needs dimension 1");
  auto theta = theta_relative_to(w, L.chart());
  WeylStructure gauge(L.chart());
  const double ginv = 1.0 / L.chart().metric_at(p)(0, 0);
  const double dtheta = covariant_derivative_1form(gauge, theta, p)(0, 0);
  const double th = evaluate(theta[0], p);
  const double sigma = evaluate(L.sigma(), p) - ginv * dtheta + 0.5 * ginv * th * th;
  // sigma is a weight -2 density: convert from the structure's gauge to w's gauge
  return sigma / conformal_ratio(w.chart(), L.chart(), p);
}

// Curvature decomposition -----------------------------------------------------

double CurvaturePackage::reassembly_residual() const {
  if (!has_h || !has_weyl) throw DimensionError("reassembly needs h and W");
  CurvatureTensor rest = R - suspension(WeightedTensor::bilinear(h, g)) - W -
                         two_form_times_id(WeightedTensor::bilinear(F, g));
  return rest.max_abs();
}

CurvaturePackage curvature_package(const WeylStructure& w, std::span<const double> p, const LowDimStructure& low) {
  const int m = w.dim();
  if (m < 2) throw DimensionError("curvature_package needs dimension >= 2");
  LocalGeometry L = local_geometry(w, p, 2);
  CurvaturePackage P;
  P.m = m;
  P.g = L.metric();
  P.R = L.curvature();
  P.F = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) P.F(i, j) += P.R(i, j, k, k) / m;
  P.ric = ricci_contraction(P.R).as_matrix();
  const Mat ric_s = symmetric_part(P.ric);
  P.ric_s0 = trace_free(ric_s, P.g);
  P.scal = trace(P.ric, P.g);
  P.sigma = P.scal / (2.0 * (m - 1));
  if (m >= 3) {
    P.h = h_map(WeightedTensor::bilinear(ric_s, P.g)).as_matrix() - 0.5 * P.F;
    P.has_h = true;
    P.W = P.R - suspension(WeightedTensor::bilinear(P.h, P.g)) - two_form_times_id(WeightedTensor::bilinear(P.F, P.g));
    P.has_weyl = true;
  } else if (low.mobius) {
    P.h = mobius_h0_at(*low.mobius, w, p) + 0.5 * P.sigma * P.g - 0.5 * P.F;
    P.has_h = true;
  }
  return P;
}

Mat schouten(const WeylStructure& w, std::span<const double> p, const LowDimStructure& low) {
  const int m = w.dim();
  if (m == 1) {
    if (!low.laplace) throw MissingStructureError("a curve needs a Laplace structure for its Schouten tensor");
    return laplace_sigma_at(*low.laplace, w, p) * w.chart().metric_at(p);
  }
  if (m == 2 && !low.mobius) throw MissingStructureError("a surface needs a Möbius structure for its Schouten tensor");
  return curvature_package(w, p, low).h;
}

double TransformReport::max() const { return std::max({schouten, h0, s0, faraday, weyl}); }

TransformReport transform_check(const WeylStructure& w, const std::vector<Expr>& eta, std::span<const double> p,
                                const LowDimStructure& low) {
  const int m = w.dim();
  WeylStructure w2 = w.shifted(eta);
  TransformReport rep;
  const Mat g = w.chart().metric_at(p);
  Vec th(m);
  for (int i = 0; i < m; ++i) th(i) = evaluate(eta[uz(i)], p);
  const Mat nabla_eta = covariant_derivative_1form(w, eta, p);
  const Mat tt = th * th.transpose();
  const double norm2 = th.dot(g.ldlt().solve(th));
  const double delta = -trace(nabla_eta, g);
  auto max_abs = [](const Mat& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; };

  if (m == 1) {
    if (!low.laplace) throw MissingStructureError("transform_check on a curve needs a Laplace structure");
    const double s1 = laplace_sigma_at(*low.laplace, w, p), s2 = laplace_sigma_at(*low.laplace, w2, p);
    rep.s0 = std::abs(s2 - (s1 + delta + 0.5 * norm2));
    return rep;
  }
  CurvaturePackage P1 = curvature_package(w, p, low), P2 = curvature_package(w2, p, low);
  // exterior derivative of eta
  auto x = coordinate_jets(p, 1);
  Mat d_eta(m, m);
  std::vector<Jet> e;
  for (const auto& t : eta) e.push_back(evaluate(t, std::span<const Jet>(x)));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) d_eta(i, j) = e[uz(j)].derivative({i}) - e[uz(i)].derivative({j});
  rep.faraday = max_abs(P2.F - P1.F - d_eta);
  rep.s0 = std::abs(P2.sigma - (P1.sigma + delta + (2.0 - m) / 2.0 * norm2));
  if (m >= 3) {
    rep.schouten = max_abs(P2.h - (P1.h - nabla_eta + tt - 0.5 * norm2 * g));
    rep.h0 = max_abs(trace_free(P2.h, g) - (trace_free(P1.h, g) - trace_free(nabla_eta, g) + trace_free(tt, g)));
    rep.weyl = (P2.W - P1.W).max_abs();
  } else if (low.mobius) {
    const Mat a = mobius_h0_at(*low.mobius, w, p), b = mobius_h0_at(*low.mobius, w2, p);
    rep.h0 = max_abs(b - (a - trace_free(symmetric_part(nabla_eta), g) + trace_free(tt, g)));
  }
  return rep;
}

// Weighted Hessians and canonical operators -----------------------------------

namespace {

struct DensityJets {
  Vec D;   // nabla l components
  Mat hess;
  double u;
};

DensityJets density_derivatives(const WeylStructure& w, const Density& l, std::span<const double> p) {
  const int m = w.dim();
  const double k = boost::rational_cast<double>(l.weight);
  LocalGeometry L = local_geometry(w, p, 1);
  auto x = coordinate_jets(p, 2);
  Jet u = evaluate(l.value, std::span<const Jet>(x));
  auto x1 = coordinate_jets(p, 1);
  std::vector<Jet> th;
  for (const auto& t : w.theta()) th.push_back(evaluate(t, std::span<const Jet>(x1)));
  // D_j as order-1 jets
  std::vector<Jet> D;
  for (int j = 0; j < m; ++j) D.push_back(u.partial(j) + k * th[uz(j)] * u.truncated(1));
  DensityJets out;
  out.u = u.value();
  out.D = Vec(m);
  for (int j = 0; j < m; ++j) out.D(j) = D[uz(j)].value();
  out.hess = Mat(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double s = D[uz(j)].derivative({i}) + k * th[uz(i)].value() * out.D(j);
      for (int a = 0; a < m; ++a) s -= L.Gam(a, i, j).value() * out.D(a);
      out.hess(i, j) = s;
    }
  return out;
}

}  // namespace

Mat hessian_weighted(const WeylStructure& w, const Density& l, std::span<const double> p) {
  return density_derivatives(w, l, p).hess;
}

double hessian_transform_residual(const WeylStructure& w, const std::vector<Expr>& eta, const Density& l,
                                  std::span<const double> p) {
  const int m = w.dim();
  const double k = boost::rational_cast<double>(l.weight);
  DensityJets a = density_derivatives(w, l, p);
  DensityJets b = density_derivatives(w.shifted(eta), l, p);
  const Mat g = w.chart().metric_at(p);
  Vec th(m);
  for (int i = 0; i < m; ++i) th(i) = evaluate(eta[uz(i)], p);
  const Vec th_sharp = g.ldlt().solve(th);
  const Mat nabla_eta = covariant_derivative_1form(w, eta, p);
  const double nabla_th_l = th_sharp.dot(a.D);
  const double norm2 = th.dot(th_sharp);
  Mat expected = (k - 1) * (th * a.D.transpose() + a.D * th.transpose()) + nabla_th_l * g +
                 k * (nabla_eta + (k - 2) * th * th.transpose() + norm2 * g) * a.u;
  return (b.hess - a.hess - expected).cwiseAbs().maxCoeff();
}

Mat mobius_canonical(const WeylStructure& w, const Density& l, std::span<const double> p) {
  const int m = w.dim();
  if (m < 3) throw DimensionError("mobius_canonical needs dimension >= 3; use a MobiusStructure on surfaces");
  if (l.weight != Weight(1)) throw WeightError("mobius_canonical acts on densities of weight 1");
  const Mat g = w.chart().metric_at(p);
  const Mat hess = density_derivatives(w, l, p).hess;
  const Mat h = curvature_package(w, p).h;
  return trace_free(symmetric_part(hess), g) + trace_free(symmetric_part(h), g) * evaluate(l.value, p);
}

double laplace_canonical(const WeylStructure& w, const Density& l, std::span<const double> p) {
  const int m = w.dim();
  if (m < 2) throw DimensionError("laplace_canonical needs dimension >= 2");
  const Weight k = Weight(1) - Weight(m, 2);
  if (l.weight != k)
    throw WeightError("laplace_canonical needs weight " + std::to_string(k.numerator()) + "/" +
                      std::to_string(k.denominator()));
  const Mat g = w.chart().metric_at(p);
  DensityJets d = density_derivatives(w, l, p);
  const double sigma = curvature_package(w, p).sigma;
  return trace(d.hess, g) + boost::rational_cast<double>(k) * sigma * d.u;
}

}  // namespace confgeom
