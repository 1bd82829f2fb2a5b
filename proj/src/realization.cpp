#include "confgeom/realization.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <limits>
#include <random>

#include "confgeom/errors.hpp"

namespace confgeom {

namespace {

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

ExprMatrix zeros(int rows, int cols) {
  return ExprMatrix(uz(rows), std::vector<Expr>(uz(cols), Expr::constant(0.0)));
}

Mat eval(const ExprMatrix& a, std::span<const double> p) {
  const int rows = static_cast<int>(a.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(a[0].size());
  std::vector<Expr> flat;
  for (const auto& row : a) flat.insert(flat.end(), row.begin(), row.end());
  const std::vector<double> values = evaluate(std::span<const Expr>(flat), p);
  Mat out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = values[uz(i * cols + j)];
  return out;
}

/// Gauss-Jordan inverse of a positive-definite matrix of expressions.
ExprMatrix inverse(ExprMatrix a) {
  const int n = static_cast<int>(a.size());
  ExprMatrix inv = zeros(n, n);
  for (int i = 0; i < n; ++i) inv[uz(i)][uz(i)] = Expr::constant(1.0);
  for (int c = 0; c < n; ++c) {
    const Expr pivot = a[uz(c)][uz(c)];
    for (int j = 0; j < n; ++j) {
      a[uz(c)][uz(j)] = a[uz(c)][uz(j)] / pivot;
      inv[uz(c)][uz(j)] = inv[uz(c)][uz(j)] / pivot;
    }
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const Expr factor = a[uz(r)][uz(c)];
      if (factor.is_constant(0.0)) continue;
      for (int j = 0; j < n; ++j) {
        a[uz(r)][uz(j)] = a[uz(r)][uz(j)] - factor * a[uz(c)][uz(j)];
        inv[uz(r)][uz(j)] = inv[uz(r)][uz(j)] - factor * inv[uz(c)][uz(j)];
      }
    }
  }
  return inv;
}

Expr trace(const ExprMatrix& a, const ExprMatrix& ginv) {
  Expr s;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) s = s + ginv[i][j] * a[j][i];
  return s;
}

ExprMatrix trace_free(const ExprMatrix& a, const ExprMatrix& g, const ExprMatrix& ginv) {
  const int n = static_cast<int>(a.size());
  const Expr t = trace(a, ginv) / static_cast<double>(n);
  ExprMatrix out = a;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out[uz(i)][uz(j)] = a[uz(i)][uz(j)] - t * g[uz(i)][uz(j)];
  return out;
}

/// Levi-Civita data of a metric on x1..xn as expressions.
struct SymbolicGeometry {
  int n = 0;
  ExprMatrix g, ginv;
  std::vector<Expr> gam;  // Gamma^k_ij at (k * n + i) * n + j
  ExprMatrix ric;
  Expr scal;

  const Expr& G(int k, int i, int j) const { return gam[uz((k * n + i) * n + j)]; }
};

SymbolicGeometry symbolic_geometry(const ExprMatrix& g) {
  SymbolicGeometry S;
  const int n = static_cast<int>(g.size());
  S.n = n;
  S.g = g;
  S.ginv = inverse(g);
  std::vector<Expr> dg(uz(n * n * n));  // d_k g_ij at (k * n + i) * n + j
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) dg[uz((k * n + i) * n + j)] = differentiate(g[uz(i)][uz(j)], k);
  auto D = [&](int k, int i, int j) { return dg[uz((k * n + i) * n + j)]; };
  S.gam.assign(uz(n * n * n), Expr());
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Expr s;
        for (int l = 0; l < n; ++l) s = s + S.ginv[uz(k)][uz(l)] * (D(i, j, l) + D(j, i, l) - D(l, i, j));
        S.gam[uz((k * n + i) * n + j)] = 0.5 * s;
      }
  S.ric = zeros(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Expr s;
      for (int k = 0; k < n; ++k) {
        s = s + differentiate(S.G(k, i, j), k) - differentiate(S.G(k, i, k), j);
        for (int l = 0; l < n; ++l) s = s + S.G(k, k, l) * S.G(l, i, j) - S.G(k, j, l) * S.G(l, i, k);
      }
      S.ric[uz(i)][uz(j)] = s;
    }
  S.scal = trace(S.ric, S.ginv);
  return S;
}

/// Schouten tensor of the Levi-Civita connection of the base metric.
ExprMatrix base_schouten(const RealizationData& d, const SymbolicGeometry& S) {
  const int n = d.n;
  ExprMatrix h = zeros(n, n);
  if (n >= 3) {
    const Expr c = S.scal / (2.0 * (n - 1));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) h[uz(i)][uz(j)] = (S.ric[uz(i)][uz(j)] - c * S.g[uz(i)][uz(j)]) / (n - 2.0);
  } else if (n == 2) {
    if (!d.base_low.mobius) throw MissingStructureError("a surface base needs a Möbius structure");
    ExprMatrix h0 = d.base_low.mobius->h0();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) h[uz(i)][uz(j)] = 0.5 * (h0[uz(i)][uz(j)] + h0[uz(j)][uz(i)]);
    h = trace_free(h, S.g, S.ginv);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) h[uz(i)][uz(j)] = h[uz(i)][uz(j)] + 0.25 * S.scal * S.g[uz(i)][uz(j)];
  } else {
    if (!d.base_low.laplace) throw MissingStructureError("a curve base needs a Laplace structure");
    h[0][0] = d.base_low.laplace->sigma() * S.g[0][0];
  }
  return h;
}

/// (delta B0)^alpha_i with fiber index up, at [i][alpha].
ExprMatrix codifferential_raw(const RealizationData& d, const SymbolicGeometry& S) {
  const int n = d.n, r = d.r;
  ExprMatrix out = zeros(n, r);
  for (int al = 0; al < r; ++al)
    for (int i = 0; i < n; ++i) {
      Expr s;
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
          if (S.ginv[uz(k)][uz(j)].is_constant(0.0)) continue;
          Expr dB = differentiate(d.B0[uz(al)][uz(i)][uz(j)], k);
          for (int l = 0; l < n; ++l)
            dB = dB - S.G(l, k, i) * d.B0[uz(al)][uz(l)][uz(j)] - S.G(l, k, j) * d.B0[uz(al)][uz(i)][uz(l)];
          for (int be = 0; be < r; ++be) dB = dB + d.connection[uz(k)][uz(al)][uz(be)] * d.B0[uz(be)][uz(i)][uz(j)];
          s = s + S.ginv[uz(k)][uz(j)] * dB;
        }
      out[uz(i)][uz(al)] = s;
    }
  return out;
}

ExprMatrix lower_fiber(const ExprMatrix& raw, const Mat& gnu) {
  const int n = static_cast<int>(raw.size()), r = static_cast<int>(gnu.rows());
  ExprMatrix out = zeros(n, r);
  for (int i = 0; i < n; ++i)
    for (int al = 0; al < r; ++al)
      for (int be = 0; be < r; ++be) out[uz(i)][uz(al)] = out[uz(i)][uz(al)] + gnu(al, be) * raw[uz(i)][uz(be)];
  return out;
}

/// Q_ij = sum g^nu_ab (B^a g^-1 B^b)_ij.
ExprMatrix b0_square(const RealizationData& d, const ExprMatrix& ginv) {
  const int n = d.n, r = d.r;
  ExprMatrix Q = zeros(n, n);
  for (int al = 0; al < r; ++al)
    for (int be = 0; be < r; ++be) {
      if (d.fiber_metric(al, be) == 0.0) continue;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          Expr s;
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
              s = s + d.B0[uz(al)][uz(i)][uz(k)] * ginv[uz(k)][uz(l)] * d.B0[uz(be)][uz(l)][uz(j)];
          Q[uz(i)][uz(j)] = Q[uz(i)][uz(j)] + d.fiber_metric(al, be) * s;
        }
    }
  return Q;
}

double max_abs(const Mat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

bool positive_definite(const Mat& a) {
  if (!a.allFinite()) return false;
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 0.0;
}

double min_eigenvalue(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Unit fiber directions probed by the positivity check.
std::vector<Vec> probe_directions(const Mat& gnu) {
  const int r = static_cast<int>(gnu.rows());
  std::vector<Vec> dirs;
  for (int al = 0; al < r; ++al)
    for (double s : {1.0, -1.0}) {
      Vec v = Vec::Zero(r);
      v(al) = s;
      dirs.push_back(v);
    }
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 8; ++k) {
    Vec v(r);
    for (int al = 0; al < r; ++al) v(al) = normal(rng);
    dirs.push_back(v);
  }
  for (auto& v : dirs) v /= std::sqrt(v.dot(gnu * v));
  return dirs;
}

bool positive_on_shell(const ConformalChart& chart, const std::vector<std::vector<double>>& samples,
                       const std::vector<Vec>& dirs, double eps) {
  const int m = chart.dim();
  const int n = samples.empty() ? 0 : static_cast<int>(samples[0].size());
  for (const auto& x : samples)
    for (const auto& v : dirs) {
      std::vector<double> P(x);
      for (int al = 0; al < m - n; ++al) P.push_back(eps * v(al));
      Mat G(m, m);
      try {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) G(i, j) = evaluate(chart.metric_expr(i, j), P);
      } catch (const DomainError&) {
        return false;
      }
      if (!positive_definite(G)) return false;
    }
  return true;
}

void check_matrix(const ExprMatrix& a, int rows, int cols, const char* what) {
  bool ok = static_cast<int>(a.size()) == rows;
  for (const auto& row : a) ok = ok && static_cast<int>(row.size()) == cols;
  if (!ok) throw ValidationError(std::string(what) + " has the wrong shape");
}

void check_variables(const Expr& e, int n, const char* what) {
  if (e.max_variable() >= n) throw ValidationError(std::string(what) + " depends on fiber coordinates");
}

void check_variables(const ExprMatrix& a, int n, const char* what) {
  for (const auto& row : a)
    for (const auto& e : row) check_variables(e, n, what);
}

}  // namespace

RealizationData RealizationData::trivial(int n, int r) {
  if (n < 1 || r < 1 || n + r > kMaxJetDim) throw DimensionError("realization needs n, r >= 1 and n + r <= 8");
  RealizationData d;
  d.n = n;
  d.r = r;
  d.base_metric = zeros(n, n);
  for (int i = 0; i < n; ++i) d.base_metric[uz(i)][uz(i)] = Expr::constant(1.0);
  d.fiber_metric = Mat::Identity(r, r);
  d.connection.assign(uz(n), zeros(r, r));
  d.B0.assign(uz(r), zeros(n, n));
  d.a = zeros(n, r);
  d.b = zeros(n, n);
  d.f = Expr::constant(0.0);
  return d;
}

ConformalChart RealizationData::base_chart() const { return ConformalChart(n, base_metric); }

void RealizationData::validate(const std::vector<std::vector<double>>& base_samples) const {
  if (n < 1 || r < 1 || n + r > kMaxJetDim) throw ValidationError("realization needs n, r >= 1 and n + r <= 8");
  check_matrix(base_metric, n, n, "base metric");
  check_variables(base_metric, n, "base metric");
  if (fiber_metric.rows() != r || fiber_metric.cols() != r) throw ValidationError("fiber metric has the wrong shape");
  if (max_abs(fiber_metric - fiber_metric.transpose()) > 1e-12 || !positive_definite(fiber_metric))
    throw ValidationError("fiber metric must be symmetric positive definite");
  if (static_cast<int>(connection.size()) != n) throw ValidationError("need one connection matrix per base coordinate");
  for (const auto& A : connection) {
    check_matrix(A, r, r, "connection matrix");
    check_variables(A, n, "connection");
  }
  if (static_cast<int>(B0.size()) != r) throw ValidationError("need one B0 component per fiber direction");
  for (const auto& B : B0) {
    check_matrix(B, n, n, "B0 component");
    check_variables(B, n, "B0");
  }
  check_matrix(a, n, r, "a");
  check_matrix(b, n, n, "b");
  check_variables(a, n, "a");
  check_variables(b, n, "b");
  check_variables(f, n, "f");
  if (total_h0) check_matrix(*total_h0, n + r, n + r, "total Möbius tensor");
  if (base_low.mobius && base_low.mobius->chart().dim() != n) throw ValidationError("base Möbius structure has the wrong dimension");
  if (base_low.laplace && base_low.laplace->chart().dim() != n) throw ValidationError("base Laplace structure has the wrong dimension");
  if (base_samples.empty()) throw ValidationError("no base sample points");
  for (const auto& x : base_samples) {
    if (static_cast<int>(x.size()) != n) throw ValidationError("base sample point has the wrong dimension");
    const Mat g = eval(base_metric, x);
    if (max_abs(g - g.transpose()) > 1e-12 || !positive_definite(g))
      throw ValidationError("base metric must be symmetric positive definite");
    for (int i = 0; i < n; ++i) {
      const Mat A = eval(connection[uz(i)], x);
      if (max_abs(A.transpose() * fiber_metric + fiber_metric * A) > 1e-10)
        throw ValidationError("the normal connection must preserve the fiber metric");
    }
    const Mat gi = g.inverse();
    for (int al = 0; al < r; ++al) {
      const Mat B = eval(B0[uz(al)], x);
      if (max_abs(B - B.transpose()) > 1e-12) throw ValidationError("B0 must be symmetric");
      if (std::abs((gi * B).trace()) > 1e-10) throw ValidationError("B0 must be trace-free");
    }
    const Mat bb = eval(b, x);
    if (max_abs(bb - bb.transpose()) > 1e-12) throw ValidationError("b must be symmetric");
  }
}

Immersion TotalSpaceChart::zero_section() const {
  std::vector<Expr> comps;
  for (int i = 0; i < n; ++i) comps.push_back(Expr::variable(i));
  for (int al = 0; al < r; ++al) comps.push_back(Expr::constant(0.0));
  return Immersion(chart, n, std::move(comps));
}

std::vector<double> TotalSpaceChart::zero_point(std::span<const double> x) const {
  std::vector<double> P(x.begin(), x.end());
  P.resize(uz(n + r), 0.0);
  return P;
}

TotalSpaceChart build_total_metric(const RealizationData& d, const std::vector<std::vector<double>>& base_samples,
                                   std::optional<double> epsilon) {
  d.validate(base_samples);
  const int n = d.n, r = d.r, m = n + r;
  const Mat& gnu = d.fiber_metric;
  std::vector<Expr> y;
  for (int al = 0; al < r; ++al) y.push_back(Expr::variable(n + al));
  Expr norm2;
  for (int al = 0; al < r; ++al)
    for (int be = 0; be < r; ++be)
      if (gnu(al, be) != 0.0) norm2 = norm2 + gnu(al, be) * y[uz(al)] * y[uz(be)];
  // (A_i y)^alpha: d_i = X~_i + (A_i y)^alpha d_{y_alpha}
  ExprMatrix Ay = zeros(n, r);
  for (int i = 0; i < n; ++i)
    for (int al = 0; al < r; ++al)
      for (int be = 0; be < r; ++be) Ay[uz(i)][uz(al)] = Ay[uz(i)][uz(al)] + d.connection[uz(i)][uz(al)][uz(be)] * y[uz(be)];

  ExprMatrix hh = zeros(n, n), hv = zeros(n, r), vv = zeros(r, r);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Expr s = d.base_metric[uz(i)][uz(j)];
      for (int al = 0; al < r; ++al)
        for (int be = 0; be < r; ++be)
          if (gnu(al, be) != 0.0) s = s - 2.0 * gnu(al, be) * d.B0[uz(al)][uz(i)][uz(j)] * y[uz(be)];
      hh[uz(i)][uz(j)] = s + d.b[uz(i)][uz(j)] * norm2;
    }
  for (int i = 0; i < n; ++i)
    for (int al = 0; al < r; ++al) hv[uz(i)][uz(al)] = norm2 * d.a[uz(i)][uz(al)];
  for (int al = 0; al < r; ++al)
    for (int be = 0; be < r; ++be)
      if (gnu(al, be) != 0.0) vv[uz(al)][uz(be)] = gnu(al, be) * (1.0 + d.f * norm2);

  ExprMatrix G = zeros(m, m);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Expr s = hh[uz(i)][uz(j)];
      for (int al = 0; al < r; ++al) s = s + Ay[uz(i)][uz(al)] * hv[uz(j)][uz(al)] + Ay[uz(j)][uz(al)] * hv[uz(i)][uz(al)];
      for (int al = 0; al < r; ++al)
        for (int be = 0; be < r; ++be) s = s + Ay[uz(i)][uz(al)] * Ay[uz(j)][uz(be)] * vv[uz(al)][uz(be)];
      G[uz(i)][uz(j)] = G[uz(j)][uz(i)] = s;
    }
  for (int i = 0; i < n; ++i)
    for (int al = 0; al < r; ++al) {
      Expr s = hv[uz(i)][uz(al)];
      for (int be = 0; be < r; ++be) s = s + Ay[uz(i)][uz(be)] * vv[uz(be)][uz(al)];
      G[uz(i)][uz(n + al)] = G[uz(n + al)][uz(i)] = s;
    }
  for (int al = 0; al < r; ++al)
    for (int be = 0; be < r; ++be) G[uz(n + al)][uz(n + be)] = vv[uz(al)][uz(be)];

  TotalSpaceChart T;
  T.n = n;
  T.r = r;
  T.chart = ConformalChart(m, G);
  if (d.total_h0) T.low.mobius = MobiusStructure(T.chart, *d.total_h0);
  const ConformalChart induced = T.zero_section().induced_chart();
  if (d.base_low.mobius) T.sub_low.mobius = MobiusStructure(induced, d.base_low.mobius->h0());
  if (d.base_low.laplace) T.sub_low.laplace = LaplaceStructure(induced, d.base_low.laplace->sigma());

  const auto dirs = probe_directions(gnu);
  if (epsilon) {
    if (!(*epsilon > 0.0) || !positive_on_shell(T.chart, base_samples, dirs, *epsilon))
      throw SingularMetricError("the total-space metric is not positive definite at the requested fiber radius");
    T.epsilon = *epsilon;
    return T;
  }
  double lam = min_eigenvalue(gnu);
  for (const auto& x : base_samples) lam = std::min(lam, min_eigenvalue(eval(d.base_metric, x)));
  double eps = 0.1 * std::sqrt(lam);
  for (int k = 0; k < 60 && !positive_on_shell(T.chart, base_samples, dirs, eps); ++k) eps *= 0.5;
  if (!positive_on_shell(T.chart, base_samples, dirs, eps))
    throw SingularMetricError("no fiber radius keeps the total-space metric positive definite");
  T.epsilon = eps;
  return T;
}

ExprMatrix codifferential_B0_fields(const RealizationData& d) {
  const SymbolicGeometry S = symbolic_geometry(d.base_metric);
  return lower_fiber(codifferential_raw(d, S), d.fiber_metric);
}

RealizationData solve_prescription(RealizationData d, const PrescribedInvariants& targets,
                                   const std::vector<std::vector<double>>& base_samples) {
  d.validate(base_samples);
  const int n = d.n, r = d.r, m = n + r;
  check_matrix(targets.mu, n, r, "mu target");
  check_matrix(targets.rho, n, n, "rho target");
  check_variables(targets.mu, n, "mu target");
  check_variables(targets.rho, n, "rho target");
  for (const auto& x : base_samples) {
    const Mat rho = eval(targets.rho, x);
    if (max_abs(rho - rho.transpose()) > 1e-12) throw ValidationError("rho target must be symmetric");
  }
  const SymbolicGeometry S = symbolic_geometry(d.base_metric);
  const ExprMatrix hN = base_schouten(d, S);
  const ExprMatrix& g = S.g;

  if (n == 1 && r == 1) {
    // g~ = g + g^nu dy^2 is flat; the targets fix the trace-free Schouten tensor
    // of a Möbius structure on the total space.
    d.a = zeros(1, 1);
    d.b = zeros(1, 1);
    d.f = Expr::constant(0.0);
    const Expr hxx = targets.rho[0][0] + hN[0][0];
    ExprMatrix h0 = zeros(2, 2);
    h0[0][0] = hxx;
    h0[0][1] = h0[1][0] = targets.mu[0][0];
    h0[1][1] = -hxx * d.fiber_metric(0, 0) / g[0][0];
    d.total_h0 = h0;
    return d;
  }

  const ExprMatrix Q = b0_square(d, S.ginv);
  const Expr normB0 = trace(Q, S.ginv);
  // trace of rho when tr b = 0 and f = 0
  const Expr base_trace =
      (S.scal + 2.0 * normB0 - n * (S.scal + 3.0 * normB0) / (2.0 * (m - 1))) / (m - 2.0) - trace(hN, S.ginv);
  const ExprMatrix delta = lower_fiber(codifferential_raw(d, S), d.fiber_metric);

  if (r == 1) {
    for (const auto& x : base_samples) {
      if (max_abs(eval(targets.mu, x)) > 1e-12)
        throw ValidationError("a hypersurface has vanishing mixed Schouten tensor; the mu target must be zero");
      const double want = ::confgeom::trace(eval(targets.rho, x), eval(g, x));
      if (std::abs(want - evaluate(base_trace, x)) > 1e-9)
        throw ValidationError("for a hypersurface the trace of rho is determined by B0 and the base geometry");
    }
    d.a = zeros(n, 1);
    d.f = Expr::constant(0.0);
  } else {
    const double cn = n > 1 ? 1.0 / (n - 1) : 0.0;
    d.a = zeros(n, r);
    for (int i = 0; i < n; ++i)
      for (int al = 0; al < r; ++al)
        d.a[uz(i)][uz(al)] =
            (m - 2.0) / (r - 1.0) * (delta[uz(i)][uz(al)] * (cn - 1.0 / (m - 2)) - targets.mu[uz(i)][uz(al)]);
    d.f = (trace(targets.rho, S.ginv) - base_trace) * ((m - 1.0) * (m - 2.0) / (n * r * (r - 1.0)));
  }

  if (n == 1) {
    d.b = zeros(1, 1);
  } else {
    ExprMatrix rhs = zeros(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        rhs[uz(i)][uz(j)] = S.ric[uz(i)][uz(j)] + 2.0 * Q[uz(i)][uz(j)] -
                            (m - 2.0) * (targets.rho[uz(i)][uz(j)] + hN[uz(i)][uz(j)]);
    d.b = trace_free(rhs, g, S.ginv);
    for (auto& row : d.b)
      for (auto& e : row) e = e / static_cast<double>(r);
  }
  d.total_h0.reset();
  return d;
}

Mat orthonormal_fiber_frame(const Mat& gnu) {
  const int r = static_cast<int>(gnu.rows());
  Mat xi = Mat::Zero(r, r);
  for (int al = 0; al < r; ++al) {
    Vec v = Vec::Unit(r, al);
    for (int be = 0; be < al; ++be) v -= xi.col(be).dot(gnu * v) * xi.col(be);
    xi.col(al) = v / std::sqrt(v.dot(gnu * v));
  }
  return xi;
}

FrameInvariants prescribed_in_frame(const RealizationData& d, const PrescribedInvariants& targets,
                                    std::span<const double> x) {
  const Mat xi = orthonormal_fiber_frame(d.fiber_metric);
  const Mat gx = d.fiber_metric * xi;
  FrameInvariants out;
  for (int be = 0; be < d.r; ++be) {
    Mat B = Mat::Zero(d.n, d.n);
    for (int al = 0; al < d.r; ++al) B += gx(al, be) * eval(d.B0[uz(al)], x);
    out.B0.push_back(B);
  }
  out.mu = eval(targets.mu, x) * xi;
  out.rho = eval(targets.rho, x);
  return out;
}

double RoundTripResidual::max() const { return std::max({B0, mu, rho}); }
double RicciTableResidual::max() const { return std::max({tangential, mixed, vertical, scalar}); }
double CovariantTableResidual::max() const {
  return std::max({horizontal_horizontal, vertical_horizontal, horizontal_vertical, vertical_vertical});
}

RoundTripResidual round_trip_residual(const RealizationData& d, const TotalSpaceChart& total,
                                      const PrescribedInvariants& targets, std::span<const double> x) {
  const FrameInvariants want = prescribed_in_frame(d, targets, x);
  const Immersion imm = total.zero_section();
  const WeylStructure w(total.chart);
  const FundamentalForm F = fundamental_form(imm, w, x);
  RoundTripResidual res;
  for (int al = 0; al < d.r; ++al) res.B0 = std::max(res.B0, max_abs(F.B0[uz(al)] - want.B0[uz(al)]));
  res.mu = max_abs(mixed_schouten(imm, w, x, total.low) - want.mu);
  res.rho = max_abs(relative_schouten(imm, w, x, total.low, total.sub_low) - want.rho);
  return res;
}

namespace {

/// Numeric base data at one point.
struct BaseValues {
  Mat g, ginv, ric, a, b, delta, Q, gnu;
  double f = 0.0, scal = 0.0, normB0 = 0.0;
  std::vector<Mat> B;       // B0^alpha
  std::vector<Mat> A;       // A_i
  std::vector<double> gam;  // base Christoffel
  std::vector<Mat> dB;      // (nabla_k B0)^alpha_ij at [k * r + alpha]
  std::vector<Mat> Rnu;     // R^nu(d_i, d_j) at [i * n + j]
};

BaseValues base_values(const RealizationData& d, std::span<const double> x) {
  const int n = d.n, r = d.r;
  BaseValues V;
  V.gnu = d.fiber_metric;
  V.g = eval(d.base_metric, x);
  V.ginv = V.g.inverse();
  const WeylStructure base(d.base_chart());
  V.ric = n >= 2 ? curvature_package(base, x).ric : Mat::Zero(1, 1);
  V.scal = (V.ginv * V.ric).trace();
  V.gam = n >= 2 ? christoffel(base, x) : std::vector<double>{};
  if (n == 1) {
    const double g0 = evaluate(d.base_metric[0][0], x);
    const double dg = evaluate(differentiate(d.base_metric[0][0], 0), x);
    V.gam = {0.5 * dg / g0};
  }
  V.a = eval(d.a, x);
  V.b = eval(d.b, x);
  V.f = evaluate(d.f, x);
  V.delta = eval(codifferential_B0_fields(d), x);
  for (int al = 0; al < r; ++al) V.B.push_back(eval(d.B0[uz(al)], x));
  for (int i = 0; i < n; ++i) V.A.push_back(eval(d.connection[uz(i)], x));
  V.Q = Mat::Zero(n, n);
  for (int al = 0; al < r; ++al)
    for (int be = 0; be < r; ++be) V.Q += V.gnu(al, be) * V.B[uz(al)] * V.ginv * V.B[uz(be)];
  V.normB0 = (V.ginv * V.Q).trace();
  auto G = [&](int k, int i, int j) { return V.gam[uz((k * n + i) * n + j)]; };
  for (int k = 0; k < n; ++k)
    for (int al = 0; al < r; ++al) {
      Mat D(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = evaluate(differentiate(d.B0[uz(al)][uz(i)][uz(j)], k), x);
          for (int l = 0; l < n; ++l) s -= G(l, k, i) * V.B[uz(al)](l, j) + G(l, k, j) * V.B[uz(al)](i, l);
          for (int be = 0; be < r; ++be) s += V.A[uz(k)](al, be) * V.B[uz(be)](i, j);
          D(i, j) = s;
        }
      V.dB.push_back(D);
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Mat R(r, r);
      for (int al = 0; al < r; ++al)
        for (int be = 0; be < r; ++be)
          R(al, be) = evaluate(differentiate(d.connection[uz(j)][uz(al)][uz(be)], i), x) -
                      evaluate(differentiate(d.connection[uz(i)][uz(al)][uz(be)], j), x);
      V.Rnu.push_back(R + V.A[uz(i)] * V.A[uz(j)] - V.A[uz(j)] * V.A[uz(i)]);
    }
  return V;
}

}  // namespace

RicciTableResidual ricci_table_residual(const RealizationData& d, const TotalSpaceChart& total,
                                        std::span<const double> x) {
  const int n = d.n, r = d.r;
  const BaseValues V = base_values(d, x);
  const auto P = total.zero_point(x);
  const CurvaturePackage C = curvature_package(WeylStructure(total.chart), P);
  RicciTableResidual res;
  res.tangential = max_abs(C.ric.topLeftCorner(n, n) - (V.ric - r * V.b + 2.0 * V.Q));
  res.mixed = max_abs(C.ric.topRightCorner(n, r) - (-V.delta - (r - 1.0) * V.a));
  res.mixed = std::max(res.mixed, max_abs(C.ric.bottomLeftCorner(r, n) - (-V.delta - (r - 1.0) * V.a).transpose()));
  Mat vert(r, r);
  const double trb = (V.ginv * V.b).trace();
  for (int al = 0; al < r; ++al)
    for (int be = 0; be < r; ++be) {
      Mat Ba = Mat::Zero(n, n), Bb = Mat::Zero(n, n);
      for (int ga = 0; ga < r; ++ga) {
        Ba += V.gnu(al, ga) * V.B[uz(ga)];
        Bb += V.gnu(be, ga) * V.B[uz(ga)];
      }
      vert(al, be) = (V.ginv * Ba * V.ginv * Bb).trace() - (trb + 2.0 * (r - 1) * V.f) * V.gnu(al, be);
    }
  res.vertical = max_abs(C.ric.bottomRightCorner(r, r) - vert);
  const double scal = V.scal - 2.0 * r * trb + 3.0 * V.normB0 - 2.0 * r * (r - 1) * V.f;
  res.scalar = std::abs(C.scal - scal);
  return res;
}

CovariantTableResidual covariant_table_residual(const RealizationData& d, const TotalSpaceChart& total,
                                                std::span<const double> x) {
  const int n = d.n, r = d.r, m = n + r;
  const BaseValues V = base_values(d, x);
  const Mat gnu_inv = V.gnu.inverse();
  const auto P = total.zero_point(x);
  const LocalGeometry L = local_geometry(WeylStructure(total.chart), P, 2);
  const auto X = coordinate_jets(P, 2);
  using Field = std::vector<Jet>;
  auto constant = [&](double c) { return Jet(m, 1, c); };
  std::vector<Jet> y;
  for (int al = 0; al < r; ++al) y.push_back(X[uz(n + al)].truncated(1));

  // coordinate expressions of the lifted frame fields
  auto horizontal_exprs = [&](int i) {
    std::vector<Expr> c(uz(m), Expr::constant(0.0));
    c[uz(i)] = Expr::constant(1.0);
    for (int al = 0; al < r; ++al)
      for (int be = 0; be < r; ++be)
        c[uz(n + al)] = c[uz(n + al)] - d.connection[uz(i)][uz(al)][uz(be)] * Expr::variable(n + be);
    return c;
  };
  auto vertical_exprs = [&](int al) {
    std::vector<Expr> c(uz(m), Expr::constant(0.0));
    c[uz(n + al)] = Expr::constant(1.0);
    return c;
  };
  auto jets_of = [&](const std::vector<Expr>& c) {
    Field out;
    for (const auto& e : c) out.push_back(evaluate(e, std::span<const Jet>(X)));
    return out;
  };
  auto derivative = [&](const Field& U, const Field& W) {
    Field out;
    for (int c = 0; c < m; ++c) {
      Jet s = constant(0.0);
      for (int a = 0; a < m; ++a) s += U[uz(a)].truncated(1) * W[uz(c)].partial(a);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) s += L.Gam(c, a, b) * U[uz(a)].truncated(1) * W[uz(b)].truncated(1);
      out.push_back(s);
    }
    return out;
  };
  // lifts of base vectors Z and fiber vectors v with jet coefficients
  auto lift = [&](const Field& Z, const Field& v) {
    Field out(uz(m), constant(0.0));
    for (int k = 0; k < n; ++k) {
      out[uz(k)] += Z[uz(k)];
      for (int al = 0; al < r; ++al)
        for (int be = 0; be < r; ++be) out[uz(n + al)] -= V.A[uz(k)](al, be) * y[uz(be)] * Z[uz(k)];
    }
    for (int al = 0; al < r; ++al) out[uz(n + al)] += v[uz(al)];
    return out;
  };
  auto pair_y = [&](const Vec& u) {  // g^nu(u, xi)
    Jet s = constant(0.0);
    for (int al = 0; al < r; ++al)
      for (int be = 0; be < r; ++be) s += V.gnu(al, be) * u(al) * y[uz(be)];
    return s;
  };
  auto raise_base = [&](const Field& covector) {
    Field out(uz(n), constant(0.0));
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) out[uz(k)] += V.ginv(k, l) * covector[uz(l)];
    return out;
  };
  auto column = [&](const std::vector<Mat>& Bs, int i, int j) {
    Vec u(r);
    for (int al = 0; al < r; ++al) u(al) = Bs[uz(al)](i, j);
    return u;
  };
  auto dB = [&](int k, int i, int j) {
    Vec u(r);
    for (int al = 0; al < r; ++al) u(al) = V.dB[uz(k * r + al)](i, j);
    return u;
  };
  auto Ry = [&](int i, int j) {  // R^nu(d_i, d_j) xi
    Field out(uz(r), constant(0.0));
    for (int al = 0; al < r; ++al)
      for (int be = 0; be < r; ++be) out[uz(al)] += V.Rnu[uz(i * n + j)](al, be) * y[uz(be)];
    return out;
  };
  auto mismatch = [&](const Field& lhs, const Field& rhs) {
    double e = 0.0;
    for (int c = 0; c < m; ++c) {
      const Jet diff = lhs[uz(c)] - rhs[uz(c)];
      e = std::max(e, std::abs(diff.value()));
      for (int al = 0; al < r; ++al) e = std::max(e, std::abs(diff.derivative({n + al})));
    }
    return e;
  };

  std::vector<Field> Hf, Vf;
  for (int i = 0; i < n; ++i) Hf.push_back(jets_of(horizontal_exprs(i)));
  for (int al = 0; al < r; ++al) Vf.push_back(jets_of(vertical_exprs(al)));

  CovariantTableResidual res;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Field cov(uz(n), constant(0.0));
      for (int l = 0; l < n; ++l) cov[uz(l)] = pair_y(-dB(i, j, l) - dB(j, i, l) + dB(l, i, j));
      Field Z = raise_base(cov);
      for (int k = 0; k < n; ++k) Z[uz(k)] += V.gam[uz((k * n + i) * n + j)];
      const Field R = Ry(i, j);
      Field v(uz(r), constant(0.0));
      for (int al = 0; al < r; ++al) v[uz(al)] = V.B[uz(al)](i, j) - V.b(i, j) * y[uz(al)] - 0.5 * R[uz(al)];
      res.horizontal_horizontal = std::max(res.horizontal_horizontal, mismatch(derivative(Hf[uz(i)], Hf[uz(j)]), lift(Z, v)));
    }
  for (int al = 0; al < r; ++al)
    for (int i = 0; i < n; ++i) {
      const Vec e = Vec::Unit(r, al);
      Field cov(uz(n), constant(0.0));
      for (int l = 0; l < n; ++l) {
        const Field R = Ry(i, l);
        Jet s = constant(-column(V.B, i, l).dot(V.gnu * e)) + V.b(i, l) * pair_y(e);
        for (int be = 0; be < r; ++be)
          for (int ga = 0; ga < r; ++ga) s += 0.5 * V.gnu(be, ga) * R[uz(be)] * e(ga);
        cov[uz(l)] = s;
      }
      // raised with the horizontal block g - 2 g^nu(B0, xi) to first order
      Field Z = raise_base(cov);
      Field Bz(uz(n), constant(0.0));
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) Bz[uz(k)] += pair_y(column(V.B, k, l)) * Z[uz(l)];
      const Field corr = raise_base(Bz);
      for (int k = 0; k < n; ++k) Z[uz(k)] += 2.0 * corr[uz(k)];
      const Vec asharp = gnu_inv * V.a.row(i).transpose();
      Field v(uz(r), constant(0.0));
      for (int ga = 0; ga < r; ++ga) v[uz(ga)] = asharp(ga) * pair_y(e) - V.a(i, al) * y[uz(ga)];
      res.vertical_horizontal = std::max(res.vertical_horizontal, mismatch(derivative(Vf[uz(al)], Hf[uz(i)]), lift(Z, v)));
      for (int ga = 0; ga < r; ++ga) v[uz(ga)] += V.A[uz(i)](ga, al);
      res.horizontal_vertical = std::max(res.horizontal_vertical, mismatch(derivative(Hf[uz(i)], Vf[uz(al)]), lift(Z, v)));
    }
  for (int al = 0; al < r; ++al)
    for (int be = 0; be < r; ++be) {
      const Vec ea = Vec::Unit(r, al), eb = Vec::Unit(r, be);
      Field v(uz(r), constant(0.0));
      for (int ga = 0; ga < r; ++ga)
        v[uz(ga)] = V.f * (pair_y(ea) * eb(ga) + pair_y(eb) * ea(ga) - V.gnu(al, be) * y[uz(ga)]);
      Field cov(uz(n), constant(0.0));
      for (int l = 0; l < n; ++l) cov[uz(l)] = V.a(l, be) * pair_y(ea) + V.a(l, al) * pair_y(eb);
      res.vertical_vertical = std::max(res.vertical_vertical, mismatch(derivative(Vf[uz(al)], Vf[uz(be)]), lift(raise_base(cov), v)));
    }
  return res;
}

WeylStructure section5_weyl(const TotalSpaceChart& total, double t) {
  std::vector<Expr> theta(uz(total.n + total.r), Expr::constant(0.0));
  theta[uz(total.n)] = Expr::constant(std::cos(2 * t));
  theta[uz(total.n + 1)] = Expr::constant(std::sin(2 * t));
  return WeylStructure(total.chart, theta);
}

bool Section5Report::passed(double algebraic_tol, double tol) const {
  return max_bracket_identity < algebraic_tol && max_adapted_acceleration < tol && max_h_normal < tol &&
         max_h_tangent < tol && max_h_formula < tol && min_B0 > 0.1 && classification.classification == Geodesy::None;
}

Section5Report section5_scenario(int grid) {
  if (grid < 1) throw ValidationError("the angle grid needs at least one point");
  Section5Report rep;
  rep.grid = grid;
  RealizationData d = RealizationData::trivial(2, 2);
  d.B0[0] = {{Expr::constant(1.0), Expr::constant(0.0)}, {Expr::constant(0.0), Expr::constant(-1.0)}};
  d.B0[1] = {{Expr::constant(0.0), Expr::constant(1.0)}, {Expr::constant(1.0), Expr::constant(0.0)}};
  d.base_low.mobius = MobiusStructure::flat(d.base_chart());
  PrescribedInvariants targets{zeros(2, 2), zeros(2, 2)};
  targets.rho[0][0] = targets.rho[1][1] = Expr::constant(-0.5);
  const std::vector<std::vector<double>> samples = {{0.0, 0.0}, {0.5, -0.3}, {-0.4, 0.7}};
  rep.data = solve_prescription(d, targets, samples);
  rep.total = build_total_metric(rep.data, samples);
  rep.a = eval(rep.data.a, samples[0]);
  rep.b = eval(rep.data.b, samples[0]);
  rep.f = evaluate(rep.data.f, samples[0]);

  const double step = 2 * std::numbers::pi / grid;
  auto Xt = [](double t) { return Vec{{std::cos(t), std::sin(t)}}; };
  auto theta = [](double t) { return Vec{{std::cos(2 * t), std::sin(2 * t)}}; };
  for (const auto& x : samples) {
    const Mat g = eval(rep.data.base_metric, x);
    const auto P = rep.total.zero_point(x);
    for (int it = 0; it < grid; ++it) {
      const double t = it * step;
      const WeylStructure wt = section5_weyl(rep.total, t);
      const auto gam = christoffel(wt, P);
      Vec X = Vec::Zero(4);
      X.head(2) = Xt(t);
      for (int c = 0; c < 4; ++c) {
        double s = 0.0;
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) s += gam[uz((c * 4 + a) * 4 + b)] * X(a) * X(b);
        rep.max_adapted_acceleration = std::max(rep.max_adapted_acceleration, std::abs(s));
      }
      const Mat h = schouten(wt, P);
      const Vec W = Vec::Unit(4, 2), Vv = Vec::Unit(4, 3);
      rep.max_h_normal = std::max({rep.max_h_normal, std::abs(X.dot(h * Vv)), std::abs(X.dot(h * W))});
      for (int is = 0; is < grid; ++is) {
        const double s = is * step;
        const Vec xt = Xt(t), xs = Xt(s);
        const double inner = xt.dot(g * xs);
        Vec B(2);
        for (int al = 0; al < 2; ++al) B(al) = xt.dot(eval(rep.data.B0[uz(al)], x) * xs);
        rep.max_bracket_identity =
            std::max({rep.max_bracket_identity, std::abs(inner - std::cos(t - s)),
                      (B - theta((t + s) / 2)).cwiseAbs().maxCoeff(),
                      std::abs(theta(t).dot(rep.data.fiber_metric * theta(s)) - std::cos(2 * t - 2 * s))});
        Vec Xs = Vec::Zero(4);
        Xs.head(2) = xs;
        const double hts = X.dot(h * Xs);
        const double rho = xt.dot(eval(targets.rho, x) * xs);
        rep.max_h_tangent = std::max(rep.max_h_tangent, std::abs(hts));
        rep.max_h_formula = std::max(
            rep.max_h_formula, std::abs(hts - (rho - 0.5 * inner + theta(t).dot(rep.data.fiber_metric * B))));
      }
    }
  }
  rep.classification = classify_geodesy(rep.total.zero_section(), samples, rep.total.low, rep.total.sub_low);
  rep.min_B0 = std::numeric_limits<double>::infinity();
  for (const auto& p : rep.classification.points) rep.min_B0 = std::min(rep.min_B0, p.norm_B0);
  return rep;
}

namespace {

/// Normal offsets c_k of a tubular immersion x -> (x, c).
std::vector<double> tubular_offsets(const Immersion& imm) {
  const int n = imm.n(), m = imm.m();
  for (int i = 0; i < n; ++i) {
    const Expr& e = imm.components()[uz(i)];
    if (e.kind() != Expr::Kind::Var || e.variable_index() != i)
      throw ValidationError("adapted factor needs tubular coordinates x -> (x, c)");
  }
  std::vector<double> c;
  for (int k = n; k < m; ++k) {
    const Expr& e = imm.components()[uz(k)];
    if (e.max_variable() >= 0) throw ValidationError("adapted factor needs tubular coordinates x -> (x, c)");
    c.push_back(evaluate(e, std::span<const double>{}));
  }
  return c;
}

}  // namespace

std::vector<Expr> mean_curvature_covector(const Immersion& imm) {
  const int n = imm.n(), m = imm.m();
  const std::vector<double> c = tubular_offsets(imm);
  std::vector<Expr> restrict_to_N;
  for (int i = 0; i < n; ++i) restrict_to_N.push_back(Expr::variable(i));
  for (double ck : c) restrict_to_N.push_back(Expr::constant(ck));
  const ConformalChart& chart = imm.ambient();
  auto on_N = [&](const Expr& e) { return substitute(e, restrict_to_N); };
  auto dg = [&](int a, int b, int l) { return on_N(differentiate(chart.metric_expr(b, l), a)); };
  // lowered Christoffel Gamma_{l,ij} for tangent i, j
  auto low = [&](int l, int i, int j) { return 0.5 * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j)); };
  ExprMatrix gam = zeros(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gam[uz(i)][uz(j)] = on_N(chart.metric_expr(i, j));
  const ExprMatrix gi = inverse(gam);
  std::vector<Expr> out;
  for (int k = 0; k < m - n; ++k) {
    Expr s;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (gi[uz(i)][uz(j)].is_constant(0.0)) continue;
        Expr normal = low(n + k, i, j);
        for (int p = 0; p < n; ++p)
          for (int q = 0; q < n; ++q)
            if (!gi[uz(p)][uz(q)].is_constant(0.0))
              normal = normal - gi[uz(p)][uz(q)] * low(q, i, j) * on_N(chart.metric_expr(p, n + k));
        s = s + gi[uz(i)][uz(j)] * normal;
      }
    out.push_back(s / static_cast<double>(n));
  }
  return out;
}

Expr adapted_factor(const Immersion& imm, const std::vector<Expr>& target) {
  const int n = imm.n();
  const std::vector<double> c = tubular_offsets(imm);
  if (target.size() != c.size()) throw ValidationError("target needs one component per normal coordinate");
  for (const auto& t : target) check_variables(t, n, "target mean curvature");
  const std::vector<Expr> h = mean_curvature_covector(imm);
  Expr f;
  for (std::size_t k = 0; k < c.size(); ++k)
    f = f + (target[k] - h[k]) * (Expr::variable(n + static_cast<int>(k)) - c[k]);
  return f;
}

}  // namespace confgeom
