#include "confgeom/embedding.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <future>
#include <thread>

#include "confgeom/errors.hpp"

namespace confgeom {

namespace {

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

std::span<const double> span_of(const Vec& x) { return {x.data(), static_cast<std::size_t>(x.size())}; }

/// Jets of the ambient geometry along N at a point, in the N coordinates.
struct Along {
  int n = 0, m = 0, r = 0;
  Vec y;                   // phi(p)
  std::vector<Jet> G;      // g_ab, order 2
  std::vector<Jet> Gam;    // Weyl Christoffel (a * m + b) * m + c, order 1
  std::vector<Jet> th;     // theta_a, order 1
  std::vector<Jet> E;      // E_i^a at a * n + i, order 2
  std::vector<Jet> gam;    // induced metric, order 2
  std::vector<Jet> gam_inv;
  std::vector<Jet> xi;     // xi_alpha^a at a * r + alpha, order 2
  std::vector<Jet> B;      // (i * n + j) * r + alpha, order 1
  std::vector<Jet> H;      // alpha, order 1
  std::vector<Jet> B0;
  std::vector<Jet> omega;  // g(nabla_i xi_beta, xi_alpha) at (i * r + alpha) * r + beta, order 1
  std::vector<double> gamN;  // induced connection (l * n + i) * n + j

  Jet inner(const std::vector<Jet>& u, const std::vector<Jet>& v) const {
    Jet s(n, std::min(u[0].order(), v[0].order()), 0.0);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) s += G[uz(a * m + b)] * u[uz(a)] * v[uz(b)];
    return s;
  }
  std::vector<Jet> tangent(int i) const {
    std::vector<Jet> out;
    for (int a = 0; a < m; ++a) out.push_back(E[uz(a * n + i)]);
    return out;
  }
  std::vector<Jet> normal(int alpha) const {
    std::vector<Jet> out;
    for (int a = 0; a < m; ++a) out.push_back(xi[uz(a * r + alpha)]);
    return out;
  }
  /// nabla_{E_i} V for a field V along N (order drops by one).
  std::vector<Jet> derivative(int i, const std::vector<Jet>& V) const {
    std::vector<Jet> out;
    for (int a = 0; a < m; ++a) {
      Jet s = V[uz(a)].partial(i);
      for (int b = 0; b < m; ++b)
        for (int c = 0; c < m; ++c) s += Gam[uz((a * m + b) * m + c)] * E[uz(b * n + i)] * V[uz(c)];
      out.push_back(s);
    }
    return out;
  }
  Mat gamma_value() const {
    Mat out(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(i, j) = gam[uz(i * n + j)].value();
    return out;
  }
  Mat tangent_value() const {
    Mat out(m, n);
    for (int a = 0; a < m; ++a)
      for (int i = 0; i < n; ++i) out(a, i) = E[uz(a * n + i)].value();
    return out;
  }
  Mat normal_value() const {
    Mat out(m, r);
    for (int a = 0; a < m; ++a)
      for (int al = 0; al < r; ++al) out(a, al) = xi[uz(a * r + al)].value();
    return out;
  }
  double b0(int i, int j, int al) const { return B0[uz((i * n + j) * r + al)].value(); }
};

void require_rank(const Mat& d) {
  Eigen::JacobiSVD<Mat> svd(d);
  const auto s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 1e-10 * std::max(1.0, s(0)))
    throw RankDeficiencyError("immersion differential is not of full rank");
}

Along along(const Immersion& imm, const WeylStructure& w, std::span<const double> p) {
  const int n = imm.n(), m = imm.m();
  if (w.dim() != m) throw DimensionError("Weyl structure and immersion have different ambient dimensions");
  if (static_cast<int>(p.size()) != n) throw DimensionError("point does not match the submanifold dimension");
  Along A;
  A.n = n;
  A.m = m;
  A.r = m - n;
  auto x = coordinate_jets(p, 3);
  std::vector<Jet> phi, offsets;
  A.y = Vec(m);
  for (int a = 0; a < m; ++a) {
    phi.push_back(evaluate(imm.components()[uz(a)], std::span<const Jet>(x)));
    A.y(a) = phi.back().value();
    offsets.push_back(phi.back() - A.y(a));
  }
  for (int a = 0; a < m; ++a)
    for (int i = 0; i < n; ++i) A.E.push_back(phi[uz(a)].partial(i));
  require_rank(A.tangent_value());

  LocalGeometry L = local_geometry(w, span_of(A.y), 2);
  for (const auto& g : L.g) A.G.push_back(compose(g, offsets));
  for (const auto& c : L.gamma) A.Gam.push_back(compose(c, offsets));
  for (const auto& t : L.theta) A.th.push_back(compose(t.truncated(1), offsets));

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A.gam.push_back(A.inner(A.tangent(i), A.tangent(j)));
  A.gam_inv = invert_jet_matrix(A.gam, n);

  // Gram-Schmidt of the coordinate basis against TN, in coordinate order
  std::vector<std::vector<Jet>> frame;
  for (int b = 0; b < m && static_cast<int>(frame.size()) < A.r; ++b) {
    std::vector<Jet> e(uz(m), Jet(n, 2, 0.0));
    e[uz(b)] = Jet(n, 2, 1.0);
    const double scale = std::sqrt(A.inner(e, e).value());
    std::vector<Jet> v = e;
    std::vector<Jet> ge;
    for (int j = 0; j < n; ++j) ge.push_back(A.inner(A.tangent(j), e));
    for (int i = 0; i < n; ++i) {
      Jet c(n, 2, 0.0);
      for (int j = 0; j < n; ++j) c += A.gam_inv[uz(i * n + j)] * ge[uz(j)];
      for (int a = 0; a < m; ++a) v[uz(a)] -= c * A.E[uz(a * n + i)];
    }
    for (const auto& f : frame) {
      Jet c = A.inner(f, e);
      for (int a = 0; a < m; ++a) v[uz(a)] -= c * f[uz(a)];
    }
    Jet norm2 = A.inner(v, v);
    if (!(norm2.value() > 1e-20 * scale * scale)) continue;
    Jet inv = 1.0 / sqrt(norm2);
    for (auto& c : v) c = c * inv;
    frame.push_back(std::move(v));
  }
  if (static_cast<int>(frame.size()) != A.r) throw RankDeficiencyError("normal frame construction failed");
  A.xi.assign(uz(m * A.r), Jet());
  for (int al = 0; al < A.r; ++al)
    for (int a = 0; a < m; ++a) A.xi[uz(a * A.r + al)] = frame[uz(al)][uz(a)];

  std::vector<std::vector<Jet>> DE(uz(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) DE[uz(i * n + j)] = A.derivative(i, A.tangent(j));
  A.B.assign(uz(n * n * A.r), Jet());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int al = 0; al < A.r; ++al) A.B[uz((i * n + j) * A.r + al)] = A.inner(DE[uz(i * n + j)], A.normal(al));
  for (int al = 0; al < A.r; ++al) {
    Jet h(n, 1, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) h += A.gam_inv[uz(i * n + j)] * A.B[uz((i * n + j) * A.r + al)];
    A.H.push_back(h / static_cast<double>(n));
  }
  A.B0 = A.B;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int al = 0; al < A.r; ++al) A.B0[uz((i * n + j) * A.r + al)] -= A.H[uz(al)] * A.gam[uz(i * n + j)];

  A.omega.assign(uz(n * A.r * A.r), Jet());
  for (int i = 0; i < n; ++i)
    for (int be = 0; be < A.r; ++be) {
      auto d = A.derivative(i, A.normal(be));
      for (int al = 0; al < A.r; ++al) A.omega[uz((i * A.r + al) * A.r + be)] = A.inner(d, A.normal(al));
    }

  A.gamN.assign(uz(n * n * n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double t = A.inner(DE[uz(i * n + j)], A.tangent(k)).value();
        for (int l = 0; l < n; ++l) A.gamN[uz((l * n + i) * n + j)] += A.gam_inv[uz(l * n + k)].value() * t;
      }
  return A;
}

FundamentalForm form_of(const Along& A) {
  FundamentalForm F;
  F.H = Vec(A.r);
  for (int al = 0; al < A.r; ++al) {
    Mat b(A.n, A.n), b0(A.n, A.n);
    for (int i = 0; i < A.n; ++i)
      for (int j = 0; j < A.n; ++j) {
        b(i, j) = A.B[uz((i * A.n + j) * A.r + al)].value();
        b0(i, j) = A.b0(i, j, al);
      }
    F.B.push_back(b);
    F.B0.push_back(b0);
    F.H(al) = A.H[uz(al)].value();
  }
  F.normal = A.normal_value();
  return F;
}

Mat codifferential(const Along& A) {
  const int n = A.n, r = A.r;
  Mat out = Mat::Zero(n, r);
  auto om = [&](int k, int al, int be) { return A.omega[uz((k * r + al) * r + be)].value(); };
  auto gN = [&](int l, int i, int j) { return A.gamN[uz((l * n + i) * n + j)]; };
  for (int i = 0; i < n; ++i)
    for (int al = 0; al < r; ++al) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
          double d = A.B0[uz((i * n + j) * r + al)].derivative({k});
          for (int l = 0; l < n; ++l) d -= gN(l, k, i) * A.b0(l, j, al) + gN(l, k, j) * A.b0(i, l, al);
          for (int be = 0; be < r; ++be) d += om(k, al, be) * A.b0(i, j, be);
          s += A.gam_inv[uz(k * n + j)].value() * d;
        }
      out(i, al) = s;
    }
  return out;
}

/// Restriction of the ambient Schouten tensor: (E^T h E, E^T h xi).
std::pair<Mat, Mat> ambient_schouten(const Along& A, const WeylStructure& w, const LowDimStructure& low) {
  const Mat h = schouten(w, span_of(A.y), low);
  const Mat E = A.tangent_value(), X = A.normal_value();
  return {E.transpose() * h * E, E.transpose() * h * X};
}

Mat h_dot_B0(const FundamentalForm& F) {
  Mat s = Mat::Zero(F.B0.empty() ? 0 : F.B0[0].rows(), F.B0.empty() ? 0 : F.B0[0].cols());
  for (std::size_t al = 0; al < F.B0.size(); ++al) s += F.H(static_cast<Eigen::Index>(al)) * F.B0[al];
  return s;
}

}  // namespace

// Immersion -------------------------------------------------------------------

Immersion::Immersion(ConformalChart ambient, int n, std::vector<Expr> components)
    : ambient_(std::move(ambient)), n_(n), components_(std::move(components)) {
  if (n < 1 || n >= ambient_.dim()) throw DimensionError("submanifold dimension must satisfy 1 <= n < m");
  if (static_cast<int>(components_.size()) != ambient_.dim())
    throw DimensionError("immersion needs one component per ambient coordinate");
  for (const auto& c : components_)
    if (c.max_variable() >= n) throw DimensionError("immersion component uses a variable beyond x" + std::to_string(n));
}

Immersion Immersion::from_strings(ConformalChart ambient, int n, const std::vector<std::string>& components) {
  std::vector<Expr> c;
  for (const auto& s : components) c.push_back(parse(s));
  return Immersion(std::move(ambient), n, std::move(c));
}

Vec Immersion::image(std::span<const double> p) const {
  Vec y(m());
  for (int a = 0; a < m(); ++a) y(a) = evaluate(components_[uz(a)], p);
  return y;
}

Mat Immersion::differential(std::span<const double> p) const {
  auto x = coordinate_jets(p, 1);
  Mat d(m(), n_);
  for (int a = 0; a < m(); ++a) {
    Jet j = evaluate(components_[uz(a)], std::span<const Jet>(x));
    for (int i = 0; i < n_; ++i) d(a, i) = j.derivative({i});
  }
  require_rank(d);
  return d;
}

ConformalChart Immersion::induced_chart(const ConformalChart& chart) const {
  if (chart.dim() != m()) throw DimensionError("chart dimension differs from the ambient dimension");
  std::vector<std::vector<Expr>> dphi(uz(m()));
  for (int a = 0; a < m(); ++a)
    for (int i = 0; i < n_; ++i) dphi[uz(a)].push_back(differentiate(components_[uz(a)], i));
  ExprMatrix g(uz(n_), std::vector<Expr>(uz(n_)));
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) {
      Expr s = Expr::constant(0.0);
      for (int a = 0; a < m(); ++a)
        for (int b = 0; b < m(); ++b) {
          if (dphi[uz(a)][uz(i)].is_constant(0.0) || dphi[uz(b)][uz(j)].is_constant(0.0)) continue;
          s = s + substitute(chart.metric_expr(a, b), components_) * dphi[uz(a)][uz(i)] * dphi[uz(b)][uz(j)];
        }
      g[uz(i)][uz(j)] = s;
      g[uz(j)][uz(i)] = s;
    }
  std::map<std::string, Expr> factors;
  for (const auto& [name, f] : chart.gauge_factors()) factors.emplace(name, substitute(f, components_));
  return ConformalChart(n_, std::move(g), std::move(factors));
}

std::vector<Expr> Immersion::pullback(const std::vector<Expr>& one_form) const {
  if (static_cast<int>(one_form.size()) != m()) throw DimensionError("1-form has the wrong number of components");
  std::vector<Expr> out;
  for (int i = 0; i < n_; ++i) {
    Expr s = Expr::constant(0.0);
    for (int a = 0; a < m(); ++a) {
      if (one_form[uz(a)].is_constant(0.0)) continue;
      s = s + substitute(one_form[uz(a)], components_) * differentiate(components_[uz(a)], i);
    }
    out.push_back(s);
  }
  return out;
}

WeylStructure Immersion::induced_weyl(const WeylStructure& w) const {
  return WeylStructure(induced_chart(w.chart()), pullback(w.theta()));
}

// Frames and invariants ----------------------------------------------------------

Vec FrameData::tangential_part(const Vec& a) const {
  return tangent * induced.ldlt().solve(tangent.transpose() * metric * a);
}

Vec FrameData::normal_part(const Vec& a) const { return a - tangential_part(a); }

FrameData frame_at(const Immersion& imm, const ConformalChart& gauge, std::span<const double> p) {
  Along A = along(imm, WeylStructure(gauge), p);
  FrameData F;
  F.metric = gauge.metric_at(span_of(A.y));
  F.tangent = A.tangent_value();
  F.normal = A.normal_value();
  F.induced = A.gamma_value();
  return F;
}

Vec FundamentalForm::mean_curvature_vector() const { return normal * H; }

FundamentalForm fundamental_form(const Immersion& imm, const WeylStructure& w, std::span<const double> p) {
  return form_of(along(imm, w, p));
}

Vec extend_adapted(const Immersion& imm, const Vec& theta_N, std::span<const double> p) {
  if (theta_N.size() != imm.n()) throw DimensionError("theta_N must have n components");
  Along A = along(imm, WeylStructure(imm.ambient()), p);
  Mat frame(imm.m(), imm.m());
  frame << A.tangent_value(), A.normal_value();
  Vec rhs(imm.m());
  rhs << theta_N, form_of(A).H;
  return frame.transpose().fullPivLu().solve(rhs);
}

std::vector<Mat> normal_curvature_kappa(const Immersion& imm, const WeylStructure& w, std::span<const double> p) {
  Along A = along(imm, w, p);
  const int n = A.n, r = A.r;
  // weightless normal connection omega - theta(E_i) id
  std::vector<Jet> om0 = A.omega;
  for (int i = 0; i < n; ++i) {
    Jet t(n, 1, 0.0);
    for (int a = 0; a < A.m; ++a) t += A.th[uz(a)] * A.E[uz(a * n + i)];
    for (int al = 0; al < r; ++al) om0[uz((i * r + al) * r + al)] -= t;
  }
  auto om = [&](int i, int al, int be) -> const Jet& { return om0[uz((i * r + al) * r + be)]; };
  std::vector<Mat> kappa;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Mat k(r, r);
      for (int al = 0; al < r; ++al)
        for (int be = 0; be < r; ++be) {
          double s = om(j, al, be).derivative({i}) - om(i, al, be).derivative({j});
          for (int ga = 0; ga < r; ++ga)
            s += om(i, al, ga).value() * om(j, ga, be).value() - om(j, al, ga).value() * om(i, ga, be).value();
          k(al, be) = s;
        }
      kappa.push_back(k);
    }
  return kappa;
}

Mat codifferential_B0(const Immersion& imm, const WeylStructure& w, std::span<const double> p) {
  return codifferential(along(imm, w, p));
}

Mat mixed_schouten(const Immersion& imm, const WeylStructure& w, std::span<const double> p,
                   const LowDimStructure& ambient_low) {
  if (imm.m() == 2 && !ambient_low.mobius)
    throw MissingStructureError("the mixed Schouten-Weyl tensor in a surface needs a Möbius structure");
  Along A = along(imm, w, p);
  const int n = A.n, r = A.r;
  const Mat h_mixed = ambient_schouten(A, w, ambient_low).second;
  Mat mu = h_mixed;
  for (int i = 0; i < n; ++i)
    for (int al = 0; al < r; ++al) {
      double dH = A.H[uz(al)].derivative({i});
      for (int be = 0; be < r; ++be) dH -= A.omega[uz((i * r + be) * r + al)].value() * A.H[uz(be)].value();
      mu(i, al) -= dH;
    }
  if (n > 1) mu += codifferential(A) / static_cast<double>(n - 1);
  return mu;
}

Mat relative_schouten(const Immersion& imm, const WeylStructure& w, std::span<const double> p,
                      const LowDimStructure& ambient_low, const LowDimStructure& sub_low) {
  if (imm.n() == 2 && !sub_low.mobius)
    throw MissingStructureError("the relative Schouten-Weyl tensor of a surface needs a Möbius structure on it");
  if (imm.n() == 1 && !sub_low.laplace)
    throw MissingStructureError("the relative Schouten-Weyl tensor of a curve needs a Laplace structure on it");
  if (imm.m() == 2 && !ambient_low.mobius) throw MissingStructureError("a surface ambient needs a Möbius structure");
  Along A = along(imm, w, p);
  FundamentalForm F = form_of(A);
  const Mat gam = A.gamma_value();
  const Mat hN = schouten(imm.induced_weyl(w), p, sub_low);
  return ambient_schouten(A, w, ambient_low).first - hN + 0.5 * F.H.squaredNorm() * gam + h_dot_B0(F);
}

Mat induced_mobius(const Immersion& imm, const WeylStructure& w, const Density& l, std::span<const double> p,
                   const LowDimStructure& ambient_low) {
  if (imm.n() < 2) throw DimensionError("the induced Möbius structure needs n >= 2");
  if (l.weight != Weight(1)) throw WeightError("the induced Möbius operator acts on densities of weight 1");
  Along A = along(imm, w, p);
  FundamentalForm F = form_of(A);
  const Mat gam = A.gamma_value();
  const double u = evaluate(l.value, p);
  const Mat hess = hessian_weighted(imm.induced_weyl(w), l, p);
  const Mat hM = ambient_schouten(A, w, ambient_low).first;
  return trace_free(hess, gam) + trace_free(hM, gam) * u + h_dot_B0(F) * u;
}

Mat intrinsic_mobius(const Immersion& imm, const WeylStructure& w, const Density& l, std::span<const double> p,
                     const LowDimStructure& sub_low) {
  const WeylStructure wN = imm.induced_weyl(w);
  if (imm.n() >= 3) return mobius_canonical(wN, l, p);
  if (imm.n() == 1) throw DimensionError("curves carry no Möbius operator");
  if (!sub_low.mobius) throw MissingStructureError("a surface needs a Möbius structure for its Möbius operator");
  if (l.weight != Weight(1)) throw WeightError("the Möbius operator acts on densities of weight 1");
  const Mat gam = wN.chart().metric_at(p);
  return trace_free(symmetric_part(hessian_weighted(wN, l, p)), gam) +
         mobius_h0_at(*sub_low.mobius, wN, p) * evaluate(l.value, p);
}

double mobius_comparison_residual(const Immersion& imm, const WeylStructure& w, const Density& l,
                                  std::span<const double> p, const LowDimStructure& ambient_low,
                                  const LowDimStructure& sub_low) {
  const Mat gam = imm.induced_chart(w.chart()).metric_at(p);
  const Mat rho0 = trace_free(relative_schouten(imm, w, p, ambient_low, sub_low), gam);
  const Mat diff = induced_mobius(imm, w, l, p, ambient_low) - intrinsic_mobius(imm, w, l, p, sub_low);
  return (diff - rho0 * evaluate(l.value, p)).cwiseAbs().maxCoeff();
}

double induced_laplace(const Immersion& imm, const WeylStructure& w, const Density& l, std::span<const double> p,
                       const LowDimStructure& ambient_low) {
  const int n = imm.n();
  const Weight k = Weight(1) - Weight(n, 2);
  if (l.weight != k) throw WeightError("the induced Laplace operator acts on densities of weight 1 - n/2");
  if (imm.m() == 2 && !ambient_low.mobius) throw MissingStructureError("a surface ambient needs a Möbius structure");
  Along A = along(imm, w, p);
  FundamentalForm F = form_of(A);
  const Mat gam = A.gamma_value();
  const double u = evaluate(l.value, p);
  const double kd = boost::rational_cast<double>(k);
  const Mat hess = hessian_weighted(imm.induced_weyl(w), l, p);
  const Mat hM = ambient_schouten(A, w, ambient_low).first;
  return trace(hess, gam) + kd * trace(hM, gam) * u + kd * n / 2.0 * F.H.squaredNorm() * u;
}

// Classification ------------------------------------------------------------------

std::string to_string(Geodesy g) {
  switch (g) {
    case Geodesy::TotallyUmbilical: return "totally_umbilical";
    case Geodesy::WeaklyGeodesic: return "weakly_geodesic";
    case Geodesy::StronglyGeodesic: return "strongly_geodesic";
    case Geodesy::None: break;
  }
  return "none";
}

double norm_B0(const std::vector<Mat>& B0, const Mat& induced) {
  const Mat gi = induced.inverse();
  double s = 0.0;
  for (const auto& b : B0) s += (gi * b * gi * b.transpose()).trace();
  return std::sqrt(std::max(0.0, s));
}

double norm_mu(const Mat& mu, const Mat& induced) {
  return std::sqrt(std::max(0.0, (mu.transpose() * induced.inverse() * mu).trace()));
}

double norm_rho(const Mat& rho, const Mat& induced) {
  const Mat gi = induced.inverse();
  return std::sqrt(std::max(0.0, (gi * rho * gi * rho.transpose()).trace()));
}

GeodesyReport classify_geodesy(const Immersion& imm, const std::vector<std::vector<double>>& grid,
                               const LowDimStructure& ambient_low, const LowDimStructure& sub_low, double tolerance) {
  if (grid.empty()) throw ValidationError("classification grid is empty");
  if (imm.m() == 2 && !ambient_low.mobius) throw MissingStructureError("a surface ambient needs a Möbius structure");
  if (imm.n() == 2 && !sub_low.mobius) throw MissingStructureError("classifying a surface needs its Möbius structure");
  if (imm.n() == 1 && !sub_low.laplace) throw MissingStructureError("classifying a curve needs its Laplace structure");
  const WeylStructure w(imm.ambient());
  auto evaluate_point = [&](const std::vector<double>& p) {
    PointInvariants P;
    P.point = p;
    Along A = along(imm, w, p);
    P.form = form_of(A);
    P.mu = mixed_schouten(imm, w, p, ambient_low);
    P.rho = relative_schouten(imm, w, p, ambient_low, sub_low);
    const Mat gam = A.gamma_value();
    P.norm_B0 = norm_B0(P.form.B0, gam);
    P.norm_mu = norm_mu(P.mu, gam);
    P.norm_rho = norm_rho(P.rho, gam);
    return P;
  };
  GeodesyReport R;
  R.tolerance = tolerance;
  const std::size_t batch = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < grid.size(); start += batch) {
    std::vector<std::future<PointInvariants>> jobs;
    for (std::size_t i = start; i < std::min(grid.size(), start + batch); ++i)
      jobs.push_back(std::async(std::launch::async, evaluate_point, std::cref(grid[i])));
    for (auto& j : jobs) {
      R.points.push_back(j.get());
      R.sup_B0 = std::max(R.sup_B0, R.points.back().norm_B0);
      R.sup_mu = std::max(R.sup_mu, R.points.back().norm_mu);
      R.sup_rho = std::max(R.sup_rho, R.points.back().norm_rho);
    }
  }
  if (R.sup_B0 <= tolerance) {
    R.classification = Geodesy::TotallyUmbilical;
    if (R.sup_mu <= tolerance) {
      R.classification = Geodesy::WeaklyGeodesic;
      if (R.sup_rho <= tolerance) R.classification = Geodesy::StronglyGeodesic;
    }
  }
  return R;
}

}  // namespace confgeom
