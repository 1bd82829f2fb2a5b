#pragma once

// Chart-level conformal geometry.  A conformal class is represented by one
// gauge metric g; a Weyl structure is nabla = nabla^g + theta~.  Densities of
// weight k are scalar fields u standing for u * l_g, where c = l_g^2 g.
//
// Gauge change g' = e^{2f} g: the same Weyl structure has theta' = theta - df,
// a weight-k density has u' = e^{kf} u.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "confgeom/expr.hpp"
#include "confgeom/tensor.hpp"

namespace confgeom {

using ExprMatrix = std::vector<std::vector<Expr>>;

class ConformalChart {
 public:
  ConformalChart() = default;
  /// `metric` must be a symmetric dim x dim table of expressions.
  ConformalChart(int dim, ExprMatrix metric, std::map<std::string, Expr> gauge_factors = {});
  static ConformalChart from_strings(const std::vector<std::vector<std::string>>& metric,
                                     const std::map<std::string, std::string>& gauge_factors = {});
  static ConformalChart euclidean(int dim);
  /// Unit round sphere in stereographic coordinates, g = 4 delta / (1 + |x|^2)^2.
  static ConformalChart round_sphere(int dim);

  int dim() const { return dim_; }
  const Expr& metric_expr(int i, int j) const {
    return metric_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  const ExprMatrix& metric_exprs() const { return metric_; }
  const std::map<std::string, Expr>& gauge_factors() const { return factors_; }
  const Expr& gauge_factor(const std::string& name) const;

  /// Gauge metric at p; raises SingularMetricError unless positive definite.
  Mat metric_at(std::span<const double> p) const;
  /// Jets of g_ij at p, row-major.
  std::vector<Jet> metric_jets(std::span<const double> p, int order) const;

  /// Chart of the same conformal class with gauge metric e^{2f} g.
  ConformalChart rescaled(const Expr& f) const;
  ConformalChart rescaled(const std::string& factor_name) const { return rescaled(gauge_factor(factor_name)); }

 private:
  int dim_ = 0;
  ExprMatrix metric_;
  std::map<std::string, Expr> factors_;
};

class WeylStructure {
 public:
  WeylStructure() = default;
  /// Levi-Civita connection of the gauge metric (theta = 0).
  explicit WeylStructure(ConformalChart chart);
  WeylStructure(ConformalChart chart, std::vector<Expr> theta);

  const ConformalChart& chart() const { return chart_; }
  int dim() const { return chart_.dim(); }
  const std::vector<Expr>& theta() const { return theta_; }
  Vec theta_at(std::span<const double> p) const;

  /// nabla + eta~.
  WeylStructure shifted(const std::vector<Expr>& eta) const;
  /// The same connection written relative to the gauge e^{2f} g.
  WeylStructure regauged(const Expr& f) const;

 private:
  ConformalChart chart_;
  std::vector<Expr> theta_;
};

/// Weighted density in the gauge of some chart.
struct Density {
  Expr value;
  Weight weight;

  /// Representation in the gauge e^{2f} g.
  Density regauged(const Expr& f) const;
};

/// Jets at one point of the metric, the Weyl 1-form, the Christoffel symbols
/// Gamma^k_ij = Gamma^g k_ij + theta_j delta^k_i + theta_i delta^k_j - g_ij theta^k
/// and the curvature R[i][j][k][l] = dx^l(R(d_i, d_j) d_k).
struct LocalGeometry {
  int m = 0;
  int order = 0;  // order of the metric jets
  std::vector<Jet> g, ginv, theta;
  std::vector<Jet> gamma;  // order - 1
  std::vector<Jet> riem;   // order - 2, empty when order < 2

  const Jet& G(int i, int j) const { return g[static_cast<std::size_t>(i * m + j)]; }
  const Jet& Ginv(int i, int j) const { return ginv[static_cast<std::size_t>(i * m + j)]; }
  const Jet& Gam(int k, int i, int j) const { return gamma[static_cast<std::size_t>((k * m + i) * m + j)]; }
  const Jet& R(int i, int j, int k, int l) const {
    return riem[static_cast<std::size_t>(((i * m + j) * m + k) * m + l)];
  }

  Mat metric() const;
  Mat inverse_metric() const;
  Vec theta_value() const;
  /// Christoffel values, index (k * m + i) * m + j.
  std::vector<double> christoffel() const;
  CurvatureTensor curvature() const;
};

/// Geometry from jets of g (row-major, m*m) and theta (m), all in the same variables.
LocalGeometry local_geometry(std::vector<Jet> g, std::vector<Jet> theta);
/// Geometry of a Weyl structure at p with metric jets of the given order (<= 3).
LocalGeometry local_geometry(const WeylStructure& w, std::span<const double> p, int order);

/// Inverse of a symmetric positive-definite matrix of jets (m x m, row-major).
std::vector<Jet> invert_jet_matrix(const std::vector<Jet>& a, int m);

/// Gamma^k_ij at p, index (k * m + i) * m + j.
std::vector<double> christoffel(const WeylStructure& w, std::span<const double> p);

/// Trace-free symmetric Schouten part of a Möbius surface, declared relative to
/// the Levi-Civita connection of the chart's gauge.
class MobiusStructure {
 public:
  MobiusStructure() = default;
  MobiusStructure(ConformalChart chart, ExprMatrix h0);
  /// h0 = 0 relative to the gauge.
  static MobiusStructure flat(ConformalChart chart);

  const ConformalChart& chart() const { return chart_; }
  const ExprMatrix& h0() const { return h0_; }
  /// Gauge h0, projected to its symmetric trace-free part.
  Mat h0_gauge_at(std::span<const double> p) const;

 private:
  ConformalChart chart_;
  ExprMatrix h0_;
};

/// Trace Schouten part of a Laplace curve, declared relative to the gauge connection.
class LaplaceStructure {
 public:
  LaplaceStructure() = default;
  LaplaceStructure(ConformalChart chart, Expr sigma);
  static LaplaceStructure flat(ConformalChart chart);

  const ConformalChart& chart() const { return chart_; }
  const Expr& sigma() const { return sigma_; }

 private:
  ConformalChart chart_;
  Expr sigma_;
};

/// Extra structure needed in dimension 2 (Möbius) and 1 (Laplace).
struct LowDimStructure {
  std::optional<MobiusStructure> mobius;
  std::optional<LaplaceStructure> laplace;
};

struct CurvaturePackage {
  int m = 0;
  Mat g;
  CurvatureTensor R;
  Mat F;         // Faraday 2-form
  Mat ric;       // Ricci contraction of R
  Mat ric_s0;    // trace-free symmetric part of ric
  double scal = 0.0;
  double sigma = 0.0;
  bool has_h = false;
  Mat h;         // full Schouten-Weyl tensor
  bool has_weyl = false;
  CurvatureTensor W;

  /// max |R - h ^ id - W - F (x) id| (m >= 3).
  double reassembly_residual() const;
};

/// Curvature decomposition of w at p.  In dimension 2 the full Schouten tensor
/// is filled only when a Möbius structure is supplied.
CurvaturePackage curvature_package(const WeylStructure& w, std::span<const double> p,
                                   const LowDimStructure& low = {});

/// Full Schouten-Weyl tensor; dimension 2 needs a Möbius and dimension 1 a Laplace structure.
Mat schouten(const WeylStructure& w, std::span<const double> p, const LowDimStructure& low = {});

/// (nabla_i theta)_j for a weight-0 one-form field eta and the connection of w.
Mat covariant_derivative_1form(const WeylStructure& w, const std::vector<Expr>& eta, std::span<const double> p);

struct TransformReport {
  double schouten = 0.0;  // Eq. scht residual (m >= 3)
  double h0 = 0.0;
  double s0 = 0.0;
  double faraday = 0.0;
  double weyl = 0.0;
  double max() const;
};

/// Residuals of the transformation laws between w and w.shifted(eta) at p.
TransformReport transform_check(const WeylStructure& w, const std::vector<Expr>& eta, std::span<const double> p,
                                const LowDimStructure& low = {});

/// Hess(X, Y) l = (nabla_X nabla l)(Y) for a density of weight l.weight.
Mat hessian_weighted(const WeylStructure& w, const Density& l, std::span<const double> p);

/// Residual of the Hessian transformation law between w and w.shifted(eta).
double hessian_transform_residual(const WeylStructure& w, const std::vector<Expr>& eta, const Density& l,
                                  std::span<const double> p);

/// Hess_0 l + h_0^s l for weight-1 densities, m >= 3.
Mat mobius_canonical(const WeylStructure& w, const Density& l, std::span<const double> p);
/// tr Hess l + (1 - m/2) sigma l for densities of weight 1 - m/2, m >= 2.
double laplace_canonical(const WeylStructure& w, const Density& l, std::span<const double> p);

/// Möbius h0 relative to the Weyl structure w (m = 2).
Mat mobius_h0_at(const MobiusStructure& M, const WeylStructure& w, std::span<const double> p);
/// Laplace sigma relative to the Weyl structure w (m = 1).
double laplace_sigma_at(const LaplaceStructure& L, const WeylStructure& w, std::span<const double> p);

/// Gradient expressions d f.
std::vector<Expr> gradient(const Expr& f, int dim);

}  // namespace confgeom
