#pragma once

// Submanifolds phi: N-chart -> M-chart of a conformal manifold.
//
// All tensors are reported in the gauge of the ambient Weyl structure's chart.
// Normal components refer to the g-orthonormal normal frame xi_1..xi_r obtained
// by Gram-Schmidt of the ambient coordinate basis against the tangent space.
// Induced quantities on N use the induced gauge metric phi^* g, so a density on
// N is a function of the N coordinates standing for u * l_{phi^* g}.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "confgeom/conformal.hpp"

namespace confgeom {

class Immersion {
 public:
  Immersion() = default;
  /// `components` are the ambient coordinates phi^a as expressions in x1..xn.
  Immersion(ConformalChart ambient, int n, std::vector<Expr> components);
  static Immersion from_strings(ConformalChart ambient, int n, const std::vector<std::string>& components);

  int n() const { return n_; }
  int m() const { return ambient_.dim(); }
  int codim() const { return m() - n_; }
  const ConformalChart& ambient() const { return ambient_; }
  const std::vector<Expr>& components() const { return components_; }

  Vec image(std::span<const double> p) const;
  /// m x n matrix of d phi^a / d x_i; raises RankDeficiencyError unless of rank n.
  Mat differential(std::span<const double> p) const;

  /// Chart of N with gauge metric phi^* g for the gauge of `chart` (default: the ambient chart).
  ConformalChart induced_chart() const { return induced_chart(ambient_); }
  ConformalChart induced_chart(const ConformalChart& chart) const;
  /// Pullback of an ambient 1-form.
  std::vector<Expr> pullback(const std::vector<Expr>& one_form) const;
  /// The Weyl structure induced by w on N, (nabla_X Y)^N.
  WeylStructure induced_weyl(const WeylStructure& w) const;

 private:
  ConformalChart ambient_;
  int n_ = 0;
  std::vector<Expr> components_;
};

struct FrameData {
  Mat metric;   // ambient gauge metric at phi(p)
  Mat tangent;  // m x n, columns d phi(d_i)
  Mat normal;   // m x r, g-orthonormal columns
  Mat induced;  // n x n induced metric

  /// Tangential and normal components of an ambient vector.
  Vec tangential_part(const Vec& a) const;
  Vec normal_part(const Vec& a) const;
};

FrameData frame_at(const Immersion& imm, const ConformalChart& gauge, std::span<const double> p);

struct FundamentalForm {
  std::vector<Mat> B;   // B[alpha](i, j) = g(B(d_i, d_j), xi_alpha)
  std::vector<Mat> B0;  // trace-free part
  Vec H;                // H(xi_alpha)
  Mat normal;           // the frame xi
  /// Mean curvature as an ambient vector, sum_alpha H_alpha xi_alpha.
  Vec mean_curvature_vector() const;
};

FundamentalForm fundamental_form(const Immersion& imm, const WeylStructure& w, std::span<const double> p);

/// Ambient covector at phi(p) restricting to theta_N on TN whose normal part
/// cancels the mean curvature of the gauge Levi-Civita connection.
Vec extend_adapted(const Immersion& imm, const Vec& theta_N, std::span<const double> p);

/// Curvature of the weightless normal connection: kappa[i * n + j] is the
/// skew r x r matrix kappa(d_i, d_j) in the normal frame.
std::vector<Mat> normal_curvature_kappa(const Immersion& imm, const WeylStructure& w, std::span<const double> p);

/// (delta B0)(d_i)(xi_alpha), an n x r matrix.
Mat codifferential_B0(const Immersion& imm, const WeylStructure& w, std::span<const double> p);

/// Mixed Schouten-Weyl tensor mu(d_i)(xi_alpha), an n x r matrix.  A Möbius
/// structure on M is needed when m = 2.
Mat mixed_schouten(const Immersion& imm, const WeylStructure& w, std::span<const double> p,
                   const LowDimStructure& ambient_low = {});

/// Relative Schouten-Weyl tensor on TN.  N needs a Möbius (n = 2) or Laplace
/// (n = 1) structure; M needs a Möbius structure when m = 2.
Mat relative_schouten(const Immersion& imm, const WeylStructure& w, std::span<const double> p,
                      const LowDimStructure& ambient_low = {}, const LowDimStructure& sub_low = {});

/// Induced Möbius operator applied to a weight-1 density l on N (n >= 2).
Mat induced_mobius(const Immersion& imm, const WeylStructure& w, const Density& l, std::span<const double> p,
                   const LowDimStructure& ambient_low = {});
/// Canonical Möbius operator of N itself applied to l (n >= 3, or n = 2 with a Möbius structure).
Mat intrinsic_mobius(const Immersion& imm, const WeylStructure& w, const Density& l, std::span<const double> p,
                     const LowDimStructure& sub_low = {});
/// max |(M^ind - M^N) l - rho_0 l|.
double mobius_comparison_residual(const Immersion& imm, const WeylStructure& w, const Density& l,
                                  std::span<const double> p, const LowDimStructure& ambient_low = {},
                                  const LowDimStructure& sub_low = {});

/// Induced Laplace operator applied to a density of weight 1 - n/2.
double induced_laplace(const Immersion& imm, const WeylStructure& w, const Density& l, std::span<const double> p,
                       const LowDimStructure& ambient_low = {});

enum class Geodesy { None, TotallyUmbilical, WeaklyGeodesic, StronglyGeodesic };
std::string to_string(Geodesy g);

struct PointInvariants {
  std::vector<double> point;
  FundamentalForm form;
  Mat mu;
  Mat rho;
  double norm_B0 = 0.0, norm_mu = 0.0, norm_rho = 0.0;
};

struct GeodesyReport {
  Geodesy classification = Geodesy::None;
  double sup_B0 = 0.0, sup_mu = 0.0, sup_rho = 0.0;
  double tolerance = 1e-6;
  std::vector<PointInvariants> points;
};

/// Evaluates B0, mu and rho with the gauge Levi-Civita connection on every grid
/// point (concurrently) and thresholds their sup-norms.
GeodesyReport classify_geodesy(const Immersion& imm, const std::vector<std::vector<double>>& grid,
                               const LowDimStructure& ambient_low = {}, const LowDimStructure& sub_low = {},
                               double tolerance = 1e-6);

/// Gauge norms of the invariants.
double norm_B0(const std::vector<Mat>& B0, const Mat& induced);
double norm_mu(const Mat& mu, const Mat& induced);
double norm_rho(const Mat& rho, const Mat& induced);

}  // namespace confgeom
