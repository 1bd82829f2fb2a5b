#pragma once

// Metrics on the total space of a vector bundle nu -> N realizing prescribed
// embedding invariants of the zero section.
//
// Total-space coordinates are x1..xn (the N-chart) followed by y1..yr, the
// components of a fiber point xi = y^alpha e_alpha in a fixed frame e of nu.
// Fiber-valued data (B0, the connection, a) use components in that frame.
// The connection is nabla^nu_{d_i} e_beta = sum_alpha A_i(alpha, beta) e_alpha.
// a, b and f are fields on N, extended constantly along the fibers.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "confgeom/conformal.hpp"
#include "confgeom/embedding.hpp"

namespace confgeom {

struct RealizationData {
  int n = 0;
  int r = 0;
  ExprMatrix base_metric;              // n x n in x1..xn
  Mat fiber_metric;                    // r x r, constant
  std::vector<ExprMatrix> connection;  // n matrices A_i, r x r
  std::vector<ExprMatrix> B0;          // r matrices B0^alpha, n x n, trace-free
  ExprMatrix a;                        // n x r, a(d_i, e_alpha)
  ExprMatrix b;                        // n x n
  Expr f;
  /// Möbius (n = 2) or Laplace (n = 1) structure of N, declared on base_chart().
  LowDimStructure base_low;
  /// Möbius structure of the total space, used when n = r = 1.
  std::optional<ExprMatrix> total_h0;

  /// Euclidean base, identity fiber metric and all other data zero.
  static RealizationData trivial(int n, int r);

  ConformalChart base_chart() const;
  /// Shapes, symmetry, positivity, metric compatibility of the connection and
  /// trace-freeness of B0, checked at the sample points; raises ValidationError.
  void validate(const std::vector<std::vector<double>>& base_samples) const;
};

struct TotalSpaceChart {
  int n = 0;
  int r = 0;
  ConformalChart chart;
  /// g~ is positive definite for |xi| <= epsilon over the sampled base points.
  double epsilon = 0.0;
  /// Möbius structure of the total space (n = r = 1 only).
  LowDimStructure low;
  /// The base structure moved to the zero section's induced chart.
  LowDimStructure sub_low;

  /// The zero section x -> (x, 0).
  Immersion zero_section() const;
  /// (x, 0) in total-space coordinates.
  std::vector<double> zero_point(std::span<const double> x) const;
};

/// Assembles g~ from horizontal lifts of the connection.  With no requested
/// epsilon, starts at 0.1 * sqrt(min eigenvalue of g + g^nu) and bisects down;
/// a requested epsilon that fails raises SingularMetricError.
TotalSpaceChart build_total_metric(const RealizationData& data, const std::vector<std::vector<double>>& base_samples,
                                   std::optional<double> epsilon = {});

struct PrescribedInvariants {
  ExprMatrix mu;   // n x r, mu(d_i)(e_alpha)
  ExprMatrix rho;  // n x n, symmetric
};

/// Chooses a, b (trace-free) and f so that the zero section has the
/// prescribed mu and rho.  For n = r = 1 a total-space Möbius structure is
/// chosen instead.  Hypersurfaces (r = 1, n >= 2) accept only mu = 0 and the
/// one achievable trace of rho; violations raise ValidationError.
RealizationData solve_prescription(RealizationData geometry, const PrescribedInvariants& targets,
                                   const std::vector<std::vector<double>>& base_samples);

/// Gram-Schmidt of the fiber frame e against g^nu: column alpha holds the
/// e-components of the orthonormal normal vector xi_alpha of the zero section.
Mat orthonormal_fiber_frame(const Mat& fiber_metric);

/// Prescribed invariants at x in the orthonormal normal frame, for direct
/// comparison with the embedding module.
struct FrameInvariants {
  std::vector<Mat> B0;
  Mat mu;
  Mat rho;
};
FrameInvariants prescribed_in_frame(const RealizationData& data, const PrescribedInvariants& targets,
                                    std::span<const double> x);

/// max |computed - prescribed| of B0, mu and rho of the zero section at x.
struct RoundTripResidual {
  double B0 = 0.0, mu = 0.0, rho = 0.0;
  double max() const;
};
RoundTripResidual round_trip_residual(const RealizationData& data, const TotalSpaceChart& total,
                                      const PrescribedInvariants& targets, std::span<const double> x);

/// Zero-section Ricci tensor of g~ against the block formulas
///   ric_ij = ric^N_ij - r b_ij + 2 <B0_i., B0_.j>
///   ric_ia = -(delta B0)_ia - (r - 1) a_ia
///   ric_ab = <B0^a, B0^b> - (tr b + 2 (r - 1) f) g^nu_ab
/// and the scalar curvature they imply.
struct RicciTableResidual {
  double tangential = 0.0, mixed = 0.0, vertical = 0.0, scalar = 0.0;
  double max() const;
};
RicciTableResidual ricci_table_residual(const RealizationData& data, const TotalSpaceChart& total,
                                        std::span<const double> x);

/// Covariant derivatives of horizontal lifts and vertical fields near the
/// zero section, compared to first order in the fiber with their closed forms.
/// Horizontal parts of nabla_zeta X and nabla_X zeta are raised with the
/// horizontal block g - 2 g^nu(B0, xi), which adds -2 B_xi B_zeta X.
struct CovariantTableResidual {
  double horizontal_horizontal = 0.0, vertical_horizontal = 0.0, horizontal_vertical = 0.0,
         vertical_vertical = 0.0;
  double max() const;
};
CovariantTableResidual covariant_table_residual(const RealizationData& data, const TotalSpaceChart& total,
                                                std::span<const double> x);

/// Components of delta B0 lowered into the fiber, (delta B0)(d_i)(e_alpha), as fields.
ExprMatrix codifferential_B0_fields(const RealizationData& data);

/// Pseudo-geodesic surface in R^4: flat N = R^2, trivial rank-2 bundle,
/// B0(dx, dy) = V, B0(dx, dx) = -B0(dy, dy) = W, mu = 0, rho = -g/2.
struct Section5Report {
  RealizationData data;
  TotalSpaceChart total;
  Mat a, b;
  double f = 0.0;
  double max_bracket_identity = 0.0;  // <X^t,X^s>, B0(X^t,X^s), <theta^t,theta^s>
  double max_adapted_acceleration = 0.0;  // |nabla^t_{X^t} X^t|
  double max_h_normal = 0.0;              // |h^t(X^t, V)|, |h^t(X^t, W)|
  double max_h_tangent = 0.0;             // |h^t(X^t, X^s)|
  double max_h_formula = 0.0;  // |h^t(X^t,X^s) - rho + <X^t,X^s>/2 - <theta^t, B0(X^t,X^s)>|
  double min_B0 = 0.0;
  GeodesyReport classification;
  int grid = 8;
  bool passed(double algebraic_tol = 1e-10, double tol = 1e-6) const;
};
Section5Report section5_scenario(int grid = 8);

/// Weyl structure nabla^t = nabla^{g~} + theta^t with theta^t = cos(2t) dy1 + sin(2t) dy2.
WeylStructure section5_weyl(const TotalSpaceChart& total, double t);

/// Conformal factor f = sum_k (t_k - h_k)(x) y_k for a tubular immersion
/// x -> (x, c), where h_k = g(H, d_{y_k}) for the gauge metric g.  The target
/// is the normal covector sum_k t_k dy_k.  Along N f = 0 and e^{-2f} g has the
/// target mean curvature.  Raises ValidationError for non-tubular immersions.
Expr adapted_factor(const Immersion& imm, const std::vector<Expr>& target);
/// h_k = g(H, d_{y_k}) of a tubular immersion, as fields in x1..xn.
std::vector<Expr> mean_curvature_covector(const Immersion& imm);

}  // namespace confgeom
