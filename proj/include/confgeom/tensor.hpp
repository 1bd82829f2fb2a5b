#pragma once

// Pointwise weighted tensors in a gauge, and the curvature-algebra maps.
//
// A tensor with slots in TM / T*M and L-weight k is a section of
// (TM)^r (x) (T*M)^s (x) L^k.  In a gauge all weight bundles are trivialized, so
// only the components and the gauge metric value are stored.  The conformal
// weight is r - s + k.  Curvature tensors use the layout R[i][j][k][l] =
// dx^l(R(d_i, d_j) d_k).

#include <boost/rational.hpp>
#include <Eigen/Dense>
#include <initializer_list>
#include <span>
#include <vector>

namespace confgeom {

using Weight = boost::rational<long long>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Slot { Co, Contra };

class WeightedTensor {
 public:
  WeightedTensor() = default;
  /// Zero tensor with the given slots, L-weight and gauge metric value.
  WeightedTensor(std::vector<Slot> slots, Weight weight, Mat metric);

  static WeightedTensor scalar(double value, Weight weight, Mat metric);
  static WeightedTensor vector(const Vec& v, Mat metric);
  static WeightedTensor covector(const Vec& v, Mat metric);
  /// Covariant bilinear form of L-weight `weight`.
  static WeightedTensor bilinear(const Mat& a, Mat metric, Weight weight = 0);
  /// Endomorphism: slots (Contra, Co), component (l, k) = dx^l(A d_k).
  static WeightedTensor endomorphism(const Mat& a, Mat metric);
  /// The conformal structure c itself: bilinear form of L-weight 2.
  static WeightedTensor conformal_metric(const Mat& metric);

  int dim() const { return n_; }
  int rank() const { return static_cast<int>(slots_.size()); }
  const std::vector<Slot>& slots() const { return slots_; }
  Weight weight() const { return weight_; }
  Weight conformal_weight() const;
  const Mat& metric() const { return metric_; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double& at(std::span<const int> idx);
  double at(std::span<const int> idx) const;
  double& operator()(std::initializer_list<int> idx) { return at(std::span<const int>(idx.begin(), idx.size())); }
  double operator()(std::initializer_list<int> idx) const { return at(std::span<const int>(idx.begin(), idx.size())); }

  /// Rank-2 components as a matrix (row = first slot).
  Mat as_matrix() const;
  Vec as_vector() const;
  double max_abs() const;

  WeightedTensor& operator+=(const WeightedTensor& o);
  WeightedTensor& operator-=(const WeightedTensor& o);
  WeightedTensor& operator*=(double s);

 private:
  void check_compatible(const WeightedTensor& o) const;
  std::size_t offset(std::span<const int> idx) const;

  int n_ = 0;
  std::vector<Slot> slots_;
  Weight weight_ = 0;
  Mat metric_;
  std::vector<double> data_;
};

WeightedTensor operator+(WeightedTensor a, const WeightedTensor& b);
WeightedTensor operator-(WeightedTensor a, const WeightedTensor& b);
WeightedTensor operator*(double s, WeightedTensor a);

/// Raises a covariant slot with c^{-1}; L-weight changes by -2.
WeightedTensor raise(const WeightedTensor& t, int slot);
/// Lowers a contravariant slot with c; L-weight changes by +2.
WeightedTensor lower(const WeightedTensor& t, int slot);

/// (theta ^ X)(Y) = theta(Y) X - c(X, Y) theta^#.
WeightedTensor wedge_vf(const WeightedTensor& theta, const WeightedTensor& x);
/// theta~_X = theta ^ X + theta(X) id.
WeightedTensor tilde_theta(const WeightedTensor& theta, const WeightedTensor& x);
/// Derivation action of an element of co(n) on a weighted tensor.  The scalar
/// part tr(E)/n acts on L^k by multiplication with k tr(E)/n.
WeightedTensor co_act(const WeightedTensor& e, const WeightedTensor& t);

/// Curvature-shaped tensor: slots (Co, Co, Co, Contra), antisymmetric in the first pair.
class CurvatureTensor {
 public:
  CurvatureTensor() = default;
  CurvatureTensor(int n, Mat metric, Weight weight = 0);
  explicit CurvatureTensor(WeightedTensor t);

  int dim() const { return t_.dim(); }
  double& operator()(int i, int j, int k, int l) { return t_.data()[idx(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return t_.data()[idx(i, j, k, l)]; }
  const WeightedTensor& tensor() const { return t_; }
  const Mat& metric() const { return t_.metric(); }
  double max_abs() const { return t_.max_abs(); }

  /// max |R_ijk + R_jki + R_kij|.
  double bianchi_residual() const;
  /// max |R_ij + R_ji| over the 2-form slots.
  double antisymmetry_residual() const;
  /// max |c(R_ij Y, Z) + c(Y, R_ij Z)| for the skew part (trace part removed).
  double skew_residual() const;

  CurvatureTensor& operator+=(const CurvatureTensor& o);
  CurvatureTensor& operator-=(const CurvatureTensor& o);

 private:
  std::size_t idx(int i, int j, int k, int l) const {
    const auto n = static_cast<std::size_t>(t_.dim());
    return ((static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)) * n + static_cast<std::size_t>(k)) * n +
           static_cast<std::size_t>(l);
  }
  WeightedTensor t_;
};

CurvatureTensor operator+(CurvatureTensor a, const CurvatureTensor& b);
CurvatureTensor operator-(CurvatureTensor a, const CurvatureTensor& b);

/// (A ^ id)_{X,Y} Z = A(Y,Z)X - c(X,Z)A(Y)^# - A(X,Z)Y + c(Y,Z)A(X)^#.
CurvatureTensor suspension(const WeightedTensor& a);
/// F (x) id for a 2-form F.
CurvatureTensor two_form_times_id(const WeightedTensor& f);
/// ric(R)(X, Y) = tr(Z -> R_{Z,X} Y).
WeightedTensor ricci_contraction(const CurvatureTensor& r);
/// Inverse of A -> ric(A ^ id) for n >= 3.
WeightedTensor h_map(const WeightedTensor& a);

// Matrix helpers for bilinear forms in a gauge.
Mat symmetric_part(const Mat& a);
Mat skew_part(const Mat& a);
/// Trace-free part with respect to g.
Mat trace_free(const Mat& a, const Mat& g);
double trace(const Mat& a, const Mat& g);

}  // namespace confgeom
