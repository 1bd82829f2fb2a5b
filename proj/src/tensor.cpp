#include "confgeom/tensor.hpp"

#include <cmath>

#include "confgeom/errors.hpp"

namespace confgeom {

namespace {

std::size_t power(int n, int r) {
  std::size_t s = 1;
  for (int i = 0; i < r; ++i) s *= static_cast<std::size_t>(n);
  return s;
}

Mat checked_inverse(const Mat& g) {
  Eigen::FullPivLU<Mat> lu(g);
  if (!lu.isInvertible()) throw SingularMetricError("gauge metric is singular");
  return lu.inverse();
}

/// Contracts slot `slot` of t with matrix m: out[..a..] = sum_b m(a, b) t[..b..].
std::vector<double> contract_slot(const WeightedTensor& t, int slot, const Mat& m) {
  const int n = t.dim(), r = t.rank();
  const std::size_t stride = power(n, r - 1 - slot);
  std::vector<double> out(t.data().size(), 0.0);
  const auto& in = t.data();
  const std::size_t block = stride * static_cast<std::size_t>(n);
  for (std::size_t base = 0; base < in.size(); base += block)
    for (std::size_t inner = 0; inner < stride; ++inner)
      for (int a = 0; a < n; ++a) {
        double s = 0.0;
        for (int b = 0; b < n; ++b) s += m(a, b) * in[base + static_cast<std::size_t>(b) * stride + inner];
        out[base + static_cast<std::size_t>(a) * stride + inner] = s;
      }
  return out;
}

}  // namespace

WeightedTensor::WeightedTensor(std::vector<Slot> slots, Weight weight, Mat metric)
    : n_(static_cast<int>(metric.rows())), slots_(std::move(slots)), weight_(weight), metric_(std::move(metric)) {
  if (metric_.rows() != metric_.cols()) throw DimensionError("metric must be square");
  if (n_ < 1 || n_ > 8) throw DimensionError("tensor dimension outside [1, 8]");
  data_.assign(power(n_, rank()), 0.0);
}

WeightedTensor WeightedTensor::scalar(double value, Weight weight, Mat metric) {
  WeightedTensor t({}, weight, std::move(metric));
  t.data_[0] = value;
  return t;
}

WeightedTensor WeightedTensor::vector(const Vec& v, Mat metric) {
  WeightedTensor t({Slot::Contra}, 0, std::move(metric));
  for (int i = 0; i < t.n_; ++i) t.data_[static_cast<std::size_t>(i)] = v(i);
  return t;
}

WeightedTensor WeightedTensor::covector(const Vec& v, Mat metric) {
  WeightedTensor t({Slot::Co}, 0, std::move(metric));
  for (int i = 0; i < t.n_; ++i) t.data_[static_cast<std::size_t>(i)] = v(i);
  return t;
}

WeightedTensor WeightedTensor::bilinear(const Mat& a, Mat metric, Weight weight) {
  WeightedTensor t({Slot::Co, Slot::Co}, weight, std::move(metric));
  for (int i = 0; i < t.n_; ++i)
    for (int j = 0; j < t.n_; ++j) t({i, j}) = a(i, j);
  return t;
}

WeightedTensor WeightedTensor::endomorphism(const Mat& a, Mat metric) {
  WeightedTensor t({Slot::Contra, Slot::Co}, 0, std::move(metric));
  for (int i = 0; i < t.n_; ++i)
    for (int j = 0; j < t.n_; ++j) t({i, j}) = a(i, j);
  return t;
}

WeightedTensor WeightedTensor::conformal_metric(const Mat& metric) { return bilinear(metric, metric, 2); }

Weight WeightedTensor::conformal_weight() const {
  Weight w = weight_;
  for (Slot s : slots_) w += s == Slot::Contra ? 1 : -1;
  return w;
}

std::size_t WeightedTensor::offset(std::span<const int> idx) const {
  if (static_cast<int>(idx.size()) != rank()) throw DimensionError("index count does not match tensor rank");
  std::size_t o = 0;
  for (int i : idx) {
    if (i < 0 || i >= n_) throw DimensionError("tensor index out of range");
    o = o * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i);
  }
  return o;
}

double& WeightedTensor::at(std::span<const int> idx) { return data_[offset(idx)]; }
double WeightedTensor::at(std::span<const int> idx) const { return data_[offset(idx)]; }

Mat WeightedTensor::as_matrix() const {
  if (rank() != 2) throw DimensionError("as_matrix needs a rank-2 tensor");
  Mat m(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) m(i, j) = (*this)({i, j});
  return m;
}

Vec WeightedTensor::as_vector() const {
  if (rank() != 1) throw DimensionError("as_vector needs a rank-1 tensor");
  return Eigen::Map<const Vec>(data_.data(), n_);
}

double WeightedTensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

void WeightedTensor::check_compatible(const WeightedTensor& o) const {
  if (slots_ != o.slots_ || n_ != o.n_) throw DimensionError("tensor shapes differ");
  if (weight_ != o.weight_) throw WeightError("adding tensors of different weights");
}

WeightedTensor& WeightedTensor::operator+=(const WeightedTensor& o) {
  check_compatible(o);
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
  return *this;
}

WeightedTensor& WeightedTensor::operator-=(const WeightedTensor& o) {
  check_compatible(o);
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
  return *this;
}

WeightedTensor& WeightedTensor::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

WeightedTensor operator+(WeightedTensor a, const WeightedTensor& b) { return a += b; }
WeightedTensor operator-(WeightedTensor a, const WeightedTensor& b) { return a -= b; }
WeightedTensor operator*(double s, WeightedTensor a) { return a *= s; }

WeightedTensor raise(const WeightedTensor& t, int slot) {
  if (slot < 0 || slot >= t.rank() || t.slots()[static_cast<std::size_t>(slot)] != Slot::Co)
    throw DimensionError("raise needs a covariant slot");
  auto slots = t.slots();
  slots[static_cast<std::size_t>(slot)] = Slot::Contra;
  WeightedTensor out(slots, t.weight() - 2, t.metric());
  out.data() = contract_slot(t, slot, checked_inverse(t.metric()));
  return out;
}

WeightedTensor lower(const WeightedTensor& t, int slot) {
  if (slot < 0 || slot >= t.rank() || t.slots()[static_cast<std::size_t>(slot)] != Slot::Contra)
    throw DimensionError("lower needs a contravariant slot");
  auto slots = t.slots();
  slots[static_cast<std::size_t>(slot)] = Slot::Co;
  WeightedTensor out(slots, t.weight() + 2, t.metric());
  out.data() = contract_slot(t, slot, t.metric());
  return out;
}

WeightedTensor wedge_vf(const WeightedTensor& theta, const WeightedTensor& x) {
  if (theta.rank() != 1 || theta.slots()[0] != Slot::Co || x.rank() != 1 || x.slots()[0] != Slot::Contra)
    throw DimensionError("wedge_vf needs a covector and a vector");
  if (theta.dim() != x.dim()) throw DimensionError("wedge_vf dimension mismatch");
  const Vec th = theta.as_vector(), xv = x.as_vector();
  const Vec th_sharp = checked_inverse(theta.metric()) * th;
  const Vec x_flat = theta.metric() * xv;
  // column k is the image of d_k
  Mat e = xv * th.transpose() - th_sharp * x_flat.transpose();
  auto out = WeightedTensor::endomorphism(e, theta.metric());
  return out;
}

WeightedTensor tilde_theta(const WeightedTensor& theta, const WeightedTensor& x) {
  WeightedTensor out = wedge_vf(theta, x);
  const double s = theta.as_vector().dot(x.as_vector());
  for (int i = 0; i < out.dim(); ++i) out({i, i}) += s;
  return out;
}

WeightedTensor co_act(const WeightedTensor& e, const WeightedTensor& t) {
  if (e.rank() != 2 || e.slots()[0] != Slot::Contra || e.slots()[1] != Slot::Co)
    throw DimensionError("co_act needs an endomorphism");
  const Mat em = e.as_matrix();
  const double s = em.trace() / e.dim();
  WeightedTensor out(t.slots(), t.weight(), t.metric());
  for (std::size_t k = 0; k < out.data().size(); ++k)
    out.data()[k] = boost::rational_cast<double>(t.weight()) * s * t.data()[k];
  const Mat minus_et = -em.transpose();
  for (int slot = 0; slot < t.rank(); ++slot) {
    const Mat& m = t.slots()[static_cast<std::size_t>(slot)] == Slot::Contra ? em : minus_et;
    auto part = contract_slot(t, slot, m);
    for (std::size_t k = 0; k < part.size(); ++k) out.data()[k] += part[k];
  }
  return out;
}

// Curvature ------------------------------------------------------------------

CurvatureTensor::CurvatureTensor(int n, Mat metric, Weight weight)
    : t_({Slot::Co, Slot::Co, Slot::Co, Slot::Contra}, weight, std::move(metric)) {
  if (t_.dim() != n) throw DimensionError("curvature dimension mismatch");
}

CurvatureTensor::CurvatureTensor(WeightedTensor t) : t_(std::move(t)) {
  if (t_.slots() != std::vector<Slot>{Slot::Co, Slot::Co, Slot::Co, Slot::Contra})
    throw DimensionError("curvature tensor must have slots (Co, Co, Co, Contra)");
}

double CurvatureTensor::bianchi_residual() const {
  const int n = dim();
  double m = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          m = std::max(m, std::abs((*this)(i, j, k, l) + (*this)(j, k, i, l) + (*this)(k, i, j, l)));
  return m;
}

double CurvatureTensor::antisymmetry_residual() const {
  const int n = dim();
  double m = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) m = std::max(m, std::abs((*this)(i, j, k, l) + (*this)(j, i, k, l)));
  return m;
}

double CurvatureTensor::skew_residual() const {
  const int n = dim();
  const Mat& g = metric();
  double m = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Mat e(n, n);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) e(l, k) = (*this)(i, j, k, l);
      e -= (e.trace() / n) * Mat::Identity(n, n);
      const Mat lowered = g * e;
      m = std::max(m, (lowered + lowered.transpose()).cwiseAbs().maxCoeff());
    }
  return m;
}

CurvatureTensor& CurvatureTensor::operator+=(const CurvatureTensor& o) {
  t_ += o.t_;
  return *this;
}

CurvatureTensor& CurvatureTensor::operator-=(const CurvatureTensor& o) {
  t_ -= o.t_;
  return *this;
}

CurvatureTensor operator+(CurvatureTensor a, const CurvatureTensor& b) { return a += b; }
CurvatureTensor operator-(CurvatureTensor a, const CurvatureTensor& b) { return a -= b; }

namespace {
void require_bilinear(const WeightedTensor& a, const char* op) {
  if (a.rank() != 2 || a.slots()[0] != Slot::Co || a.slots()[1] != Slot::Co)
    throw DimensionError(std::string(op) + " needs a covariant bilinear form");
}
}  // namespace

CurvatureTensor suspension(const WeightedTensor& a) {
  require_bilinear(a, "suspension");
  const int n = a.dim();
  const Mat& g = a.metric();
  const Mat am = a.as_matrix();
  // a_up(j, l) = A(d_j, .)^# component l
  const Mat a_up = am * checked_inverse(g);
  CurvatureTensor r(n, g, a.weight());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double v = -g(i, k) * a_up(j, l) + g(j, k) * a_up(i, l);
          if (l == i) v += am(j, k);
          if (l == j) v -= am(i, k);
          r(i, j, k, l) = v;
        }
  return r;
}

CurvatureTensor two_form_times_id(const WeightedTensor& f) {
  require_bilinear(f, "two_form_times_id");
  const int n = f.dim();
  CurvatureTensor r(n, f.metric(), f.weight());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) r(i, j, k, k) = f({i, j});
  return r;
}

WeightedTensor ricci_contraction(const CurvatureTensor& r) {
  const int n = r.dim();
  Mat ric = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i) ric(j, k) += r(i, j, k, i);
  return WeightedTensor::bilinear(ric, r.metric(), r.tensor().weight());
}

WeightedTensor h_map(const WeightedTensor& a) {
  require_bilinear(a, "h_map");
  const int n = a.dim();
  if (n < 3) throw DimensionError("h_map needs dimension >= 3");
  const Mat& g = a.metric();
  const Mat am = a.as_matrix();
  const Mat h = trace_free(symmetric_part(am), g) / (n - 2) + trace(am, g) / (2.0 * n * (n - 1)) * g +
                skew_part(am) / (n - 2);
  return WeightedTensor::bilinear(h, g, a.weight());
}

Mat symmetric_part(const Mat& a) { return 0.5 * (a + a.transpose()); }
Mat skew_part(const Mat& a) { return 0.5 * (a - a.transpose()); }

double trace(const Mat& a, const Mat& g) { return (checked_inverse(g) * a).trace(); }

Mat trace_free(const Mat& a, const Mat& g) { return a - (trace(a, g) / static_cast<double>(g.rows())) * g; }

}  // namespace confgeom
