#include "confgeom/jet.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <string>

#include "confgeom/errors.hpp"

namespace confgeom {

namespace {

int encode(const MultiIndex& alpha, int dim) {
  int code = 0;
  for (int i = dim - 1; i >= 0; --i) code = code * (kMaxJetOrder + 1) + alpha[static_cast<std::size_t>(i)];
  return code;
}

int degree_of(const MultiIndex& alpha) {
  int deg = 0;
  for (auto a : alpha) deg += a;
  return deg;
}

void enumerate(int dim, int remaining, int var, MultiIndex& current, std::vector<MultiIndex>& out) {
  if (var == dim) {
    if (remaining == 0) out.push_back(current);
    return;
  }
  for (int a = remaining; a >= 0; --a) {
    current[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(a);
    enumerate(dim, remaining - a, var + 1, current, out);
  }
  current[static_cast<std::size_t>(var)] = 0;
}

}  // namespace

JetLayout::JetLayout(int dim) : dim_(dim) {
  for (int deg = 0; deg <= kMaxJetOrder; ++deg) {
    MultiIndex current{};
    enumerate(dim, deg, 0, current, monomials_);
    size_upto_[static_cast<std::size_t>(deg)] = static_cast<int>(monomials_.size());
  }
  const auto count = monomials_.size();
  degree_.resize(count);
  factorial_.resize(count);
  int table = 1;
  for (int i = 0; i < dim; ++i) table *= kMaxJetOrder + 1;
  lookup_.assign(static_cast<std::size_t>(table), -1);
  for (std::size_t k = 0; k < count; ++k) {
    degree_[k] = degree_of(monomials_[k]);
    double fact = 1.0;
    for (auto a : monomials_[k])
      for (int j = 2; j <= a; ++j) fact *= j;
    factorial_[k] = fact;
    lookup_[static_cast<std::size_t>(encode(monomials_[k], dim))] = static_cast<int>(k);
  }
  raise_.assign(count * static_cast<std::size_t>(std::max(dim, 1)), -1);
  for (std::size_t k = 0; k < count; ++k) {
    for (int i = 0; i < dim; ++i) {
      MultiIndex up = monomials_[k];
      up[static_cast<std::size_t>(i)] += 1;
      raise_[k * static_cast<std::size_t>(dim) + static_cast<std::size_t>(i)] = index_of(up);
    }
  }
  for (int deg = 0; deg <= kMaxJetOrder; ++deg) {
    for (std::size_t a = 0; a < count; ++a) {
      for (std::size_t b = 0; b < count; ++b) {
        if (degree_[a] + degree_[b] != deg) continue;
        MultiIndex sum{};
        for (int i = 0; i < dim; ++i)
          sum[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(
              monomials_[a][static_cast<std::size_t>(i)] + monomials_[b][static_cast<std::size_t>(i)]);
        mul_.push_back({static_cast<std::uint16_t>(a), static_cast<std::uint16_t>(b),
                        static_cast<std::uint16_t>(index_of(sum))});
      }
    }
    mul_end_[static_cast<std::size_t>(deg)] = mul_.size();
  }
}

const JetLayout& JetLayout::get(int dim) {
  if (dim < 0 || dim > kMaxJetDim)
    throw DimensionError("jet dimension " + std::to_string(dim) + " outside [0, 8]");
  static std::array<std::unique_ptr<JetLayout>, kMaxJetDim + 1> layouts;
  static std::once_flag flags[kMaxJetDim + 1];
  auto d = static_cast<std::size_t>(dim);
  std::call_once(flags[d], [&] { layouts[d].reset(new JetLayout(dim)); });
  return *layouts[d];
}

int JetLayout::index_of(const MultiIndex& alpha) const {
  for (int i = dim_; i < kMaxJetDim; ++i)
    if (alpha[static_cast<std::size_t>(i)] != 0) return -1;
  if (degree_of(alpha) > kMaxJetOrder) return -1;
  return lookup_[static_cast<std::size_t>(encode(alpha, dim_))];
}

std::span<const JetLayout::MulTerm> JetLayout::mul_terms(int order) const {
  return {mul_.data(), mul_end_[static_cast<std::size_t>(order)]};
}

// ---------------------------------------------------------------------------

Jet::Jet() : layout_(&JetLayout::get(0)), order_(0), coeffs_(1, 0.0) {}

Jet::Jet(int dim, int order, double value) : layout_(&JetLayout::get(dim)), order_(order) {
  if (order < 0 || order > kMaxJetOrder)
    throw DimensionError("jet order " + std::to_string(order) + " outside [0, 3]");
  coeffs_.assign(static_cast<std::size_t>(layout_->size(order)), 0.0);
  coeffs_[0] = value;
}

Jet Jet::variable(int dim, int order, int index, double value) {
  if (index < 0 || index >= dim) throw DimensionError("jet variable index out of range");
  Jet j(dim, order, value);
  if (order >= 1) {
    MultiIndex e{};
    e[static_cast<std::size_t>(index)] = 1;
    j.coeffs_[static_cast<std::size_t>(j.layout_->index_of(e))] = 1.0;
  }
  return j;
}

double Jet::coefficient(std::span<const int> alpha) const {
  MultiIndex m{};
  int deg = 0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] < 0 || static_cast<int>(i) >= dim()) throw DimensionError("bad multi-index");
    m[i] = static_cast<std::uint8_t>(alpha[i]);
    deg += alpha[i];
  }
  if (deg > order_) throw DimensionError("multi-index exceeds jet order");
  return coeffs_[static_cast<std::size_t>(layout_->index_of(m))];
}

double Jet::derivative(std::initializer_list<int> variables) const {
  std::array<int, kMaxJetDim> alpha{};
  for (int v : variables) {
    if (v < 0 || v >= dim()) throw DimensionError("derivative variable out of range");
    ++alpha[static_cast<std::size_t>(v)];
  }
  double fact = 1.0;
  for (int a : alpha)
    for (int j = 2; j <= a; ++j) fact *= j;
  return fact * coefficient(std::span<const int>(alpha.data(), static_cast<std::size_t>(dim())));
}

Jet Jet::partial(int i) const {
  if (order_ == 0) throw DimensionError("cannot differentiate an order-0 jet");
  if (i < 0 || i >= dim()) throw DimensionError("partial index out of range");
  Jet r(dim(), order_ - 1);
  for (int k = 0; k < layout_->size(order_ - 1); ++k) {
    int up = layout_->raised(k, i);
    r.coeffs_[static_cast<std::size_t>(k)] =
        (layout_->monomial(k)[static_cast<std::size_t>(i)] + 1) * coeffs_[static_cast<std::size_t>(up)];
  }
  return r;
}

Jet Jet::truncated(int order) const {
  if (order >= order_) return *this;
  Jet r(*this);
  r.order_ = order;
  r.coeffs_.resize(static_cast<std::size_t>(layout_->size(order)));
  return r;
}

Jet& Jet::operator+=(const Jet& other) {
  if (other.order_ < order_) *this = truncated(other.order_);
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += other.coeffs_[k];
  return *this;
}

Jet& Jet::operator-=(const Jet& other) {
  if (other.order_ < order_) *this = truncated(other.order_);
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] -= other.coeffs_[k];
  return *this;
}

Jet& Jet::operator+=(double s) {
  coeffs_[0] += s;
  return *this;
}

Jet& Jet::operator-=(double s) {
  coeffs_[0] -= s;
  return *this;
}

Jet& Jet::operator*=(double s) {
  for (auto& c : coeffs_) c *= s;
  return *this;
}

Jet& Jet::operator/=(double s) {
  for (auto& c : coeffs_) c /= s;
  return *this;
}

Jet Jet::operator-() const {
  Jet r(*this);
  for (auto& c : r.coeffs_) c = -c;
  return r;
}

Jet operator*(const Jet& a, const Jet& b) {
  const int order = std::min(a.order_, b.order_);
  Jet r(a.dim(), order);
  if (order == 0) {
    r.coeffs_[0] = a.coeffs_[0] * b.coeffs_[0];
    return r;
  }
  for (const auto& t : a.layout_->mul_terms(order)) r.coeffs_[t.out] += a.coeffs_[t.lhs] * b.coeffs_[t.rhs];
  return r;
}

Jet operator+(Jet a, const Jet& b) { return a += b; }
Jet operator-(Jet a, const Jet& b) { return a -= b; }
Jet operator+(Jet a, double s) { return a += s; }
Jet operator+(double s, Jet a) { return a += s; }
Jet operator-(Jet a, double s) { return a -= s; }
Jet operator-(double s, const Jet& a) { return (-a) += s; }
Jet operator*(Jet a, double s) { return a *= s; }
Jet operator*(double s, Jet a) { return a *= s; }
Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
Jet operator/(Jet a, double s) {
  if (s == 0.0) throw DomainError("division by zero");
  return a /= s;
}
Jet operator/(double s, const Jet& a) { return reciprocal(a) * s; }

Jet apply_univariate(const Jet& u, const std::array<double, kMaxJetOrder + 1>& derivs) {
  Jet r(u.dim(), u.order(), derivs[0]);
  if (u.order() == 0) return r;
  Jet delta(u);
  delta.coeffs_[0] = 0.0;
  Jet power = delta;
  double inv_fact = 1.0;
  for (int k = 1; k <= u.order(); ++k) {
    inv_fact /= k;
    const double c = derivs[static_cast<std::size_t>(k)] * inv_fact;
    for (std::size_t i = 0; i < r.coeffs_.size(); ++i) r.coeffs_[i] += c * power.coeffs_[i];
    if (k < u.order()) power = power * delta;
  }
  return r;
}

Jet reciprocal(const Jet& u) {
  const double v = u.value();
  if (v == 0.0) throw DomainError("division by zero");
  const double i1 = 1.0 / v;
  return apply_univariate(u, {i1, -i1 * i1, 2.0 * i1 * i1 * i1, -6.0 * i1 * i1 * i1 * i1});
}

Jet sin(const Jet& u) {
  const double s = std::sin(u.value()), c = std::cos(u.value());
  return apply_univariate(u, {s, c, -s, -c});
}

Jet cos(const Jet& u) {
  const double s = std::sin(u.value()), c = std::cos(u.value());
  return apply_univariate(u, {c, -s, -c, s});
}

Jet exp(const Jet& u) {
  const double e = std::exp(u.value());
  return apply_univariate(u, {e, e, e, e});
}

Jet log(const Jet& u) {
  const double v = u.value();
  if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  const double i1 = 1.0 / v;
  return apply_univariate(u, {std::log(v), i1, -i1 * i1, 2.0 * i1 * i1 * i1});
}

Jet sqrt(const Jet& u) {
  const double v = u.value();
  if (!(v > 0.0)) throw DomainError("sqrt of non-positive value " + std::to_string(v));
  const double s = std::sqrt(v);
  return apply_univariate(u, {s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v)});
}

Jet pow(const Jet& u, int exponent) {
  if (exponent < 0) return reciprocal(pow(u, -exponent));
  Jet result(u.dim(), u.order(), 1.0);
  Jet base = u;
  while (exponent > 0) {
    if (exponent & 1) result = result * base;
    exponent >>= 1;
    if (exponent > 0) base = base * base;
  }
  return result;
}

Jet compose(const Jet& outer, std::span<const Jet> offsets) {
  const int m = outer.dim();
  if (static_cast<int>(offsets.size()) != m) throw DimensionError("compose: offset count mismatch");
  if (m == 0) return outer;
  const int n = offsets[0].dim();
  int order = outer.order();
  for (const auto& d : offsets) {
    if (d.dim() != n) throw DimensionError("compose: offsets of mixed dimension");
    order = std::min(order, d.order());
  }
  const JetLayout& lay = outer.layout();
  std::vector<Jet> powers;
  powers.reserve(static_cast<std::size_t>(lay.size(order)));
  powers.emplace_back(n, order, 1.0);
  Jet result(n, order, outer.coeffs_[0]);
  for (int k = 1; k < lay.size(order); ++k) {
    MultiIndex alpha = lay.monomial(k);
    int i = 0;
    while (alpha[static_cast<std::size_t>(i)] == 0) ++i;
    alpha[static_cast<std::size_t>(i)] -= 1;
    const int prev = lay.index_of(alpha);
    Jet delta_i = offsets[static_cast<std::size_t>(i)].truncated(order);
    delta_i.coeffs_[0] = 0.0;
    powers.push_back(powers[static_cast<std::size_t>(prev)] * delta_i);
    const double c = outer.coeffs_[static_cast<std::size_t>(k)];
    if (c != 0.0) {
      const auto& p = powers.back();
      for (std::size_t t = 0; t < result.coeffs_.size(); ++t) result.coeffs_[t] += c * p.coeffs_[t];
    }
  }
  return result;
}

}  // namespace confgeom
