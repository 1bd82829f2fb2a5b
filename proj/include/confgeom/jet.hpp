#pragma once

// Truncated multivariate Taylor polynomials ("jets").
//
// A Jet of order k in d variables stores, for every multi-index alpha with
// |alpha| <= k, the Taylor coefficient d^alpha f(p) / alpha!.  Coefficients are
// kept in graded order, so a lower-order jet is a prefix of a higher-order one.
// Binary operations on jets of different orders truncate to the smaller order.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace confgeom {

inline constexpr int kMaxJetDim = 8;
inline constexpr int kMaxJetOrder = 3;

using MultiIndex = std::array<std::uint8_t, kMaxJetDim>;

/// Monomial tables shared by all jets of one dimension.
class JetLayout {
 public:
  struct MulTerm {
    std::uint16_t lhs;
    std::uint16_t rhs;
    std::uint16_t out;
  };

  static const JetLayout& get(int dim);

  int dim() const noexcept { return dim_; }
  /// Number of monomials of degree <= order.
  int size(int order) const noexcept { return size_upto_[static_cast<std::size_t>(order)]; }
  const MultiIndex& monomial(int index) const { return monomials_[static_cast<std::size_t>(index)]; }
  int degree(int index) const { return degree_[static_cast<std::size_t>(index)]; }
  /// Position of `alpha`, or -1 when |alpha| > kMaxJetOrder.
  int index_of(const MultiIndex& alpha) const;
  /// Position of alpha + e_i, or -1.
  int raised(int index, int i) const { return raise_[static_cast<std::size_t>(index * dim_ + i)]; }
  /// alpha! for the monomial at `index`.
  double factorial(int index) const { return factorial_[static_cast<std::size_t>(index)]; }
  /// Product terms whose output degree is <= order.
  std::span<const MulTerm> mul_terms(int order) const;

 private:
  explicit JetLayout(int dim);

  int dim_;
  std::array<int, kMaxJetOrder + 1> size_upto_{};
  std::vector<MultiIndex> monomials_;
  std::vector<int> degree_;
  std::vector<int> raise_;
  std::vector<double> factorial_;
  std::vector<MulTerm> mul_;
  std::array<std::size_t, kMaxJetOrder + 1> mul_end_{};
  std::vector<int> lookup_;
};

class Jet {
 public:
  /// Zero-variable constant 0 of order 0.
  Jet();
  /// Constant jet.
  Jet(int dim, int order, double value = 0.0);

  static Jet variable(int dim, int order, int index, double value);

  int dim() const noexcept { return layout_->dim(); }
  int order() const noexcept { return order_; }
  double value() const noexcept { return coeffs_[0]; }

  /// Taylor coefficient d^alpha f / alpha! for a multiplicity vector alpha.
  double coefficient(std::span<const int> alpha) const;
  /// Partial derivative along the listed variables, e.g. {0, 0, 2} = d^3 f / dx1^2 dx3.
  double derivative(std::initializer_list<int> variables) const;

  /// Jet of d f / dx_i, one order lower.
  Jet partial(int i) const;
  Jet truncated(int order) const;

  std::span<const double> coefficients() const noexcept { return coeffs_; }
  const JetLayout& layout() const noexcept { return *layout_; }

  Jet& operator+=(const Jet& other);
  Jet& operator-=(const Jet& other);
  Jet& operator+=(double s);
  Jet& operator-=(double s);
  Jet& operator*=(double s);
  Jet& operator/=(double s);
  Jet operator-() const;

  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet apply_univariate(const Jet& u, const std::array<double, kMaxJetOrder + 1>& derivs);
  friend Jet compose(const Jet& outer, std::span<const Jet> offsets);

 private:
  const JetLayout* layout_;
  int order_;
  std::vector<double> coeffs_;
};

Jet operator+(Jet a, const Jet& b);
Jet operator-(Jet a, const Jet& b);
Jet operator+(Jet a, double s);
Jet operator+(double s, Jet a);
Jet operator-(Jet a, double s);
Jet operator-(double s, const Jet& a);
Jet operator*(Jet a, double s);
Jet operator*(double s, Jet a);
Jet operator/(const Jet& a, const Jet& b);
Jet operator/(Jet a, double s);
Jet operator/(double s, const Jet& a);

/// f(u) from the values f(u0), f'(u0), f''(u0), f'''(u0) at u0 = u.value().
Jet apply_univariate(const Jet& u, const std::array<double, kMaxJetOrder + 1>& derivs);

// Domain-checked elementary functions; violations raise DomainError.
Jet reciprocal(const Jet& u);
Jet sin(const Jet& u);
Jet cos(const Jet& u);
Jet exp(const Jet& u);
Jet log(const Jet& u);
Jet sqrt(const Jet& u);
Jet pow(const Jet& u, int exponent);

/// Taylor composition F(q + delta(x)).  `outer` is a jet of F at q in m
/// variables, `offsets` holds m jets (in n variables) with zero value.
Jet compose(const Jet& outer, std::span<const Jet> offsets);

}  // namespace confgeom
