#pragma once

// Immutable expression trees over x1..x8 with exact differentiation.
//
// Builders (operator+, sin, ...) fold constants and drop neutral elements so
// derivative trees stay small; parse() keeps the literal structure so that
// printing a parsed expression reproduces it.

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "confgeom/jet.hpp"

namespace confgeom {

class Expr {
 public:
  enum class Kind { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp, Log, Sqrt };

  struct Node;

  /// Constant zero.
  Expr();
  static Expr constant(double value);
  /// Variable x_{index+1} (0-based index).
  static Expr variable(int index);
  /// Unsimplified node, used by the parser.
  static Expr raw_binary(Kind kind, Expr lhs, Expr rhs);
  static Expr raw_unary(Kind kind, Expr operand, int exponent = 0);

  Kind kind() const;
  double constant_value() const;
  int variable_index() const;
  int exponent() const;
  const Expr& lhs() const;
  const Expr& rhs() const;
  const Expr& operand() const { return lhs(); }

  bool is_constant() const { return kind() == Kind::Const; }
  bool is_constant(double value) const { return is_constant() && constant_value() == value; }
  /// Largest variable index used, or -1.
  int max_variable() const;
  const Node* id() const { return node_.get(); }

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct Expr::Node {
  Kind kind;
  double value = 0.0;
  int index = 0;  // variable index or integer exponent
  Expr a;
  Expr b;
  int max_var = -1;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr operator+(const Expr& a, double b);
Expr operator+(double a, const Expr& b);
Expr operator-(const Expr& a, double b);
Expr operator-(double a, const Expr& b);
Expr operator*(const Expr& a, double b);
Expr operator*(double a, const Expr& b);
Expr operator/(const Expr& a, double b);
Expr operator/(double a, const Expr& b);
Expr pow(const Expr& base, int exponent);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sqrt(const Expr& a);

/// Parses the expression grammar; raises ParseError with the offending offset.
Expr parse(std::string_view source);
std::string to_string(const Expr& e);

/// Identical trees (shared subtrees compared once).
bool structurally_equal(const Expr& a, const Expr& b);

/// d e / d x_{var+1}.
Expr differentiate(const Expr& e, int var);
/// Replaces x_{i+1} by replacements[i].
Expr substitute(const Expr& e, std::span<const Expr> replacements);

/// Evaluation for double and Jet; raises DomainError on log/sqrt of a
/// non-positive value or division by zero.
double evaluate(const Expr& e, std::span<const double> point);
Jet evaluate(const Expr& e, std::span<const Jet> point);
/// Several expressions sharing one memo, so common subtrees are evaluated once.
std::vector<double> evaluate(std::span<const Expr> es, std::span<const double> point);
std::vector<Jet> evaluate(std::span<const Expr> es, std::span<const Jet> point);

/// Expression plus the dimension of the chart it lives on.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(Expr expr, int dim);
  ScalarField(std::string_view source, int dim);

  const Expr& expr() const { return expr_; }
  int dim() const { return dim_; }

  double operator()(std::span<const double> p) const;
  /// Jet of order `order` at p with coefficient d^alpha f / alpha!.
  Jet jet(std::span<const double> p, int order) const;

 private:
  Expr expr_;
  int dim_ = 0;
};

/// Jets of the coordinate functions at p.
std::vector<Jet> coordinate_jets(std::span<const double> p, int order);

}  // namespace confgeom
