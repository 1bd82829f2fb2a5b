#include "confgeom/expr.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "confgeom/errors.hpp"

namespace confgeom {

namespace {

using Kind = Expr::Kind;

std::shared_ptr<Expr::Node> make_node(Kind kind) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = kind;
  return n;
}

bool is_unary(Kind k) {
  return k == Kind::Neg || k == Kind::Pow || k == Kind::Sin || k == Kind::Cos || k == Kind::Exp ||
         k == Kind::Log || k == Kind::Sqrt;
}

}  // namespace

Expr::Expr() : node_(nullptr) {}

Expr Expr::constant(double value) {
  auto n = make_node(Kind::Const);
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::variable(int index) {
  if (index < 0 || index >= kMaxJetDim) throw DimensionError("variable index out of range");
  auto n = make_node(Kind::Var);
  n->index = index;
  n->max_var = index;
  return Expr(std::move(n));
}

Expr Expr::raw_binary(Kind kind, Expr lhs, Expr rhs) {
  auto n = make_node(kind);
  n->max_var = std::max(lhs.max_variable(), rhs.max_variable());
  n->a = std::move(lhs);
  n->b = std::move(rhs);
  return Expr(std::move(n));
}

Expr Expr::raw_unary(Kind kind, Expr operand, int exponent) {
  auto n = make_node(kind);
  n->max_var = operand.max_variable();
  n->index = exponent;
  n->a = std::move(operand);
  return Expr(std::move(n));
}

Expr::Kind Expr::kind() const { return node_ ? node_->kind : Kind::Const; }
double Expr::constant_value() const { return node_ ? node_->value : 0.0; }
int Expr::variable_index() const { return node_->index; }
int Expr::exponent() const { return node_->index; }
const Expr& Expr::lhs() const { return node_->a; }
const Expr& Expr::rhs() const { return node_->b; }
int Expr::max_variable() const { return node_ ? node_->max_var : -1; }

// Simplifying builders -------------------------------------------------------

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() + b.constant_value());
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  if (b.kind() == Kind::Neg) return a - b.operand();
  return Expr::raw_binary(Kind::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() - b.constant_value());
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  if (b.kind() == Kind::Neg) return a + b.operand();
  return Expr::raw_binary(Kind::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.constant_value() * b.constant_value());
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  if (a.kind() == Kind::Neg) return -(a.operand() * b);
  if (b.kind() == Kind::Neg) return -(a * b.operand());
  if (b.is_constant()) return Expr::raw_binary(Kind::Mul, b, a);
  return Expr::raw_binary(Kind::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(0.0) && !b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0)
    return Expr::constant(a.constant_value() / b.constant_value());
  if (a.kind() == Kind::Neg) return -(a.operand() / b);
  return Expr::raw_binary(Kind::Div, a, b);
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a.constant_value());
  if (a.kind() == Kind::Neg) return a.operand();
  return Expr::raw_unary(Kind::Neg, a);
}

Expr operator+(const Expr& a, double b) { return a + Expr::constant(b); }
Expr operator+(double a, const Expr& b) { return Expr::constant(a) + b; }
Expr operator-(const Expr& a, double b) { return a - Expr::constant(b); }
Expr operator-(double a, const Expr& b) { return Expr::constant(a) - b; }
Expr operator*(const Expr& a, double b) { return a * Expr::constant(b); }
Expr operator*(double a, const Expr& b) { return Expr::constant(a) * b; }
Expr operator/(const Expr& a, double b) { return a / Expr::constant(b); }
Expr operator/(double a, const Expr& b) { return Expr::constant(a) / b; }

Expr pow(const Expr& base, int exponent) {
  if (exponent == 0) return Expr::constant(1.0);
  if (exponent == 1) return base;
  if (base.is_constant() && (base.constant_value() != 0.0 || exponent > 0))
    return Expr::constant(std::pow(base.constant_value(), exponent));
  if (base.kind() == Kind::Pow) return pow(base.operand(), base.exponent() * exponent);
  return Expr::raw_unary(Kind::Pow, base, exponent);
}

namespace {
Expr unary_fn(Kind kind, const Expr& a, double (*fn)(double)) {
  if (a.is_constant()) {
    double v = a.constant_value();
    bool ok = true;
    if (kind == Kind::Log) ok = v > 0.0;
    if (kind == Kind::Sqrt) ok = v > 0.0;
    if (ok) return Expr::constant(fn(v));
  }
  return Expr::raw_unary(kind, a);
}
}  // namespace

Expr sin(const Expr& a) { return unary_fn(Kind::Sin, a, [](double v) { return std::sin(v); }); }
Expr cos(const Expr& a) { return unary_fn(Kind::Cos, a, [](double v) { return std::cos(v); }); }
Expr exp(const Expr& a) { return unary_fn(Kind::Exp, a, [](double v) { return std::exp(v); }); }
Expr log(const Expr& a) { return unary_fn(Kind::Log, a, [](double v) { return std::log(v); }); }
Expr sqrt(const Expr& a) { return unary_fn(Kind::Sqrt, a, [](double v) { return std::sqrt(v); }); }

// Parser ---------------------------------------------------------------------

namespace {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr run() {
    Expr e = expr();
    skip();
    if (pos_ != src_.size()) throw ParseError("unexpected '" + std::string(1, src_[pos_]) + "'", pos_);
    return e;
  }

 private:
  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= src_.size()) throw ParseError(std::string("expected '") + c + "' but input ended", pos_);
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) lhs = Expr::raw_binary(Kind::Add, lhs, term());
      else if (accept('-')) lhs = Expr::raw_binary(Kind::Sub, lhs, term());
      else return lhs;
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      if (accept('*')) lhs = Expr::raw_binary(Kind::Mul, lhs, unary());
      else if (accept('/')) lhs = Expr::raw_binary(Kind::Div, lhs, unary());
      else return lhs;
    }
  }

  Expr unary() {
    if (accept('-')) return Expr::raw_unary(Kind::Neg, unary());
    return factor();
  }

  Expr factor() {
    Expr b = base();
    if (accept('^')) {
      skip();
      const std::size_t start = pos_;
      bool negative = false;
      if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) {
        negative = src_[pos_] == '-';
        ++pos_;
      }
      std::size_t digits = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (digits == pos_) throw ParseError("expected integer exponent", start);
      int value = 0;
      auto [ptr, ec] = std::from_chars(src_.data() + digits, src_.data() + pos_, value);
      if (ec != std::errc()) throw ParseError("exponent out of range", start);
      return Expr::raw_unary(Kind::Pow, b, negative ? -value : value);
    }
    return b;
  }

  Expr base() {
    skip();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    throw ParseError("unexpected '" + std::string(1, c) + "'", pos_);
  }

  Expr number() {
    const std::size_t start = pos_;
    auto is_num = [&](std::size_t i) {
      return i < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[i])) || src_[i] == '.');
    };
    while (is_num(pos_)) ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
      if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
        pos_ = look;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, value);
    if (ec != std::errc() || ptr != src_.data() + pos_) throw ParseError("malformed number", start);
    return Expr::constant(value);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    const std::string_view name = src_.substr(start, pos_ - start);
    if (name.size() >= 2 && name[0] == 'x') {
      bool digits = true;
      for (char ch : name.substr(1)) digits = digits && std::isdigit(static_cast<unsigned char>(ch));
      if (digits) {
        int index = std::atoi(std::string(name.substr(1)).c_str());
        if (index < 1 || index > kMaxJetDim)
          throw ParseError("variable '" + std::string(name) + "' outside x1..x8", start);
        return Expr::variable(index - 1);
      }
    }
    Kind kind;
    if (name == "sin") kind = Kind::Sin;
    else if (name == "cos") kind = Kind::Cos;
    else if (name == "exp") kind = Kind::Exp;
    else if (name == "log") kind = Kind::Log;
    else if (name == "sqrt") kind = Kind::Sqrt;
    else throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    expect('(');
    Expr arg = expr();
    expect(')');
    return Expr::raw_unary(kind, arg);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

int precedence(const Expr& e) {
  switch (e.kind()) {
    case Kind::Add:
    case Kind::Sub: return 1;
    case Kind::Mul:
    case Kind::Div: return 2;
    case Kind::Neg: return 3;
    case Kind::Pow: return 4;
    case Kind::Const: return std::signbit(e.constant_value()) ? 3 : 5;
    default: return 5;
  }
}

void print(const Expr& e, std::string& out, int min_prec);

void print_child(const Expr& e, std::string& out, int min_prec) {
  if (precedence(e) < min_prec) {
    out += '(';
    print(e, out, 0);
    out += ')';
  } else {
    print(e, out, min_prec);
  }
}

const char* function_name(Kind k) {
  switch (k) {
    case Kind::Sin: return "sin";
    case Kind::Cos: return "cos";
    case Kind::Exp: return "exp";
    case Kind::Log: return "log";
    default: return "sqrt";
  }
}

void print(const Expr& e, std::string& out, int) {
  switch (e.kind()) {
    case Kind::Const: {
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, e.constant_value());
      out.append(buf, ptr);
      return;
    }
    case Kind::Var: out += "x" + std::to_string(e.variable_index() + 1); return;
    case Kind::Add:
    case Kind::Sub:
      print_child(e.lhs(), out, 1);
      out += e.kind() == Kind::Add ? " + " : " - ";
      print_child(e.rhs(), out, 2);
      return;
    case Kind::Mul:
    case Kind::Div:
      print_child(e.lhs(), out, 2);
      out += e.kind() == Kind::Mul ? "*" : "/";
      print_child(e.rhs(), out, 3);
      return;
    case Kind::Neg:
      out += "-";
      print_child(e.operand(), out, 3);
      return;
    case Kind::Pow:
      print_child(e.operand(), out, 5);
      out += "^" + std::to_string(e.exponent());
      return;
    default:
      out += function_name(e.kind());
      out += "(";
      print(e.operand(), out, 0);
      out += ")";
      return;
  }
}

}  // namespace

Expr parse(std::string_view source) { return Parser(source).run(); }

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out, 0);
  return out;
}

// Calculus -------------------------------------------------------------------

namespace {

Expr diff(const Expr& e, int var, std::unordered_map<const Expr::Node*, Expr>& memo) {
  if (e.max_variable() < var) return Expr::constant(0.0);
  if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
  Expr r;
  switch (e.kind()) {
    case Kind::Const: r = Expr::constant(0.0); break;
    case Kind::Var: r = Expr::constant(e.variable_index() == var ? 1.0 : 0.0); break;
    case Kind::Add: r = diff(e.lhs(), var, memo) + diff(e.rhs(), var, memo); break;
    case Kind::Sub: r = diff(e.lhs(), var, memo) - diff(e.rhs(), var, memo); break;
    case Kind::Mul: r = diff(e.lhs(), var, memo) * e.rhs() + e.lhs() * diff(e.rhs(), var, memo); break;
    case Kind::Div:
      r = (diff(e.lhs(), var, memo) * e.rhs() - e.lhs() * diff(e.rhs(), var, memo)) / pow(e.rhs(), 2);
      break;
    case Kind::Neg: r = -diff(e.operand(), var, memo); break;
    case Kind::Pow:
      r = static_cast<double>(e.exponent()) * pow(e.operand(), e.exponent() - 1) * diff(e.operand(), var, memo);
      break;
    case Kind::Sin: r = cos(e.operand()) * diff(e.operand(), var, memo); break;
    case Kind::Cos: r = -(sin(e.operand()) * diff(e.operand(), var, memo)); break;
    case Kind::Exp: r = e * diff(e.operand(), var, memo); break;
    case Kind::Log: r = diff(e.operand(), var, memo) / e.operand(); break;
    case Kind::Sqrt: r = diff(e.operand(), var, memo) / (2.0 * e); break;
  }
  memo.emplace(e.id(), r);
  return r;
}

Expr rebuild(const Expr& e, const Expr& a, const Expr& b) {
  switch (e.kind()) {
    case Kind::Add: return a + b;
    case Kind::Sub: return a - b;
    case Kind::Mul: return a * b;
    case Kind::Div: return a / b;
    case Kind::Neg: return -a;
    case Kind::Pow: return pow(a, e.exponent());
    case Kind::Sin: return sin(a);
    case Kind::Cos: return cos(a);
    case Kind::Exp: return exp(a);
    case Kind::Log: return log(a);
    default: return sqrt(a);
  }
}

Expr subst(const Expr& e, std::span<const Expr> repl, std::unordered_map<const Expr::Node*, Expr>& memo) {
  if (e.kind() == Kind::Const) return e;
  if (e.kind() == Kind::Var) {
    const auto i = static_cast<std::size_t>(e.variable_index());
    if (i >= repl.size()) throw DimensionError("substitute: no replacement for x" + std::to_string(i + 1));
    return repl[i];
  }
  if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
  Expr a = subst(e.lhs(), repl, memo);
  Expr b = is_unary(e.kind()) ? Expr() : subst(e.rhs(), repl, memo);
  Expr r = rebuild(e, a, b);
  memo.emplace(e.id(), r);
  return r;
}

template <class T>
T make_const(double v, const T& like);

template <>
double make_const(double v, const double&) {
  return v;
}

template <>
Jet make_const(double v, const Jet& like) {
  return Jet(like.dim(), like.order(), v);
}

template <class T>
double value_of(const T& t) {
  if constexpr (std::is_same_v<T, double>) return t;
  else return t.value();
}

template <class T>
T eval(const Expr& e, std::span<const T> point, const T& like, std::unordered_map<const Expr::Node*, T>& memo) {
  switch (e.kind()) {
    case Kind::Const: return make_const<T>(e.constant_value(), like);
    case Kind::Var: {
      const auto i = static_cast<std::size_t>(e.variable_index());
      if (i >= point.size())
        throw DimensionError("x" + std::to_string(i + 1) + " used on a " + std::to_string(point.size()) +
                             "-dimensional chart");
      return point[i];
    }
    default: break;
  }
  if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
  using std::cos, std::exp, std::log, std::sin, std::sqrt;
  T a = eval(e.lhs(), point, like, memo);
  T r{};
  switch (e.kind()) {
    case Kind::Add: r = a + eval(e.rhs(), point, like, memo); break;
    case Kind::Sub: r = a - eval(e.rhs(), point, like, memo); break;
    case Kind::Mul: r = a * eval(e.rhs(), point, like, memo); break;
    case Kind::Div: {
      T b = eval(e.rhs(), point, like, memo);
      if (value_of(b) == 0.0) throw DomainError("division by zero in " + to_string(e));
      r = a / b;
      break;
    }
    case Kind::Neg: r = -a; break;
    case Kind::Pow: {
      if (e.exponent() < 0 && value_of(a) == 0.0) throw DomainError("division by zero in " + to_string(e));
      if constexpr (std::is_same_v<T, double>) r = std::pow(a, e.exponent());
      else r = pow(a, e.exponent());
      break;
    }
    case Kind::Sin: r = sin(a); break;
    case Kind::Cos: r = cos(a); break;
    case Kind::Exp: r = exp(a); break;
    case Kind::Log:
      if (!(value_of(a) > 0.0)) throw DomainError("log of non-positive value in " + to_string(e));
      r = log(a);
      break;
    case Kind::Sqrt:
      if (!(value_of(a) > 0.0)) throw DomainError("sqrt of non-positive value in " + to_string(e));
      r = sqrt(a);
      break;
    default: break;
  }
  memo.emplace(e.id(), r);
  return r;
}

}  // namespace

Expr differentiate(const Expr& e, int var) {
  std::unordered_map<const Expr::Node*, Expr> memo;
  return diff(e, var, memo);
}

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<const Expr::Node*, const Expr::Node*>& p) const {
    return std::hash<const void*>()(p.first) * 31u ^ std::hash<const void*>()(p.second);
  }
};

bool equal(const Expr& a, const Expr& b,
           std::unordered_set<std::pair<const Expr::Node*, const Expr::Node*>, PairHash>& seen) {
  if (a.id() == b.id()) return true;
  if (a.kind() != b.kind() || a.max_variable() != b.max_variable()) return false;
  if (!seen.emplace(a.id(), b.id()).second) return true;
  switch (a.kind()) {
    case Kind::Const: return a.constant_value() == b.constant_value();
    case Kind::Var: return a.variable_index() == b.variable_index();
    case Kind::Pow: return a.exponent() == b.exponent() && equal(a.operand(), b.operand(), seen);
    default:
      if (is_unary(a.kind())) return equal(a.operand(), b.operand(), seen);
      return equal(a.lhs(), b.lhs(), seen) && equal(a.rhs(), b.rhs(), seen);
  }
}

}  // namespace

bool structurally_equal(const Expr& a, const Expr& b) {
  std::unordered_set<std::pair<const Expr::Node*, const Expr::Node*>, PairHash> seen;
  return equal(a, b, seen);
}

Expr substitute(const Expr& e, std::span<const Expr> replacements) {
  std::unordered_map<const Expr::Node*, Expr> memo;
  return subst(e, replacements, memo);
}

double evaluate(const Expr& e, std::span<const double> point) {
  std::unordered_map<const Expr::Node*, double> memo;
  return eval<double>(e, point, 0.0, memo);
}

Jet evaluate(const Expr& e, std::span<const Jet> point) {
  if (point.empty()) {
    if (e.max_variable() >= 0) throw DimensionError("expression uses variables on a 0-dimensional chart");
    return Jet(0, 0, evaluate(e, std::span<const double>{}));
  }
  std::unordered_map<const Expr::Node*, Jet> memo;
  return eval<Jet>(e, point, point[0], memo);
}

std::vector<double> evaluate(std::span<const Expr> es, std::span<const double> point) {
  std::unordered_map<const Expr::Node*, double> memo;
  std::vector<double> out;
  out.reserve(es.size());
  for (const auto& e : es) out.push_back(eval<double>(e, point, 0.0, memo));
  return out;
}

std::vector<Jet> evaluate(std::span<const Expr> es, std::span<const Jet> point) {
  std::vector<Jet> out;
  out.reserve(es.size());
  if (point.empty()) {
    for (const auto& e : es) out.push_back(evaluate(e, point));
    return out;
  }
  std::unordered_map<const Expr::Node*, Jet> memo;
  for (const auto& e : es) out.push_back(eval<Jet>(e, point, point[0], memo));
  return out;
}

ScalarField::ScalarField(Expr expr, int dim) : expr_(std::move(expr)), dim_(dim) {
  if (dim < 0 || dim > kMaxJetDim) throw DimensionError("chart dimension outside [0, 8]");
  if (expr_.max_variable() >= dim)
    throw DimensionError("expression uses x" + std::to_string(expr_.max_variable() + 1) + " on a " +
                         std::to_string(dim) + "-dimensional chart");
}

ScalarField::ScalarField(std::string_view source, int dim) : ScalarField(parse(source), dim) {}

double ScalarField::operator()(std::span<const double> p) const {
  if (static_cast<int>(p.size()) != dim_) throw DimensionError("point dimension mismatch");
  return evaluate(expr_, p);
}

Jet ScalarField::jet(std::span<const double> p, int order) const {
  if (static_cast<int>(p.size()) != dim_) throw DimensionError("point dimension mismatch");
  if (dim_ == 0) return Jet(0, 0, evaluate(expr_, p));
  auto x = coordinate_jets(p, order);
  return evaluate(expr_, std::span<const Jet>(x));
}

std::vector<Jet> coordinate_jets(std::span<const double> p, int order) {
  std::vector<Jet> x;
  const int d = static_cast<int>(p.size());
  x.reserve(p.size());
  for (int i = 0; i < d; ++i) x.push_back(Jet::variable(d, order, i, p[static_cast<std::size_t>(i)]));
  return x;
}

}  // namespace confgeom
