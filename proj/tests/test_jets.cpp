#include <doctest.h>

#include <cmath>
#include <random>

#include "confgeom/errors.hpp"
#include "confgeom/expr.hpp"
#include "oracles.hpp"

using namespace confgeom;

TEST_CASE("parse builds trees that evaluate directly") {
  Expr e = parse("x1^2 + sin(x2)");
  CHECK(e.max_variable() == 1);
  CHECK(parse("0").is_constant(0.0));
  double p[] = {0.0, 3.0};
  CHECK(evaluate(parse("exp(2*x1)*x2"), p) == doctest::Approx(3.0));
}

TEST_CASE("printing a parsed expression is a fixed point") {
  for (const char* src : {"x1^2 + sin(x2)", "-x1*(x2 - x3)/(1 + x1^-2)", "exp(2*x1)*x2", "1e-05*x1 - -3",
                          "sqrt(log(x1 + 4))", "(x1 + x2)^3", "x1 - (x2 - x3)", "x1/(x2*x3)", "-(x1*x2)"}) {
    std::string once = to_string(parse(src));
    CHECK(to_string(parse(once)) == once);
    double p[] = {0.7, -0.3, 0.2};
    CHECK(evaluate(parse(once), p) == doctest::Approx(evaluate(parse(src), p)).epsilon(1e-14));
  }
}

TEST_CASE("parse errors carry positions") {
  CHECK_THROWS_AS(parse("x1 +"), ParseError);
  CHECK_THROWS_AS(parse("foo(x1)"), ParseError);
  CHECK_THROWS_AS(parse("x9"), ParseError);
  CHECK_THROWS_AS(parse("x1 ^ y"), ParseError);
  try {
    parse("x1 + $");
  } catch (const ParseError& e) {
    CHECK(e.position() == 5);
  }
}

TEST_CASE("polynomial jets are exact") {
  ScalarField f("x1^2", 1);
  double p[] = {2.0};
  Jet j = f.jet(p, 2);
  CHECK(j.value() == 4.0);
  CHECK(j.derivative({0}) == 4.0);
  int a2[] = {2};
  CHECK(j.coefficient(a2) == 1.0);
}

TEST_CASE("sine Taylor coefficients") {
  ScalarField f("sin(x1)", 1);
  double p[] = {0.0};
  Jet j = f.jet(p, 3);
  auto c = j.coefficients();
  CHECK(c[0] == doctest::Approx(0.0));
  CHECK(c[1] == doctest::Approx(1.0));
  CHECK(c[2] == doctest::Approx(0.0));
  CHECK(c[3] == doctest::Approx(-1.0 / 6.0));
}

TEST_CASE("exp(x1*x2) matches central differences") {
  ScalarField f("exp(x1*x2)", 2);
  oracle::Fn fn = [&](const oracle::Vec& q) { return f(q); };
  oracle::Vec p{1.0, 1.0};
  Jet j = f.jet(p, 3);
  std::vector<std::vector<int>> lists{{0}, {1}, {0, 0}, {0, 1}, {1, 1}, {0, 0, 0}, {0, 0, 1}, {0, 1, 1}};
  for (const auto& l : lists) {
    double jet_value = l.size() == 1 ? j.derivative({l[0]}) : l.size() == 2 ? j.derivative({l[0], l[1]})
                                                                            : j.derivative({l[0], l[1], l[2]});
    CHECK(std::abs(jet_value - oracle::diff(fn, p, l)) < 1e-6);
  }
}

TEST_CASE("jet product equals product of jets for random polynomials") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 4;
    Expr f = parse(oracle::random_polynomial(rng, d, 3));
    Expr g = parse(oracle::random_polynomial(rng, d, 3));
    auto p = oracle::random_point(rng, d);
    auto x = coordinate_jets(p, 3);
    Jet lhs = evaluate(f * g, std::span<const Jet>(x));
    Jet rhs = evaluate(f, std::span<const Jet>(x)) * evaluate(g, std::span<const Jet>(x));
    for (std::size_t k = 0; k < lhs.coefficients().size(); ++k)
      CHECK(lhs.coefficients()[k] == doctest::Approx(rhs.coefficients()[k]).epsilon(1e-12));
    Jet q = evaluate(f / (g * g + 1.0), std::span<const Jet>(x));
    Jet qr = evaluate(f, std::span<const Jet>(x)) / (rhs * 0.0 + evaluate(g * g + 1.0, std::span<const Jet>(x)));
    for (std::size_t k = 0; k < q.coefficients().size(); ++k)
      CHECK(q.coefficients()[k] == doctest::Approx(qr.coefficients()[k]).epsilon(1e-10));
  }
}

TEST_CASE("jet partials agree with Richardson differences on a random corpus") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    const int d = 2 + trial % 2;
    std::string src = "exp(" + oracle::random_polynomial(rng, d, 1, 0.5) + ")*(" +
                      oracle::random_polynomial(rng, d, 2) + ") + sin(" + oracle::random_polynomial(rng, d, 2) + ")";
    ScalarField f(src, d);
    oracle::Fn fn = [&](const oracle::Vec& q) { return f(q); };
    auto p = oracle::random_point(rng, d);
    Jet j = f.jet(p, 3);
    for (int a = 0; a < d; ++a) {
      CHECK(std::abs(j.derivative({a}) - oracle::diff(fn, p, {a})) < 1e-6);
      for (int b = a; b < d; ++b) {
        CHECK(std::abs(j.derivative({a, b}) - oracle::diff(fn, p, {a, b})) < 1e-6);
        for (int c = b; c < d; ++c) CHECK(std::abs(j.derivative({a, b, c}) - oracle::diff(fn, p, {a, b, c})) < 1e-6);
      }
    }
  }
}

TEST_CASE("differentiate agrees with jets") {
  std::mt19937_64 rng(3);
  Expr f = parse("sqrt(2 + x1^2)*cos(x2*x3) + log(3 + x1*x2)/(1 + x3^2)");
  auto p = oracle::random_point(rng, 3);
  auto x = coordinate_jets(p, 2);
  Jet j = evaluate(f, std::span<const Jet>(x));
  for (int a = 0; a < 3; ++a) {
    CHECK(evaluate(differentiate(f, a), p) == doctest::Approx(j.derivative({a})).epsilon(1e-12));
    for (int b = 0; b < 3; ++b)
      CHECK(evaluate(differentiate(differentiate(f, a), b), p) == doctest::Approx(j.derivative({a, b})).epsilon(1e-11));
  }
}

TEST_CASE("compose reproduces substitution") {
  Expr F = parse("x1^2*x2 + sin(x2)");
  Expr u = parse("x1 + x2^2");
  Expr v = parse("exp(x1) - x2");
  std::vector<Expr> repl{u, v};
  Expr composed = substitute(F, repl);
  double p[] = {0.3, -0.4};
  auto x = coordinate_jets(p, 3);
  Jet uj = evaluate(u, std::span<const Jet>(x)), vj = evaluate(v, std::span<const Jet>(x));
  double q[] = {uj.value(), vj.value()};
  Jet outer = ScalarField(F, 2).jet(q, 3);
  std::vector<Jet> offsets{uj - uj.value(), vj - vj.value()};
  Jet c = compose(outer, offsets);
  Jet direct = evaluate(composed, std::span<const Jet>(x));
  for (std::size_t k = 0; k < c.coefficients().size(); ++k)
    CHECK(c.coefficients()[k] == doctest::Approx(direct.coefficients()[k]).epsilon(1e-12));
}

TEST_CASE("domain violations are hard errors") {
  double p[] = {0.0};
  CHECK_THROWS_AS(ScalarField("log(x1)", 1).jet(p, 1), DomainError);
  CHECK_THROWS_AS(ScalarField("sqrt(x1 - 1)", 1).jet(p, 1), DomainError);
  CHECK_THROWS_AS(ScalarField("1/x1", 1)(p), DomainError);
  CHECK_THROWS_AS(ScalarField("x2", 1), DimensionError);
}

TEST_CASE("order-0 jets reproduce plain evaluation") {
  ScalarField f("exp(x1)*cos(x2) + x1/(1 + x2^2)", 2);
  double p[] = {0.4, 0.9};
  CHECK(f.jet(p, 0).value() == doctest::Approx(f(p)).epsilon(1e-15));
}
