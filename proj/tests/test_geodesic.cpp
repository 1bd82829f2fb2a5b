#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "confgeom/errors.hpp"
#include "confgeom/geodesic.hpp"
#include "curve_fixtures.hpp"
#include "oracles.hpp"

using namespace confgeom;
using namespace fixtures;

TEST_CASE("conformal acceleration of circles") {
  // unit circle at unit speed in the flat plane: a = v / 2
  auto flat = ConformalChart::euclidean(2);
  LowDimStructure low{MobiusStructure::flat(flat), std::nullopt};
  CurveState s{0.0, vec({1, 0}), vec({0, 1}), vec({-1, 0})};
  const Vec x3 = vec({0, -1});
  Vec a = conformal_acceleration(flat, s, x3, low);
  CHECK(a(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(a(1) == doctest::Approx(0.5));

  // the same acceleration in the gauge e^{2f} delta with f = 0.3 sin(x1)
  auto curved = flat.rescaled(parse("0.3*sin(x1)"));
  for (double t : {0.0, 0.7, 2.1, 4.0}) {
    CurveState c{t, vec({std::cos(t), std::sin(t)}), vec({-std::sin(t), std::cos(t)}), vec({-std::cos(t), -std::sin(t)})};
    const Vec c3 = vec({std::sin(t), -std::cos(t)});
    const Vec a0 = conformal_acceleration(flat, c, c3, low);
    const Vec a1 = conformal_acceleration(curved, c, c3, low);
    CHECK((a0 - a1).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a0 - 0.5 * c.v).cwiseAbs().maxCoeff() < 1e-12);
  }

  // great circle through the origin of the stereographic sphere, x = tan(t/2) e1:
  // unit speed for the round metric, a = v / 2
  auto sphere = ConformalChart::round_sphere(3);
  for (double t : {0.0, 0.4, 1.1}) {
    const double T = std::tan(t / 2), sec2 = 1 + T * T;
    CurveState g{t, vec({T, 0, 0}), vec({sec2 / 2, 0, 0}), vec({sec2 * T / 2, 0, 0})};
    const Vec g3 = vec({sec2 * (sec2 + 2 * T * T) / 4, 0, 0});
    Vec ag = conformal_acceleration(sphere, g, g3);
    CHECK((ag - 0.5 * g.v).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("adapted Weyl structure makes the curve a geodesic") {
  std::mt19937_64 rng(11);
  auto flat = ConformalChart::euclidean(3);
  for (int trial = 0; trial < 5; ++trial) {
    CurveState s{0.0, random_vec(rng, 3, 0.5), random_vec(rng, 3, 1.0), random_vec(rng, 3, 1.0)};
    const Vec theta = adapted_theta_along_curve(flat, s);
    std::vector<Expr> field;
    for (int i = 0; i < 3; ++i) field.push_back(Expr::constant(theta(i)));
    std::vector<double> p(s.x.data(), s.x.data() + 3);
    auto gam = christoffel(WeylStructure(flat, field), p);
    for (int k = 0; k < 3; ++k) {
      double acc = s.w(k);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) acc += gam[static_cast<std::size_t>((k * 3 + i) * 3 + j)] * s.v(i) * s.v(j);
      CHECK(std::abs(acc) < 1e-12);
    }
  }
}

TEST_CASE("acceleration agrees with the adapted Schouten tensor") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 6; ++trial) {
    const int m = 3 + trial % 2;
    auto chart = ConformalChart::from_strings(oracle::random_metric(rng, m));
    CurveState s{0.0, random_vec(rng, m, 0.3), random_vec(rng, m, 1.0), random_vec(rng, m, 1.0)};
    const Vec x3 = random_vec(rng, m, 1.0);
    CHECK(accel_equivalence_check(chart, s, x3) < 1e-8);
  }
  // Möbius surface with a nontrivial h0
  auto plane = ConformalChart::from_strings({{"1 + 0.1*x1*x2", "0.05*x1"}, {"0.05*x1", "1"}});
  MobiusStructure M(plane, {{parse("0.2*x1"), parse("0.1")}, {parse("0.1"), parse("-0.2*x1")}});
  LowDimStructure low{M, std::nullopt};
  CurveState s{0.0, vec({0.1, 0.2}), vec({0.7, -0.4}), vec({0.3, 0.5})};
  CHECK(accel_equivalence_check(plane, s, vec({0.2, -0.6}), low) < 1e-8);
  CHECK_THROWS_AS(accel_equivalence_check(plane, s, vec({0.2, -0.6})), MissingStructureError);
}

TEST_CASE("lines are traversed with a Möbius parameter") {
  // x = t / (1 - c t) e1 has vanishing Schwarzian, so it is a conformal geodesic
  const double c = 0.3;
  for (int m : {1, 2, 3}) {
    auto flat = ConformalChart::euclidean(m);
    LowDimStructure low;
    if (m == 2) low.mobius = MobiusStructure::flat(flat);
    if (m == 1) low.laplace = LaplaceStructure::flat(flat);
    CurveState s{0.0, Vec::Zero(m), Vec::Zero(m), Vec::Zero(m)};
    s.v(0) = 1.0;
    s.w(0) = 2 * c;
    auto trace = integrate_conformal_geodesic(flat, s, {0.0, 1.0, 1e-3, 10}, low);
    const auto& end = trace.samples.back();
    CHECK(end.t == doctest::Approx(1.0));
    CHECK(end.x(0) == doctest::Approx(1.0 / (1.0 - c)).epsilon(1e-9));
    CHECK(end.v(0) == doctest::Approx(1.0 / ((1 - c) * (1 - c))).epsilon(1e-9));
    for (int i = 1; i < m; ++i) CHECK(std::abs(end.x(i)) < 1e-12);
    CHECK(trace.max_residual() < 1e-9);
  }
}

TEST_CASE("conformal geodesics are circles") {
  std::mt19937_64 rng(5);
  auto flat = ConformalChart::euclidean(3);
  auto sphere = ConformalChart::round_sphere(3);
  for (int trial = 0; trial < 3; ++trial) {
    CurveState s{0.0, random_vec(rng, 3, 0.3), random_vec(rng, 3, 1.0), random_vec(rng, 3, 1.0)};
    // stereographic projection is conformal, so sphere geodesics are coordinate circles too
    for (const auto* chart : {&flat, &sphere}) {
      auto trace = integrate_conformal_geodesic(*chart, s, {0.0, 0.5, 1e-3, 1});
      CHECK(circle_deviation(trace) < 1e-5);
    }
  }
  // great circle of S^3 through the origin stays on the axis
  CurveState g{0.0, vec({0, 0, 0}), vec({0.5, 0, 0}), vec({0, 0, 0})};
  auto trace = integrate_conformal_geodesic(sphere, g, {0.0, 1.0, 1e-3, 50});
  for (const auto& p : trace.samples) CHECK(p.x.tail(2).norm() < 1e-12);
  CHECK(trace.max_residual() < 1e-9);

  // circle in a curved gauge of the Möbius plane
  auto curved = flat.rescaled(parse("0.3*sin(x1)"));
  auto plane = ConformalChart::euclidean(2);
  LowDimStructure low{MobiusStructure::flat(plane), std::nullopt};
  auto curved2 = plane.rescaled(parse("0.3*sin(x1)"));
  auto ring = integrate_conformal_geodesic(curved2, {0.0, vec({1, 0}), vec({0, 1}), vec({-1, 0})}, {0.0, 2.0, 1e-3, 10}, low);
  for (const auto& p : ring.samples) CHECK(std::abs(p.x.norm() - 1.0) < 1e-8);
}

TEST_CASE("trajectories do not depend on the gauge") {
  std::mt19937_64 rng(41);
  auto chart = ConformalChart::from_strings(oracle::random_metric(rng, 3, 0.1));
  auto other = chart.rescaled(parse("0.3*sin(x1) + 0.2*x2*x3"));
  CurveState s{0.0, vec({0.1, -0.1, 0.05}), vec({0.8, 0.3, -0.2}), vec({0.1, 0.4, 0.2})};
  auto a = integrate_conformal_geodesic(chart, s, {0.0, 0.5, 1e-3, 50});
  auto b = integrate_conformal_geodesic(other, s, {0.0, 0.5, 1e-3, 50});
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK((a.samples[i].x - b.samples[i].x).norm() < 1e-8);
}

TEST_CASE("fourth-order convergence") {
  std::mt19937_64 rng(7);
  auto chart = ConformalChart::from_strings(oracle::random_metric(rng, 3, 0.2));
  CurveState s{0.0, vec({0.1, 0.0, -0.1}), vec({1.0, 0.5, 0.2}), vec({0.5, -0.8, 0.3})};
  auto end = [&](double h) { return integrate_conformal_geodesic(chart, s, {0.0, 1.0, h, 1000000}).samples.back().x; };
  const Vec ref = end(0.0015625);
  const double e1 = (end(0.0125) - ref).norm(), e2 = (end(0.00625) - ref).norm();
  MESSAGE("step-halving error ratio " << e1 / e2);
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);
}

TEST_CASE("integration errors and trace output") {
  auto flat = ConformalChart::euclidean(2);
  LowDimStructure low{MobiusStructure::flat(flat), std::nullopt};
  CurveState s{0.0, vec({0, 0}), vec({1, 0}), vec({0, 0})};
  CHECK_THROWS_AS(integrate_conformal_geodesic(flat, s, {0.0, 1.0, 0.0, 1}, low), IntegrationError);
  CHECK_THROWS_AS(integrate_conformal_geodesic(flat, s), MissingStructureError);
  CurveState still{0.0, vec({0, 0}), vec({0, 0}), vec({0, 0})};
  CHECK_THROWS_AS(integrate_conformal_geodesic(flat, still, {}, low), IntegrationError);
  // the parameter blows up at t = 1 / c
  CurveState fast{0.0, vec({0, 0}), vec({1, 0}), vec({2.0, 0})};
  CHECK_THROWS_AS(integrate_conformal_geodesic(flat, fast, {0.0, 2.0, 1e-3, 1}, low), IntegrationError);
  // leaving the region where the metric is positive definite
  auto half = ConformalChart::from_strings({{"1 - x1", "0"}, {"0", "1 - x1"}});
  LowDimStructure hl{MobiusStructure::flat(half), std::nullopt};
  CHECK_THROWS_AS(integrate_conformal_geodesic(half, {0.0, vec({0, 0}), vec({1, 0}), vec({0, 0})}, {0.0, 3.0, 1e-2, 1}, hl),
                  IntegrationError);

  auto trace = integrate_conformal_geodesic(flat, s, {0.0, 0.01, 1e-3, 5}, low);
  std::ostringstream out;
  trace.write_csv(out);
  std::string header = out.str().substr(0, out.str().find('\n'));
  CHECK(header == "t,x1,x2,v1,v2,w1,w2,residual_norm");
  CHECK(trace.samples.size() == 3);
}
