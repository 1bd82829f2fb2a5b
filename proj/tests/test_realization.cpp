#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>

#include "confgeom/errors.hpp"
#include "confgeom/realization.hpp"
#include "oracles.hpp"
#include "realization_fixtures.hpp"

using namespace confgeom;

namespace {

using namespace fixtures;

double max_abs(const Mat& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("trivial realization data gives the product metric") {
  const RealizationData d = RealizationData::trivial(2, 3);
  const TotalSpaceChart T = build_total_metric(d, {{0.0, 0.0}, {0.3, -0.2}});
  std::mt19937_64 rng(3);
  for (int k = 0; k < 5; ++k) {
    const auto p = oracle::random_point(rng, 5, 1.0);
    CHECK(max_abs(T.chart.metric_at(p) - Mat::Identity(5, 5)) == 0.0);
  }
  CHECK(T.epsilon == doctest::Approx(0.1));
}

TEST_CASE("the total metric restricts to g plus g_nu on the zero section") {
  const Instance I = random_surface_instance(11);
  const RealizationData d = solve_prescription(I.geometry, I.targets, I.samples);
  const TotalSpaceChart T = build_total_metric(d, I.samples);
  for (const auto& x : I.samples) {
    const Mat G = T.chart.metric_at(T.zero_point(x));
    const Mat g = ConformalChart(2, d.base_metric).metric_at(x);
    CHECK(max_abs(G.topLeftCorner(2, 2) - g) < 1e-14);
    CHECK(max_abs(G.topRightCorner(2, 2)) < 1e-14);
    CHECK(max_abs(G.bottomRightCorner(2, 2) - d.fiber_metric) < 1e-14);
  }
}

TEST_CASE("small random data stays positive at fiber radius 0.05") {
  std::mt19937_64 rng(21);
  const Instance I = random_surface_instance(21);
  RealizationData d = I.geometry;
  for (auto& row : d.a)
    for (auto& e : row) e = poly(rng, 2, 2, 0.3);
  d.b = symmetric_poly(rng, 2, 2, 0.3);
  d.f = poly(rng, 2, 2, 0.3);
  const TotalSpaceChart T = build_total_metric(d, I.samples, 0.05);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 20; ++k) {
    auto P = oracle::random_point(rng, 2, 0.3);
    Vec v(2);
    v << normal(rng), normal(rng);
    v /= std::sqrt(v.dot(d.fiber_metric * v));
    P.push_back(0.05 * v(0));
    P.push_back(0.05 * v(1));
    const Mat G = T.chart.metric_at(P);
    CHECK(max_abs(G - G.transpose()) == 0.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("epsilon search and rejection of a non-positive radius") {
  RealizationData d = RealizationData::trivial(1, 2);
  d.f = Expr::constant(-100.0);  // vertical block 1 - 100 |xi|^2
  const TotalSpaceChart T = build_total_metric(d, {{0.0}});
  CHECK(T.epsilon < 0.1);
  CHECK(T.epsilon > 0.02);
  CHECK_THROWS_AS(build_total_metric(d, {{0.0}}, 0.2), SingularMetricError);
}

TEST_CASE("validation of realization data") {
  const std::vector<std::vector<double>> s = {{0.1, 0.2}};
  RealizationData d = RealizationData::trivial(2, 2);
  d.B0[0][0][0] = Expr::constant(1.0);
  CHECK_THROWS_AS(d.validate(s), ValidationError);  // not trace-free
  d = RealizationData::trivial(2, 2);
  d.connection[0][0][1] = Expr::constant(1.0);
  CHECK_THROWS_AS(d.validate(s), ValidationError);  // not metric
  d = RealizationData::trivial(2, 2);
  d.b[0][1] = Expr::variable(2);
  CHECK_THROWS_AS(d.validate(s), ValidationError);  // depends on the fiber
  d = RealizationData::trivial(2, 2);
  d.fiber_metric(0, 0) = -1.0;
  CHECK_THROWS_AS(d.validate(s), ValidationError);
  d = RealizationData::trivial(2, 2);
  CHECK_THROWS_AS(d.validate({{0.1}}), ValidationError);
}

TEST_CASE("zero targets on a flat base with B0 = 0 give a = b = f = 0") {
  RealizationData d = RealizationData::trivial(3, 2);
  PrescribedInvariants t{zero_matrix(3, 2), zero_matrix(3, 3)};
  const RealizationData s = solve_prescription(d, t, {{0.0, 0.1, 0.2}});
  const std::vector<double> x = {0.3, -0.1, 0.2};
  for (const auto& row : s.a)
    for (const auto& e : row) CHECK(evaluate(e, x) == doctest::Approx(0.0));
  for (const auto& row : s.b)
    for (const auto& e : row) CHECK(evaluate(e, x) == doctest::Approx(0.0));
  CHECK(evaluate(s.f, x) == doctest::Approx(0.0));
}

TEST_CASE("pseudo-geodesic surface in R^4") {
  const Section5Report rep = section5_scenario(8);
  CHECK(max_abs(rep.a) < 1e-14);
  CHECK(max_abs(rep.b) < 1e-14);
  CHECK(rep.f == doctest::Approx(-4.5).epsilon(1e-14));
  CHECK(rep.max_bracket_identity < 1e-10);
  CHECK(rep.max_adapted_acceleration < 1e-10);
  CHECK(rep.max_h_normal < 1e-6);
  CHECK(rep.max_h_tangent < 1e-6);
  CHECK(rep.max_h_formula < 1e-6);
  CHECK(rep.min_B0 == doctest::Approx(2.0));
  CHECK(rep.classification.classification == Geodesy::None);
  CHECK(rep.passed());
  // zero-section invariants round-trip
  PrescribedInvariants t{zero_matrix(2, 2), zero_matrix(2, 2)};
  t.rho[0][0] = t.rho[1][1] = Expr::constant(-0.5);
  CHECK(round_trip_residual(rep.data, rep.total, t, std::vector<double>{0.2, 0.1}).max() < 1e-8);
  // B0(X^0, X^pi/2) = B0(dx, dy) = V = theta^{pi/4}
  const Vec V = Vec{{std::cos(std::numbers::pi / 2), std::sin(std::numbers::pi / 2)}};
  CHECK(evaluate(rep.data.B0[0][0][1], std::vector<double>{0, 0}) == doctest::Approx(V(0)));
  CHECK(evaluate(rep.data.B0[1][0][1], std::vector<double>{0, 0}) == doctest::Approx(V(1)));
}

TEST_CASE("random surface targets in a rank-2 bundle round-trip") {
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    const Instance I = random_surface_instance(seed);
    const RealizationData d = solve_prescription(I.geometry, I.targets, I.samples);
    const TotalSpaceChart T = build_total_metric(d, I.samples);
    for (const auto& x : I.samples) {
      const RoundTripResidual res = round_trip_residual(d, T, I.targets, x);
      CHECK(res.B0 < 1e-9);
      CHECK(res.mu < 1e-7);
      CHECK(res.rho < 1e-7);
      CHECK(ricci_table_residual(d, T, x).max() < 1e-8);
    }
  }
}

TEST_CASE("Ricci and covariant tables hold for arbitrary a, b, f") {
  std::mt19937_64 rng(7);
  const Instance I = random_surface_instance(77);
  RealizationData d = I.geometry;
  for (auto& row : d.a)
    for (auto& e : row) e = poly(rng, 2, 2, 0.5);
  d.b = symmetric_poly(rng, 2, 2, 0.5);
  d.f = poly(rng, 2, 2, 0.5);
  const TotalSpaceChart T = build_total_metric(d, I.samples);
  for (const auto& x : I.samples) {
    const RicciTableResidual ric = ricci_table_residual(d, T, x);
    CHECK(ric.tangential < 1e-8);
    CHECK(ric.mixed < 1e-8);
    CHECK(ric.vertical < 1e-8);
    CHECK(ric.scalar < 1e-8);
    const CovariantTableResidual cov = covariant_table_residual(d, T, x);
    CHECK(cov.horizontal_horizontal < 1e-8);
    CHECK(cov.vertical_horizontal < 1e-8);
    CHECK(cov.horizontal_vertical < 1e-8);
    CHECK(cov.vertical_vertical < 1e-8);
  }
}

TEST_CASE("round trip in other dimensions") {
  std::mt19937_64 rng(5);
  SUBCASE("curve base with a Laplace structure, rank 2") {
    RealizationData d = RealizationData::trivial(1, 2);
    d.base_metric = {{1.0 + 0.2 * Expr::variable(0) * Expr::variable(0)}};
    d.connection[0] = {{Expr::constant(0.0), Expr::variable(0)}, {-Expr::variable(0), Expr::constant(0.0)}};
    d.base_low.laplace = LaplaceStructure(d.base_chart(), poly(rng, 1, 2, 0.5));
    PrescribedInvariants t{{{poly(rng, 1, 2, 0.5), poly(rng, 1, 2, 0.5)}}, {{poly(rng, 1, 2, 0.5)}}};
    const std::vector<std::vector<double>> s = {{0.1}, {-0.3}};
    const RealizationData sol = solve_prescription(d, t, s);
    const TotalSpaceChart T = build_total_metric(sol, s);
    for (const auto& x : s) CHECK(round_trip_residual(sol, T, t, x).max() < 1e-7);
  }
  SUBCASE("three-dimensional curved base, rank 2") {
    RealizationData d = RealizationData::trivial(3, 2);
    d.base_metric = ConformalChart::from_strings(oracle::random_metric(rng, 3, 0.1)).metric_exprs();
    PrescribedInvariants t{zero_matrix(3, 2), symmetric_poly(rng, 3, 1, 0.3)};
    for (auto& row : t.mu)
      for (auto& e : row) e = poly(rng, 3, 1, 0.3);
    const std::vector<std::vector<double>> s = {{0.1, 0.0, -0.2}, {-0.2, 0.1, 0.1}};
    const RealizationData sol = solve_prescription(d, t, s);
    const TotalSpaceChart T = build_total_metric(sol, s);
    for (const auto& x : s) CHECK(round_trip_residual(sol, T, t, x).max() < 1e-7);
  }
  SUBCASE("Laplace curve in a Möbius surface") {
    RealizationData d = RealizationData::trivial(1, 1);
    d.base_metric = {{1.0 + 0.3 * Expr::variable(0)}};
    d.fiber_metric(0, 0) = 2.0;
    d.base_low.laplace = LaplaceStructure(d.base_chart(), poly(rng, 1, 2, 0.5));
    PrescribedInvariants t{{{poly(rng, 1, 2, 0.5)}}, {{poly(rng, 1, 2, 0.5)}}};
    const std::vector<std::vector<double>> s = {{0.1}, {-0.3}};
    const RealizationData sol = solve_prescription(d, t, s);
    REQUIRE(sol.total_h0.has_value());
    const TotalSpaceChart T = build_total_metric(sol, s);
    REQUIRE(T.low.mobius.has_value());
    for (const auto& x : s) CHECK(round_trip_residual(sol, T, t, x).max() < 1e-7);
  }
}

TEST_CASE("hypersurface prescriptions") {
  RealizationData d = RealizationData::trivial(2, 1);
  d.B0[0] = {{Expr::constant(1.0), Expr::constant(0.0)}, {Expr::constant(0.0), Expr::constant(-1.0)}};
  d.base_low.mobius = MobiusStructure::flat(d.base_chart());
  const std::vector<std::vector<double>> s = {{0.0, 0.0}, {0.2, 0.1}};
  // flat base, |B0|^2 = 2, m = 3: achievable tr rho = (2 * 2 - 2 * 3 * 2 / 4) / 1 = 1
  PrescribedInvariants t{zero_matrix(2, 1), zero_matrix(2, 2)};
  t.rho[0][0] = Expr::constant(0.7);
  t.rho[1][1] = Expr::constant(0.3);
  t.rho[0][1] = t.rho[1][0] = Expr::constant(0.2);
  const RealizationData sol = solve_prescription(d, t, s);
  const TotalSpaceChart T = build_total_metric(sol, s);
  for (const auto& x : s) CHECK(round_trip_residual(sol, T, t, x).max() < 1e-8);

  PrescribedInvariants bad_mu = t;
  bad_mu.mu[0][0] = Expr::constant(0.1);
  CHECK_THROWS_AS(solve_prescription(d, bad_mu, s), ValidationError);
  PrescribedInvariants bad_trace = t;
  bad_trace.rho[0][0] = Expr::constant(0.8);
  CHECK_THROWS_AS(solve_prescription(d, bad_trace, s), ValidationError);
}

TEST_CASE("a surface base without its Möbius structure is rejected") {
  RealizationData d = RealizationData::trivial(2, 2);
  PrescribedInvariants t{zero_matrix(2, 2), zero_matrix(2, 2)};
  CHECK_THROWS_AS(solve_prescription(d, t, {{0.0, 0.0}}), MissingStructureError);
}

namespace {

/// Normal covector components g(H, d_{y_k}) from the embedding module.
std::vector<double> mean_curvature_of(const Immersion& imm, const std::vector<double>& p) {
  const FundamentalForm F = fundamental_form(imm, WeylStructure(imm.ambient()), p);
  const Vec H = F.mean_curvature_vector();
  const Vec y = imm.image(p);
  const Mat g = imm.ambient().metric_at(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
  std::vector<double> out;
  for (int k = imm.n(); k < imm.m(); ++k) out.push_back((g * H)(k));
  return out;
}

Immersion rescaled_immersion(const Immersion& imm, const Expr& f) {
  return Immersion(imm.ambient().rescaled(-f), imm.n(), imm.components());
}

}  // namespace

TEST_CASE("adapted conformal factor") {
  SUBCASE("current mean curvature gives a vanishing factor") {
    std::mt19937_64 rng(9);
    const ConformalChart M = ConformalChart::from_strings(oracle::random_metric(rng, 3, 0.15));
    const Immersion imm = Immersion::from_strings(M, 2, {"x1", "x2", "0.1"});
    const std::vector<Expr> h = mean_curvature_covector(imm);
    const Expr f = adapted_factor(imm, h);
    for (int k = 0; k < 4; ++k) {
      auto p = oracle::random_point(rng, 3, 0.3);
      CHECK(std::abs(evaluate(f, p)) < 1e-12);
      for (int a = 0; a < 3; ++a) CHECK(std::abs(evaluate(differentiate(f, a), p)) < 1e-12);
    }
  }
  SUBCASE("plane in flat space bends to constant mean curvature") {
    const Immersion imm = Immersion::from_strings(ConformalChart::euclidean(3), 2, {"x1", "x2", "0"});
    const Expr f = adapted_factor(imm, {Expr::constant(0.4)});
    CHECK(evaluate(f, std::vector<double>{0.3, -0.2, 0.5}) == doctest::Approx(0.2));
    const Immersion bent = rescaled_immersion(imm, f);
    const auto H = mean_curvature_of(bent, {0.3, -0.2});
    CHECK(H[0] == doctest::Approx(0.4).epsilon(1e-12));
    const FundamentalForm F = fundamental_form(bent, WeylStructure(bent.ambient()), std::vector<double>{0.3, -0.2});
    CHECK(max_abs(F.B0[0]) < 1e-12);
  }
  SUBCASE("random graph hypersurface with a random linear target") {
    std::mt19937_64 rng(13);
    const ConformalChart M = ConformalChart::from_strings(oracle::random_metric(rng, 3, 0.15));
    const Immersion imm = Immersion::from_strings(M, 2, {"x1", "x2", "0"});
    const std::vector<Expr> target = {parse(oracle::random_polynomial(rng, 2, 1, 0.5))};
    const Expr f = adapted_factor(imm, target);
    // a second construction with the same first jet along N
    const Expr f2 = f + Expr::variable(2) * Expr::variable(2) * parse(oracle::random_polynomial(rng, 3, 2, 0.5));
    for (int k = 0; k < 4; ++k) {
      const auto p = oracle::random_point(rng, 2, 0.3);
      const auto H1 = mean_curvature_of(rescaled_immersion(imm, f), p);
      const auto H2 = mean_curvature_of(rescaled_immersion(imm, f2), p);
      CHECK(std::abs(H1[0] - evaluate(target[0], p)) < 1e-7);
      CHECK(std::abs(H1[0] - H2[0]) < 1e-10);
    }
  }
  SUBCASE("codimension two with a tilted normal bundle") {
    std::mt19937_64 rng(17);
    const ConformalChart M = ConformalChart::from_strings(oracle::random_metric(rng, 4, 0.15));
    const Immersion imm = Immersion::from_strings(M, 2, {"x1", "x2", "0.1", "-0.1"});
    const std::vector<Expr> target = {parse(oracle::random_polynomial(rng, 2, 1, 0.5)),
                                      parse(oracle::random_polynomial(rng, 2, 1, 0.5))};
    const Expr f = adapted_factor(imm, target);
    const auto p = oracle::random_point(rng, 2, 0.3);
    const auto H = mean_curvature_of(rescaled_immersion(imm, f), p);
    CHECK(std::abs(H[0] - evaluate(target[0], p)) < 1e-7);
    CHECK(std::abs(H[1] - evaluate(target[1], p)) < 1e-7);
  }
  SUBCASE("non-tubular coordinates are rejected") {
    const Immersion imm = Immersion::from_strings(ConformalChart::euclidean(3), 2, {"x1", "x2", "x1*x2"});
    CHECK_THROWS_AS(adapted_factor(imm, {Expr::constant(0.0)}), ValidationError);
  }
}
