#include <doctest.h>

#include <random>

#include "confgeom/errors.hpp"
#include "confgeom/tensor.hpp"

using namespace confgeom;

namespace {

Mat random_spd(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1, 1);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = u(rng);
  return a * a.transpose() + n * Mat::Identity(n, n);
}

Mat random_mat(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1, 1);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = u(rng);
  return a;
}

Vec random_vec(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1, 1);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

}  // namespace

TEST_CASE("raise and lower") {
  std::mt19937_64 rng(1);
  Mat g = random_spd(rng, 3);
  WeightedTensor t({Slot::Co, Slot::Contra, Slot::Co}, 1, g);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : t.data()) v = u(rng);
  WeightedTensor back = lower(raise(t, 0), 0);
  CHECK(raise(t, 0).weight() == t.weight() - 2);
  CHECK(raise(t, 0).conformal_weight() == t.conformal_weight());
  for (std::size_t k = 0; k < t.data().size(); ++k) CHECK(back.data()[k] == doctest::Approx(t.data()[k]));

  Mat euclid = Mat::Identity(2, 2);
  Vec c(2);
  c << 0.3, -2.0;
  CHECK(raise(WeightedTensor::covector(c, euclid), 0).as_vector() == c);

  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 1;
  d(1, 1) = 4;
  Vec e2(2);
  e2 << 0, 1;
  Vec up = raise(WeightedTensor::covector(e2, d), 0).as_vector();
  CHECK(up(0) == 0.0);
  CHECK(up(1) == doctest::Approx(0.25));
  CHECK_THROWS_AS(raise(WeightedTensor::covector(e2, Mat::Zero(2, 2)), 0), SingularMetricError);
}

TEST_CASE("wedge of a covector and a vector") {
  Mat g = Mat::Identity(2, 2);
  Vec e1(2), e2(2);
  e1 << 1, 0;
  e2 << 0, 1;
  Mat w = wedge_vf(WeightedTensor::covector(e1, g), WeightedTensor::vector(e1, g)).as_matrix();
  CHECK((w * e1).norm() == 0.0);
  w = wedge_vf(WeightedTensor::covector(e1, g), WeightedTensor::vector(e2, g)).as_matrix();
  CHECK((w * e1 - e2).norm() == 0.0);
  CHECK((w * e2 + e1).norm() == 0.0);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 4;
    Mat gm = random_spd(rng, n);
    Mat e = wedge_vf(WeightedTensor::covector(random_vec(rng, n), gm), WeightedTensor::vector(random_vec(rng, n), gm))
                .as_matrix();
    Mat lowered = gm * e;
    CHECK((lowered + lowered.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("tilde theta acts on densities and endomorphisms") {
  std::mt19937_64 rng(3);
  const int n = 4;
  Mat g = random_spd(rng, n);
  WeightedTensor theta = WeightedTensor::covector(random_vec(rng, n), g);
  WeightedTensor x = WeightedTensor::vector(random_vec(rng, n), g);
  CHECK(tilde_theta(WeightedTensor::covector(Vec::Zero(n), g), x).max_abs() == 0.0);

  WeightedTensor e = tilde_theta(theta, x);
  const double th_x = theta.as_vector().dot(x.as_vector());
  for (Weight k : {Weight(0), Weight(1), Weight(-3, 2)}) {
    WeightedTensor l = WeightedTensor::scalar(1.7, k, g);
    CHECK(co_act(e, l).data()[0] == doctest::Approx(boost::rational_cast<double>(k) * th_x * 1.7));
  }
  Mat a = random_mat(rng, n);
  Mat wedge = wedge_vf(theta, x).as_matrix();
  Mat expected = wedge * a - a * wedge;
  Mat got = co_act(e, WeightedTensor::endomorphism(a, g)).as_matrix();
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(co_act(e, WeightedTensor::conformal_metric(g)).max_abs() < 1e-12);
}

TEST_CASE("suspension and Ricci contraction") {
  std::mt19937_64 rng(4);
  Mat g2 = Mat::Identity(2, 2);
  Mat tf(2, 2);
  tf << 1, 0, 0, -1;
  CHECK(suspension(WeightedTensor::bilinear(tf, g2)).max_abs() == 0.0);
  CHECK(suspension(WeightedTensor::bilinear(Mat::Zero(3, 3), Mat::Identity(3, 3))).max_abs() == 0.0);

  for (int n = 3; n <= 5; ++n) {
    Mat g = random_spd(rng, n);
    Mat a = random_mat(rng, n);
    auto s = suspension(WeightedTensor::bilinear(a, g));
    Mat ric = ricci_contraction(s).as_matrix();
    CHECK((ric - ((n - 2) * a + trace(a, g) * g)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.antisymmetry_residual() < 1e-12);
    auto sym = suspension(WeightedTensor::bilinear(symmetric_part(a), g));
    CHECK(sym.bianchi_residual() < 1e-12);
    CHECK(sym.skew_residual() < 1e-12);

    Mat cric = ricci_contraction(suspension(WeightedTensor::conformal_metric(g))).as_matrix();
    CHECK((cric - (2 * n - 2) * g).cwiseAbs().maxCoeff() < 1e-12);

    Mat f = skew_part(random_mat(rng, n));
    Mat fric = ricci_contraction(two_form_times_id(WeightedTensor::bilinear(f, g))).as_matrix();
    CHECK((fric + f).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("h_map inverts ric of the suspension") {
  std::mt19937_64 rng(5);
  Mat g3 = Mat::Identity(3, 3);
  Mat a0(3, 3);
  a0 << 1, 2, 0, 2, -3, 1, 0, 1, 2;
  CHECK((h_map(WeightedTensor::bilinear(a0, g3)).as_matrix() - a0).cwiseAbs().maxCoeff() < 1e-14);
  for (int n = 3; n <= 5; ++n) {
    Mat g = random_spd(rng, n);
    Mat h = h_map(WeightedTensor::conformal_metric(g)).as_matrix();
    CHECK((h - g / (2.0 * (n - 1))).cwiseAbs().maxCoeff() < 1e-12);
    Mat a = random_mat(rng, n), b = random_mat(rng, n);
    Mat back = ricci_contraction(suspension(h_map(WeightedTensor::bilinear(a, g)))).as_matrix();
    CHECK((back - a).cwiseAbs().maxCoeff() < 1e-12);
    Mat lin = h_map(WeightedTensor::bilinear(2.5 * a - 0.5 * b, g)).as_matrix();
    Mat sep = 2.5 * h_map(WeightedTensor::bilinear(a, g)).as_matrix() - 0.5 * h_map(WeightedTensor::bilinear(b, g)).as_matrix();
    CHECK((lin - sep).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(h_map(WeightedTensor::bilinear(Mat::Identity(2, 2), Mat::Identity(2, 2))), DimensionError);
}
