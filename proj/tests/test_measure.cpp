#include <doctest.h>

#include <cmath>
#include <random>

#include "lp_oracle.hpp"
#include "otstab/measure.hpp"

using namespace otstab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(xs.size());
  int k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

DiscreteMeasure random_measure(const ManifoldSpec& s, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = u(rng);
  ManifoldSpec box = s.family == Family::euclidean ? euclidean(s.dim, BoxDomain{VectorXd::Zero(s.dim), VectorXd::Ones(s.dim)}) : s;
  return from_samples(s, sample_uniform(box, n, rng()), w);
}

}  // namespace

TEST_CASE("from_samples normalizes and validates") {
  auto s = euclidean(2);
  MatrixXd pts = MatrixXd::Random(2, 3);
  auto m = from_samples(s, pts);
  CHECK(m.weights().isApprox(VectorXd::Constant(3, 1.0 / 3), 1e-15));
  auto m2 = from_samples(s, MatrixXd::Random(2, 2), vec({2, 2}));
  CHECK(m2.weights()[0] == 0.5);
  CHECK(m2.weights()[1] == 0.5);
  CHECK_THROWS_AS(from_samples(s, MatrixXd::Random(2, 2), vec({1, -1})), PreconditionError);
  CHECK_THROWS_AS(from_samples(s, MatrixXd(2, 0)), PreconditionError);
  CHECK_THROWS_AS(from_samples(s, MatrixXd::Random(2, 2), vec({0, 0})), PreconditionError);
  CHECK_THROWS_AS(from_samples(sphere(2), MatrixXd::Ones(3, 1)), DomainError);
}

TEST_CASE("sample_density") {
  auto box = parse_spec("box:2:0,0:1,1");
  auto uni = sample_density(box, DensitySpec::uniform(), 50, 7);
  CHECK(uni.points() == sample_uniform(box, 50, 7));
  auto dens = DensitySpec::bounded(1.0, 1.5, [](const PointRef& x) { return 1.0 + x[0] / 2; });
  auto m = sample_density(box, dens, 100000, 8);
  CHECK(std::abs(m.points().row(0).mean() - 8.0 / 15.0) < 0.01);
  auto steeper = DensitySpec::bounded(1.0, 2.0, [](const PointRef& x) { return 1.0 + x[0]; });
  CHECK(std::abs(sample_density(box, steeper, 100000, 9).points().row(0).mean() - 5.0 / 9.0) < 0.01);
  CHECK(m.weights()[17] == doctest::Approx(1e-5));
  CHECK_THROWS_AS(sample_density(box, dens, 0, 8), PreconditionError);
  auto lying = DensitySpec::bounded(1.0, 2.0, [](const PointRef&) { return 3.0; });
  CHECK_THROWS_AS(sample_density(box, lying, 10, 1), ConfigError);
  auto sparse = DensitySpec::bounded(1e-6, 1.0, [](const PointRef& x) { return x[0] < 1e-7 ? 1.0 : 1e-6; });
  CHECK_THROWS_AS(sample_density(box, sparse, 10, 1), ConfigError);
}

TEST_CASE("wasserstein1 examples") {
  auto s = euclidean(2);
  std::mt19937_64 rng(3);
  auto a = random_measure(s, 12, rng);
  CHECK(std::abs(wasserstein1(a, a)) < 1e-12);
  MatrixXd x(2, 1), y(2, 1);
  x << 0.2, 0.3;
  y << -1.0, 2.0;
  CHECK(wasserstein1(from_samples(s, x), from_samples(s, y)) == doctest::Approx((x - y).norm()).epsilon(1e-14));
  MatrixXd pq(2, 2);
  pq << 0, 1, 0, 0;
  MatrixXd p(2, 1);
  p << 0, 0;
  CHECK(wasserstein1(from_samples(s, pq), from_samples(s, p)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(wasserstein1(a, from_samples(sphere(2), sample_uniform(sphere(2), 3, 1))), DomainError);
  auto big = from_samples(parse_spec("box:1:0:1"), sample_uniform(parse_spec("box:1:0:1"), 2001, 1));
  CHECK_THROWS_AS(wasserstein1(big, big), CapacityError);
}

TEST_CASE("wasserstein1 skips zero-mass points") {
  auto s = euclidean(1);
  MatrixXd pts(1, 3);
  pts << 0.0, 5.0, 1.0;
  auto a = from_samples(s, pts, vec({0.5, 0.0, 0.5}));
  MatrixXd q(1, 1);
  q << 0.5;
  CHECK(wasserstein1(a, from_samples(s, q)) == doctest::Approx(0.5));
}

TEST_CASE("wasserstein1 agrees with a dense simplex oracle") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(1, 6);
  for (const auto& s : {euclidean(2), sphere(2), torus(2)}) {
    for (int draw = 0; draw < 60; ++draw) {
      auto a = random_measure(s, size(rng), rng);
      auto b = random_measure(s, size(rng), rng);
      auto rep = wasserstein1_report(a, b);
      double ref = oracle::transport_lp(a.weights(), b.weights(), distance_matrix(s, a.points(), b.points()));
      REQUIRE(std::abs(rep.value - ref) <= 1e-9);
      REQUIRE(std::abs(rep.gap) <= 1e-9 * (1 + rep.value));
    }
  }
}

TEST_CASE("wasserstein1 metric axioms") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> size(1, 30);
  for (const auto& s : {euclidean(3), sphere(2), torus(2)}) {
    for (int t = 0; t < 40; ++t) {
      auto a = random_measure(s, size(rng), rng);
      auto b = random_measure(s, size(rng), rng);
      auto c = random_measure(s, size(rng), rng);
      double ab = wasserstein1(a, b);
      REQUIRE(std::abs(ab - wasserstein1(b, a)) <= 1e-10);
      REQUIRE(wasserstein1(a, c) <= ab + wasserstein1(b, c) + 1e-9);
    }
  }
}

TEST_CASE("Kantorovich-Rubinstein lower bound") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0, 1);
  auto s = sphere(2);
  for (int t = 0; t < 50; ++t) {
    auto a = random_measure(s, 25, rng);
    auto b = random_measure(s, 20, rng);
    double w = wasserstein1(a, b);
    // f(x) = min_k (h_k + dist(x, z_k)) is 1-Lipschitz
    PointSet z = sample_uniform(s, 5, rng());
    VectorXd h(5);
    for (int k = 0; k < 5; ++k) h[k] = g(rng);
    auto f = [&](const PointRef& x) {
      double best = 1e300;
      for (int k = 0; k < 5; ++k) best = std::min(best, h[k] + dist(s, x, z.col(k)));
      return best;
    };
    double fa = 0, fb = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) fa += a.weights()[i] * f(a.point(i));
    for (Eigen::Index j = 0; j < b.size(); ++j) fb += b.weights()[j] * f(b.point(j));
    REQUIRE(std::abs(fa - fb) <= w + 1e-9);
  }
}

TEST_CASE("network simplex on a larger instance reports a closed duality gap") {
  std::mt19937_64 rng(17);
  auto s = sphere(2);
  auto a = random_measure(s, 300, rng);
  auto b = random_measure(s, 250, rng);
  auto rep = wasserstein1_report(a, b);
  CHECK(rep.value > 0);
  CHECK(std::abs(rep.gap) <= 1e-9 * (1 + rep.value));
}

TEST_CASE("variance examples") {
  CHECK(variance(VectorXd::Constant(4, 3.2), VectorXd::Constant(4, 0.25)) == 0.0);
  CHECK(variance(vec({0, 1}), vec({0.5, 0.5})) == doctest::Approx(0.25));
  CHECK(variance(vec({1, 2, 3}), VectorXd::Constant(3, 1.0 / 3)) == doctest::Approx(2.0 / 3).epsilon(1e-14));
  CHECK_THROWS_AS(variance(vec({1, 2}), VectorXd::Constant(3, 1.0 / 3)), PreconditionError);
}
