#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "otstab/manifold.hpp"

using namespace otstab;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(xs.size());
  int k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

std::vector<ManifoldSpec> families() { return {sphere(2), sphere(1), torus(2), torus(3), parse_spec("ball:3:1.0")}; }

}  // namespace

TEST_CASE("spec strings round trip") {
  for (const char* s : {"sphere:2", "torus:3", "ball:2:1", "box:2:0,0:1,1", "annulus:2:0.5:1:270", "euclidean:3"}) {
    CHECK(to_string(parse_spec(s)) == s);
  }
  CHECK_THROWS_AS(parse_spec("sphere:3"), ConfigError);
  CHECK_THROWS_AS(parse_spec("ball:2"), ConfigError);
  CHECK_THROWS_AS(parse_spec("box:2:0,0:1"), ConfigError);
  CHECK_THROWS_AS(parse_spec("klein:2"), ConfigError);
  auto a = parse_spec("annulus:2:0.5:1.0:270");
  CHECK(std::get<AnnulusSector>(*a.domain).angle_deg == 270.0);
}

TEST_CASE("dist examples") {
  CHECK(dist(sphere(2), vec({1, 0, 0}), vec({0, 1, 0})) == doctest::Approx(kPi / 2).epsilon(1e-15));
  CHECK(dist(torus(2), vec({0.1, 0.9}), vec({0.9, 0.1})) == doctest::Approx(std::sqrt(0.08)).epsilon(1e-12));
  CHECK(dist(euclidean(3), vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
  // atan2 form keeps precision near 0 and pi where arccos loses half the digits
  double a = 1e-9;
  CHECK(dist(sphere(1), vec({1, 0}), vec({std::cos(a), std::sin(a)})) == doctest::Approx(a).epsilon(1e-12));
  CHECK(dist(sphere(1), vec({1, 0}), vec({-std::cos(a), std::sin(a)})) == doctest::Approx(kPi - a).epsilon(1e-15));
}

TEST_CASE("point validation") {
  CHECK_THROWS_AS(dist(sphere(2), vec({1, 0, 0}), vec({0, 1})), DomainError);
  CHECK_THROWS_AS(validate_point(sphere(2), vec({1, 1e-5, 0})), DomainError);
  CHECK_THROWS_AS(validate_point(torus(1), vec({1.0})), DomainError);
  CHECK_THROWS_AS(validate_point(torus(1), vec({-0.1})), DomainError);
  CHECK_NOTHROW(validate_point(torus(2), vec({0.0, 0.999})));
}

TEST_CASE("exp_map examples") {
  VectorXd y = exp_map(sphere(2), vec({1, 0, 0}), vec({0, kPi / 2, 0}));
  CHECK((y - vec({0, 1, 0})).norm() < 1e-10);
  for (const auto& s : families()) {
    UniformSampler smp(s, 3);
    VectorXd x = smp.draw();
    CHECK(exp_map(s, x, VectorXd::Zero(x.size())) == x);
  }
  CHECK(exp_map(torus(1), vec({0.9}), vec({0.2}))[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(exp_map(sphere(2), vec({1, 0, 0}), vec({0.1, 0, 0})), DomainError);
}

TEST_CASE("log_map examples") {
  CHECK(log_map(sphere(2), vec({0, 0, 1}), vec({0, 0, 1})).norm() == 0.0);
  VectorXd v = log_map(sphere(2), vec({1, 0, 0}), vec({0, 1, 0}));
  CHECK((v - vec({0, kPi / 2, 0})).norm() < 1e-14);
  CHECK(log_map(torus(1), vec({0.0}), vec({0.5}))[0] == 0.5);
  CHECK(log_map(torus(1), vec({0.5}), vec({0.0}))[0] == 0.5);
  CHECK(log_map(torus(2), vec({0.1, 0.2}), vec({0.6, 0.3}))[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(log_map(sphere(2), vec({1, 0, 0}), vec({-1, 0, 0})), CutLocusError);
}

TEST_CASE("geodesic_point examples") {
  VectorXd x = vec({1, 0, 0}), y = vec({0, 1, 0});
  CHECK(geodesic_point(sphere(2), x, y, 0.0) == x);
  CHECK(geodesic_point(sphere(2), x, y, 1.0) == y);
  CHECK((geodesic_point(euclidean(2), vec({0, 0}), vec({2, 0}), 0.25) - vec({0.5, 0})).norm() < 1e-15);
  VectorXd mid = geodesic_point(sphere(2), x, y, 0.5);
  CHECK((mid - vec({1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 0})).norm() < 1e-14);
  CHECK_THROWS_AS(geodesic_point(sphere(2), x, -x, 0.5), CutLocusError);
}

TEST_CASE("geodesic_point splits the distance") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (const auto& s : families()) {
    UniformSampler smp(s, 5);
    for (int k = 0; k < 300; ++k) {
      VectorXd x = smp.draw(), y = smp.draw();
      double d = dist(s, x, y);
      if (d > 0.95 * injectivity_radius(s)) continue;
      double t = u(rng);
      VectorXd z = geodesic_point(s, x, y, t);
      CHECK(std::abs(dist(s, x, z) - t * d) < 1e-9);
      CHECK(std::abs(dist(s, z, y) - (1 - t) * d) < 1e-9);
    }
  }
}

TEST_CASE("injectivity radius") {
  CHECK(injectivity_radius(sphere(2)) == kPi);
  CHECK(injectivity_radius(torus(3)) == 0.5);
  CHECK(std::isinf(injectivity_radius(euclidean(2))));
}

TEST_CASE("sample_uniform examples") {
  PointSet s = sample_uniform(sphere(2), 100000, 1);
  VectorXd mean = s.rowwise().mean();
  for (int k = 0; k < 3; ++k) CHECK(std::abs(mean[k]) < 0.02);
  PointSet t = sample_uniform(torus(3), 1, 2);
  CHECK(t.cols() == 1);
  CHECK((t.array() >= 0).all());
  CHECK((t.array() < 1).all());
  PointSet b = sample_uniform(parse_spec("ball:2:1.0"), 100000, 3);
  CHECK(std::abs(b.colwise().norm().mean() - 2.0 / 3.0) < 0.01);
  CHECK_THROWS_AS(sample_uniform(euclidean(2), 5, 1), DomainError);
  CHECK(sample_uniform(sphere(2), 10, 9) == sample_uniform(sphere(2), 10, 9));
  PointSet a = sample_uniform(parse_spec("annulus:2:0.5:1.0:270"), 2000, 4);
  for (Eigen::Index i = 0; i < a.cols(); ++i) CHECK(inside(parse_spec("annulus:2:0.5:1.0:270"), a.col(i)));
  // cap of angle pi/3 holds a quarter of the sphere's area
  auto cap = parse_spec("cap:2:1.0471975511965976");
  PointSet c = sample_uniform(cap, 20000, 5);
  CHECK(c.row(2).mean() == doctest::Approx(0.75).epsilon(0.01));
}

TEST_CASE("metric axioms on random triples") {
  for (const auto& s : families()) {
    UniformSampler smp(s, 17);
    for (int k = 0; k < 10000; ++k) {
      VectorXd x = smp.draw(), y = smp.draw(), z = smp.draw();
      double dxy = dist(s, x, y), dyx = dist(s, y, x);
      REQUIRE(dxy == dyx);
      REQUIRE(dxy >= 0);
      REQUIRE(dist(s, x, z) <= dxy + dist(s, y, z) + 1e-12);
    }
  }
}

TEST_CASE("exp/log round trip") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (const auto& s : families()) {
    UniformSampler smp(s, 29);
    double inj = std::isinf(injectivity_radius(s)) ? 2.0 : injectivity_radius(s);
    for (int k = 0; k < 2000; ++k) {
      VectorXd x = smp.draw();
      VectorXd v = smp.unit_direction(x) * (0.9 * inj * u(rng));
      VectorXd back = log_map(s, x, exp_map(s, x, v));
      REQUIRE((back - v).norm() < 1e-8);
      REQUIRE(std::abs(dist(s, x, exp_map(s, x, v)) - v.norm()) < 1e-10);
    }
  }
}

TEST_CASE("semi-concavity probe of the quadratic cost") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  for (const auto& s : families()) {
    double lambda = curvature_constants(s).lambda;
    UniformSampler smp(s, 37);
    for (int k = 0; k < 3000; ++k) {
      VectorXd x0 = smp.draw(), x1 = smp.draw(), y = smp.draw();
      double d01 = dist(s, x0, x1);
      if (d01 > 0.9 * injectivity_radius(s)) continue;
      double t = u(rng);
      VectorXd xt = geodesic_point(s, x0, x1, t);
      auto c = [&](const VectorXd& x) { return 0.5 * std::pow(dist(s, x, y), 2); };
      REQUIRE(c(xt) >= (1 - t) * c(x0) + t * c(x1) - lambda * t * (1 - t) * d01 * d01 / 2 - 1e-12);
    }
  }
}

TEST_CASE("strong convexity probe of the squared distance") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ManifoldSpec> specs = {sphere(2), sphere(1), torus(2), torus(3), euclidean(2), euclidean(4)};
  for (const auto& s : specs) {
    auto k = curvature_constants(s);
    double R = std::isinf(k.radius) ? 3.0 : k.radius;
    ManifoldSpec sampling = s.family == Family::euclidean ? euclidean(s.dim, BallDomain{VectorXd::Zero(s.dim), 1.0}) : s;
    UniformSampler smp(sampling, 43);
    for (int trial = 0; trial < 500; ++trial) {
      VectorXd x = smp.draw();
      VectorXd z0 = exp_map(s, x, smp.unit_direction(x) * (0.8 * R * u(rng)));
      VectorXd dir = smp.unit_direction(z0);
      double h = 1e-3 * R;
      VectorXd zp = exp_map(s, z0, h * dir), zm = exp_map(s, z0, -h * dir);
      if (dist(s, x, zp) >= R || dist(s, x, zm) >= R) continue;
      auto f = [&](const VectorXd& z) { return std::pow(dist(s, z, x), 2); };
      REQUIRE(f(zp) - 2 * f(z0) + f(zm) >= k.theta * h * h - 1e-8);
    }
  }
}

TEST_CASE("domain geometry") {
  auto ball = parse_spec("ball:2:1.0");
  CHECK(boundary_distance(ball, vec({0.25, 0})) == doctest::Approx(0.75));
  CHECK(signed_boundary_distance(ball, vec({2, 0})) == doctest::Approx(-1));
  auto box = parse_spec("box:2:0,0:1,2");
  CHECK(boundary_distance(box, vec({0.3, 1.0})) == doctest::Approx(0.3));
  CHECK(signed_boundary_distance(box, vec({2, 3})) == doctest::Approx(-std::sqrt(2.0)));
  auto ann = parse_spec("annulus:2:0.5:1.0:270");
  CHECK(inside(ann, vec({0, 0.75})));
  CHECK(!inside(ann, vec({0.5, -0.5})));
  CHECK(!inside(ann, vec({0.1, 0.1})));
  CHECK(boundary_distance(ann, vec({0, 0.75})) == doctest::Approx(0.25));
  CHECK(boundary_distance(ann, vec({-0.75, 0.05})) == doctest::Approx(1 - std::hypot(0.75, 0.05)));
  CHECK(boundary_distance(ann, vec({0.75, 0.1})) == doctest::Approx(0.1));
  CHECK(domain_volume(ann) == doctest::Approx(0.75 * kPi * 0.75));
  CHECK(boundary_measure(parse_spec("ball:2:1.0")) == doctest::Approx(2 * kPi));
  CHECK(boundary_measure(ann) == doctest::Approx(1.5 * kPi * 1.5 + 1.0));
  CHECK(boundary_measure(torus(2)) == 0.0);
}
