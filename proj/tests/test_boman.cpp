#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "otstab/boman.hpp"

using namespace otstab;
using Eigen::VectorXd;

namespace {

struct Built {
  JohnDomain domain;
  DiscreteMeasure rho;
  BomanCover cover;
};

Built build(const char* text, int n, std::uint64_t seed, double R = 0.25, CoverParams params = {}) {
  auto s = parse_spec(text);
  auto dom = john_domain(s);
  auto rho = from_samples(s, sample_uniform(s, n, seed));
  auto cover = build_cover(dom, rho, R, params);
  return {dom, rho, cover};
}

PointSet with_extra(const Built& b, int extra, std::uint64_t seed) {
  PointSet tp(2, b.rho.size() + extra);
  tp << b.rho.points(), sample_uniform(b.domain.spec, extra, seed);
  return tp;
}

double lipschitz_batch_max(const Built& b, int count) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0, 1);
  double worst = 0;
  for (int k = 0; k < count; ++k) {
    double a = g(rng), c = g(rng), s = g(rng);
    Eigen::Vector2d z(g(rng), g(rng));
    auto f = [&](const PointRef& x) { return a * x[0] + c * x[1] + s * std::sin(3 * (x - z).norm()); };
    worst = std::max(worst, gluing_check(b.cover, b.domain, b.rho, f).kappa_hat);
  }
  return worst;
}

}  // namespace

TEST_CASE("John curves satisfy the certified cone condition") {
  for (auto text : {"ball:2:1.0", "box:2:0,0:1,1", "annulus:2:0.5:1.0:270", "ball:3:0.5"}) {
    auto dom = john_domain(parse_spec(text));
    CHECK(dom.eta > 0);
    CHECK(dom.eta <= 1);
    PointSet starts = sample_uniform(dom.spec, 300, 4);
    for (Eigen::Index i = 0; i < starts.cols(); ++i) {
      JohnCurve g = dom.curve(starts.col(i));
      REQUIRE((g.at(g.length) - dom.center).norm() <= 1e-9);
      REQUIRE((g.at(0) - starts.col(i)).norm() <= 1e-12);
      double dx = dom.boundary_dist(starts.col(i));
      for (int k = 1; k <= 50; ++k) {
        double t = g.length * k / 50;
        Point p = g.at(t);
        REQUIRE(dom.inside(p));
        REQUIRE(dom.boundary_dist(p) >= dom.eta * t - 1e-9);
        REQUIRE(dom.boundary_dist(p) / dx >= dom.eta / 2 - 1e-12);
      }
    }
  }
  CHECK(john_domain(parse_spec("box:2:0,0:1,1")).eta == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK_THROWS_AS(john_domain(sphere(2)), ConfigError);
}

TEST_CASE("build_cover on the unit disk covers the support") {
  auto b = build("ball:2:1.0", 200, 3);
  for (const auto& ball : b.cover.balls) {
    REQUIRE(ball.radius <= 0.25);
    REQUIRE(b.domain.inside(ball.center));
    REQUIRE(ball.radius < b.domain.boundary_dist(ball.center));
  }
  for (Eigen::Index i = 0; i < b.rho.size(); ++i) {
    int q = b.cover.owner[i];
    REQUIRE((b.rho.point(i) - b.cover.balls[q].center).norm() <= b.cover.balls[q].radius);
  }
  CHECK(b.cover.balls[b.cover.central_index].center == b.domain.center);
}

TEST_CASE("selected balls are disjoint within each dyadic class") {
  auto b = build("annulus:2:0.5:1.0:270", 300, 5);
  const auto& balls = b.cover.balls;
  const double shrink = b.cover.params.shrink;
  std::map<int, std::vector<int>> classes;
  for (std::size_t q = 0; q < balls.size(); ++q) {
    REQUIRE(std::exp2(balls[q].dyadic_class - 1) < balls[q].delta);
    REQUIRE(balls[q].delta <= std::exp2(balls[q].dyadic_class));
    classes[balls[q].dyadic_class].push_back(static_cast<int>(q));
  }
  long violations = 0;
  for (const auto& [k, ids] : classes)
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) {
        const auto &p = balls[ids[i]], &q = balls[ids[j]];
        if ((p.center - q.center).norm() < (p.delta + q.delta) / shrink) ++violations;
      }
  CHECK(violations == 0);
}

TEST_CASE("chains run from the central ball through overlapping balls") {
  auto b = build("annulus:2:0.5:1.0:270", 300, 6);
  REQUIRE(b.cover.chains.size() == b.cover.balls.size());
  for (std::size_t q = 0; q < b.cover.chains.size(); ++q) {
    const auto& chain = b.cover.chains[q];
    REQUIRE(!chain.empty());
    REQUIRE(chain.front() == b.cover.central_index);
    REQUIRE(chain.back() == static_cast<int>(q));
    for (std::size_t j = 1; j < chain.size(); ++j) {
      REQUIRE(chain[j] != chain[j - 1]);
      const auto &p = b.cover.balls[chain[j - 1]], &r = b.cover.balls[chain[j]];
      REQUIRE((p.center - r.center).norm() < p.radius + r.radius);
    }
  }
}

TEST_CASE("single support point at the John center") {
  auto s = parse_spec("ball:2:1.0");
  auto dom = john_domain(s);
  PointSet x(2, 1);
  x.col(0) = dom.center;
  auto cover = build_cover(dom, from_samples(s, x), 0.25);
  REQUIRE(cover.balls.size() == 1);
  CHECK(cover.chains[0] == std::vector<int>{0});
  CHECK(cover.owner[0] == 0);
}

TEST_CASE("build_cover rejects bad input") {
  auto s = parse_spec("ball:2:1.0");
  auto dom = john_domain(s);
  PointSet out(2, 1);
  out << 2.0, 0.0;
  CHECK_THROWS_AS(build_cover(dom, from_samples(euclidean(2), out), 0.25), DomainError);
  auto rho = from_samples(s, sample_uniform(s, 5, 1));
  CHECK_THROWS_AS(build_cover(dom, rho, 0.0), PreconditionError);
  CHECK_THROWS_AS(build_cover(dom, rho, -1.0), PreconditionError);
}

TEST_CASE("verify_cover on a single enclosing ball") {
  auto s = parse_spec("ball:2:1.0");
  auto dom = john_domain(s);
  auto rho = from_samples(s, sample_uniform(s, 50, 2));
  BomanCover c;
  c.balls.push_back({dom.center, 1.0, 1.0, 0});
  c.chains = {{0}};
  c.central_index = 0;
  c.R_cap = 1.0;
  c.params.mass = MassModel::empirical;
  auto rep = verify_cover(c, dom, rho, rho.points());
  CHECK(rep.A == 1);
  CHECK(rep.B == 1);
  CHECK(rep.C == 1);
  CHECK(rep.pass);
  VectorXd f = rho.points().row(0).transpose();
  auto g = gluing_check(c, rho, f);
  CHECK(g.kappa_hat == doctest::Approx(1.0));
}

TEST_CASE("Boman conditions on the disk and the annulus sector") {
  for (auto text : {"ball:2:1.0", "annulus:2:0.5:1.0:270"}) {
    auto b = build(text, 500, 7);
    auto rep = verify_cover(b.cover, b.domain, b.rho, with_extra(b, 1000, 8));
    CHECK(rep.pass);
    CHECK(std::isfinite(rep.A));
    CHECK(std::isfinite(rep.B));
    CHECK(std::isfinite(rep.C));
    // consecutive balls have comparable mass
    for (const auto& chain : b.cover.chains)
      for (std::size_t j = 1; j < chain.size(); ++j) {
        double ratio = ball_mass(b.cover, b.domain, b.rho, chain[j - 1]) / ball_mass(b.cover, b.domain, b.rho, chain[j]);
        REQUIRE(ratio <= rep.C * (1 + 1e-12));
        REQUIRE(ratio >= 1 / (rep.C * (1 + 1e-12)));
      }
  }
}

TEST_CASE("Boman constants are stable across seeds") {
  auto a = build("ball:2:1.0", 500, 11);
  auto b = build("ball:2:1.0", 500, 12);
  auto ra = verify_cover(a.cover, a.domain, a.rho, with_extra(a, 1000, 13));
  auto rb = verify_cover(b.cover, b.domain, b.rho, with_extra(b, 1000, 14));
  for (auto [x, y] : {std::pair{ra.A, rb.A}, {ra.B, rb.B}, {ra.C, rb.C}}) CHECK(std::abs(x - y) <= 0.2 * std::max(x, y));
}

TEST_CASE("variance gluing") {
  auto disk = build("ball:2:1.0", 500, 21);
  auto constant = gluing_check(disk.cover, disk.domain, disk.rho, [](const PointRef&) { return 2.5; });
  CHECK(constant.lhs == 0.0);
  CHECK(constant.rhs == 0.0);
  CHECK(constant.kappa_hat == 1.0);
  CHECK(gluing_check(disk.cover, disk.rho, VectorXd::Constant(500, 2.5)).kappa_hat == 1.0);

  auto half = gluing_check(disk.cover, disk.domain, disk.rho, [](const PointRef& x) { return x[0] > 0 ? 1.0 : 0.0; });
  CHECK(half.lhs > 0);
  CHECK(std::isfinite(half.kappa_hat));

  auto annulus = build("annulus:2:0.5:1.0:270", 500, 22);
  double worst = lipschitz_batch_max(annulus, 100);
  MESSAGE("annulus max kappa_hat = " << worst);
  CHECK(std::isfinite(worst));
  CHECK(worst > 0);
}

TEST_CASE("empirical mass model counts support points") {
  CoverParams p;
  p.mass = MassModel::empirical;
  auto b = build("ball:2:1.0", 200, 31, 0.25, p);
  for (int q : {0, 5, 17}) {
    double m = 0;
    for (Eigen::Index i = 0; i < b.rho.size(); ++i)
      if ((b.rho.point(i) - b.cover.balls[q].center).norm() <= b.cover.balls[q].radius) m += b.rho.weights()[i];
    CHECK(ball_mass(b.cover, b.domain, b.rho, q) == doctest::Approx(m));
  }
}

TEST_CASE("lens volumes") {
  using std::numbers::pi;
  CHECK(lens_volume(2, 1, 1, 3) == 0.0);
  CHECK(lens_volume(2, 1, 0.5, 0.2) == doctest::Approx(pi * 0.25));
  CHECK(lens_volume(2, 1, 1, 1) == doctest::Approx(2 * pi / 3 - std::sqrt(3.0) / 2));
  CHECK(lens_volume(1, 1, 1, 0.5) == doctest::Approx(1.5));
  // two unit spheres at distance 1: 5 pi / 12
  CHECK(lens_volume(3, 1, 1, 1) == doctest::Approx(5 * pi / 12));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  long hit = 0;
  const long n = 400000;
  for (long k = 0; k < n; ++k) {
    double x = u(rng), y = u(rng);
    if (x * x + y * y <= 1 && (x - 0.7) * (x - 0.7) + y * y <= 0.36) ++hit;
  }
  CHECK(lens_volume(2, 1, 0.6, 0.7) == doctest::Approx(4.0 * hit / n).epsilon(0.02));
  CHECK_THROWS_AS(lens_volume(4, 1, 1, 1), PreconditionError);
}
