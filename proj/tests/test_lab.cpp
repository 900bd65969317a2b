#include <doctest.h>

#include <cmath>
#include <random>

#include "otstab/lab.hpp"

using namespace otstab;

namespace {

std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> out;
  for (int k = 0; k < n; ++k) out.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1)));
  return out;
}

// Slope of log sqrt(variance) against log w1 by a QR least-squares solve.
double sqrt_variance_slope(int d, const std::vector<double>& eps) {
  Eigen::MatrixXd A(eps.size(), 2);
  Eigen::VectorXd b(eps.size());
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const double e = eps[k];
    const double mean = std::pow(e, d + 1) / (d + 1), second = 2 * std::pow(e, d + 2) / ((d + 1.0) * (d + 2.0));
    A(k, 0) = 1;
    A(k, 1) = d * std::log(e);
    b[k] = 0.5 * std::log(second - mean * mean);
  }
  return A.colPivHouseholderQr().solve(b)[1];
}

}  // namespace

TEST_CASE("sharpness closed form values") {
  auto r = sharpness_closed_form(2, 0.5);
  CHECK(r.mean_diff == doctest::Approx(0.0416667).epsilon(1e-5));
  CHECK(r.second_moment == doctest::Approx(0.0104167).epsilon(1e-5));
  CHECK(r.variance == doctest::Approx(0.0086806).epsilon(1e-5));
  CHECK(r.w1 == 0.25);
  CHECK(r.variance == doctest::Approx(r.second_moment - r.mean_diff * r.mean_diff).epsilon(1e-14));
  CHECK(sharpness_closed_form(1, 1 - 1e-12).w1 == doctest::Approx(1.0));
  for (int d : {1, 2, 3, 10})
    for (double e : {1e-3, 0.1, 0.5, 0.99}) CHECK(sharpness_closed_form(d, e).variance > 0);
  CHECK_THROWS_AS(sharpness_closed_form(0, 0.5), PreconditionError);
  CHECK_THROWS_AS(sharpness_closed_form(2, 0.0), PreconditionError);
  CHECK_THROWS_AS(sharpness_closed_form(2, 1.0), PreconditionError);
}

TEST_CASE("closed-form exponent in the small-eps regime") {
  const auto eps = log_spaced(1e-3, 1e-2, 6);
  for (int d : {2, 3, 10}) {
    PairList half, full;
    for (double e : eps) {
      auto r = sharpness_closed_form(d, e);
      half.emplace_back(r.w1, std::sqrt(r.variance));
      full.emplace_back(r.w1, r.variance);
    }
    CHECK(fit_loglog(half).slope == doctest::Approx(sharpness_exponent(d)).epsilon(1e-3));
    CHECK(fit_loglog(half).slope == doctest::Approx(sqrt_variance_slope(d, eps)).epsilon(1e-10));
    CHECK(fit_loglog(full).slope == doctest::Approx(2 * sharpness_exponent(d)).epsilon(1e-3));
  }
  CHECK(sharpness_exponent(3) == doctest::Approx(5.0 / 6));
  // the correction -eps^{2d+2}/(d+1)^2 bends the slope away from alpha_d at moderate eps
  CHECK(sqrt_variance_slope(2, {0.1, 0.2, 0.3, 0.4, 0.5}) == doctest::Approx(0.974867).epsilon(1e-5));
}

TEST_CASE("fit_loglog") {
  PairList sq, flat;
  for (double x : {0.1, 0.3, 1.0, 3.0, 10.0}) {
    sq.emplace_back(x, x * x);
    flat.emplace_back(x, 7.0);
  }
  auto f = fit_loglog(sq);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(0.0).scale(1));
  CHECK(fit_loglog(flat).slope == doctest::Approx(0.0).scale(1));

  sq.emplace_back(5.0, 0.0);
  sq.emplace_back(0.0, 1.0);
  auto g = fit_loglog(sq);
  CHECK(g.dropped == 2);
  CHECK(g.used == 5);
  CHECK(g.slope == doctest::Approx(2.0));
  CHECK_THROWS_AS(fit_loglog({{1, 1}, {2, 0}, {3, 9}}), FitError);
  CHECK_THROWS_AS(fit_loglog({{2, 1}, {2, 3}, {2, 9}}), FitError);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g0(0, 0.3);
  PairList noisy;
  Eigen::MatrixXd A(30, 2);
  Eigen::VectorXd b(30);
  for (int k = 0; k < 30; ++k) {
    double x = std::exp(0.2 * k - 3), y = 2 * std::pow(x, 1.3) * std::exp(g0(rng));
    noisy.emplace_back(x, y);
    A(k, 0) = 1;
    A(k, 1) = std::log(x);
    b[k] = std::log(y);
  }
  Eigen::Vector2d coef = A.colPivHouseholderQr().solve(b);
  auto h = fit_loglog(noisy);
  CHECK(h.slope == doctest::Approx(coef[1]).epsilon(1e-12));
  CHECK(h.intercept == doctest::Approx(coef[0]).epsilon(1e-12));
  CHECK(h.r_squared > 0);
  CHECK(h.r_squared < 1);
}

TEST_CASE("exponent_report decade bookkeeping") {
  // ratio y / w falls by 10x per decade: consistent with the envelope
  PairList falling{{1e-3, 1e-6}, {3e-3, 9e-6}, {1e-2, 1e-4}, {3e-2, 9e-4}, {0.1, 1e-2}};
  auto a = exponent_report(falling, 1.0);
  CHECK(a.valid);
  REQUIRE(a.decades.size() == 3);
  CHECK(a.decades[0].decade == -3);
  CHECK(a.decades[0].count == 2);
  CHECK(a.decades[2].decade == -1);
  CHECK(a.fit.slope == doctest::Approx(2.0));
  CHECK(a.max_ratio == doctest::Approx(0.1));
  CHECK(a.worst_rise == doctest::Approx(0.3));
  CHECK(a.spread == doctest::Approx(33.3333).epsilon(1e-4));
  CHECK(a.decade_stable);

  // ratio rising 10x toward small w1 trips the guard
  PairList rising{{1e-3, 1e-2}, {1e-2, 1e-2}, {0.1, 1e-2}};
  auto b = exponent_report(rising, 1.0);
  CHECK(b.worst_rise == doctest::Approx(10.0));
  CHECK_FALSE(b.decade_stable);

  auto c = exponent_report({{1e-2, 1e-3}, {2e-2, 2e-3}, {5e-2, 5e-3}}, 1.0);
  CHECK_FALSE(c.valid);
  CHECK(c.decade_stable);
  CHECK(exponent_report({{1.0, 1.0}, {64.0, 2.0}, {4096.0, 4.0}}, 1.0 / 6).max_ratio == doctest::Approx(1.0));
}

TEST_CASE("quasi-uniform point sets") {
  PointSet v = vogel_disk(500);
  CHECK(v.colwise().norm().maxCoeff() < 1);
  CHECK(v.rowwise().mean().norm() < 1e-2);
  PointSet f = fibonacci_sphere(400);
  CHECK((f.colwise().norm().array() - 1).abs().maxCoeff() < 1e-14);
  CHECK(f.rowwise().mean().norm() < 1e-2);
}

TEST_CASE("derivative checks meet the tolerance") {
  auto checks = derivative_checks(20, 19);
  REQUIRE(checks.size() == 20);
  for (const auto& c : checks) {
    CHECK(c.n <= 8);
    CHECK(c.m <= 8);
    CHECK(c.worst() <= 1e-5);
  }
}

TEST_CASE("strong concavity on weighted balls") {
  ConcavityConfig cfg;
  cfg.instances_per_family = 3;
  cfg.directions = 20;
  cfg.n_rho = 200;
  auto checks = strong_concavity_suite(cfg);
  REQUIRE(checks.size() == 9);
  for (const auto& c : checks) {
    CHECK(c.violations == 0);
    CHECK(c.support >= 1);
    CHECK(c.c0 >= 1);
    CHECK(c.worst_slack <= 1e-8);
  }
}

TEST_CASE("stability pairs: identical family gives zero discrepancies") {
  StabilityConfig cfg;
  cfg.n_rho = 60;
  cfg.grid_m = 40;
  cfg.n_pairs = 4;
  cfg.kappa = 0;
  for (const auto& p : stability_pairs(cfg)) {
    CHECK(p.w1 == doctest::Approx(0.0).scale(1e-12));
    CHECK(p.potential_variance == doctest::Approx(0.0).scale(1e-12));
    CHECK(p.map_discrepancy == 0.0);
  }
  CHECK_THROWS_AS(stability_batch(cfg), FitError);
  cfg.spec = torus(2);
  CHECK_THROWS_AS(stability_pairs(cfg), ConfigError);
}

TEST_CASE("small rotating-cap batch") {
  StabilityConfig cfg;
  cfg.n_rho = 200;
  cfg.grid_m = 120;
  cfg.n_pairs = 6;
  auto a = stability_batch(cfg);
  REQUIRE(a.pairs.size() == 6);
  for (std::size_t k = 1; k < a.pairs.size(); ++k) CHECK(a.pairs[k].w1 > a.pairs[k - 1].w1);
  CHECK(a.pairs.front().w1 == doctest::Approx(1e-3).epsilon(0.05));
  CHECK(a.pairs.back().w1 == doctest::Approx(1e-1).epsilon(0.05));
  CHECK(a.potentials.valid);
  CHECK(a.potentials.fit.slope >= 0.95);
  CHECK(std::isfinite(a.maps.max_ratio));
  auto b = stability_batch(cfg);
  for (std::size_t k = 0; k < a.pairs.size(); ++k) {
    CHECK(a.pairs[k].w1 == b.pairs[k].w1);
    CHECK(a.pairs[k].potential_variance == b.pairs[k].potential_variance);
    CHECK(a.pairs[k].map_discrepancy == b.pairs[k].map_discrepancy);
  }
}

TEST_CASE("sliding bump on the torus") {
  StabilityConfig cfg;
  cfg.spec = torus(2);
  cfg.family = TargetFamily::sliding_bump;
  cfg.kappa = 20;
  cfg.n_rho = 150;
  cfg.grid_m = 100;
  cfg.n_pairs = 5;
  auto r = stability_batch(cfg);
  CHECK(r.potentials.fit.slope > 0);
  CHECK(std::isfinite(r.potentials.max_ratio));
}

TEST_CASE("sharpness pipeline at low resolution") {
  SharpnessNumericConfig cfg;
  cfg.n_rho = 400;
  cfg.grid_m = 160;
  cfg.eps_values = {0.2, 0.35, 0.5};
  cfg.schedule = geometric_schedule(1.0, 4e-3, 0.5);
  auto r = sharpness_numeric(2, cfg);
  REQUIRE(r.rows.size() == 3);
  for (const auto& row : r.rows) {
    CHECK(row.w1 == doctest::Approx(row.w1_closed).epsilon(1e-9));
    MESSAGE("eps " << row.eps << " rel error " << row.rel_error);
    CHECK(std::abs(row.rel_error) < 0.2);
  }
  CHECK(r.report.fit.slope == doctest::Approx(r.closed_slope).epsilon(0.1));
  CHECK_THROWS_AS(sharpness_numeric(3, cfg), PreconditionError);
  cfg.eps_values = {0.2, 0.3};
  CHECK_THROWS_AS(sharpness_numeric(2, cfg), PreconditionError);
}
