#include "otstab/lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <string>

#include "otstab/errors.hpp"
#include "otstab/transport.hpp"

namespace otstab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
// calibrated endpoints land on the requested W1 only up to the last fixed-point step
constexpr double kDecadeSlack = 1e-3;

Eigen::VectorXd random_vector(long n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::VectorXd v(n);
  for (long i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

Eigen::VectorXd random_probability(long n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Eigen::VectorXd w(n);
  for (long i = 0; i < n; ++i) w[i] = u(rng);
  return w / w.sum();
}

double rel_error(double approx, double exact) { return std::abs(approx - exact) / std::max(std::abs(exact), 1e-12); }

// Increments psi^{c,eps}_{psi+hv}(x_i) - psi^{c,eps}_psi(x_i) evaluated around each row's dominant target, so that
// tiny Gibbs tails keep their relative precision: -h v_{j*} - eps log1p((S_h - S_0) / (1 + S_0)).
class RowIncrements {
 public:
  RowIncrements(const EntropicState<double>& s, const CostMatrix<double>& cost, const Eigen::VectorXd& v)
      : eps_(s.eps), v_(v), lead_(cost.rows()), s0_(cost.rows()), b_(cost.rows(), cost.cols()) {
    for (Eigen::Index i = 0; i < cost.rows(); ++i) {
      Eigen::ArrayXd a(cost.cols());
      for (Eigen::Index j = 0; j < cost.cols(); ++j)
        a[j] = s.sigma[j] > 0 ? (s.psi.values[j] - cost.entries()(i, j)) / eps_ + std::log(s.sigma[j]) : -kInf;
      a.maxCoeff(&lead_[i]);
      b_.row(i) = (a - a[lead_[i]]).transpose();
      double acc = 0;
      for (Eigen::Index j = 0; j < cost.cols(); ++j)
        if (j != lead_[i]) acc += std::exp(b_(i, j));
      s0_[i] = acc;
    }
  }

  double linear(Eigen::Index i) const { return -v_[lead_[i]]; }

  // The part of the increment beyond h * linear(i).
  double curved(Eigen::Index i, double h) const {
    double ds = 0;
    for (Eigen::Index j = 0; j < b_.cols(); ++j)
      if (j != lead_[i] && std::isfinite(b_(i, j))) ds += std::exp(b_(i, j)) * std::expm1(h * (v_[j] - v_[lead_[i]]) / eps_);
    return -eps_ * std::log1p(ds / (1 + s0_[i]));
  }

  double full(Eigen::Index i, double h) const { return h * linear(i) + curved(i, h); }

 private:
  double eps_;
  Eigen::VectorXd v_;
  std::vector<Eigen::Index> lead_;
  Eigen::VectorXd s0_;
  Eigen::MatrixXd b_;
};

// Richardson-extrapolated central differences of an increment function with f(0) = 0.
template <typename F>
double fd1(F f, double h) {
  auto D = [&](double k) { return (f(k) - f(-k)) / (2 * k); };
  return (4 * D(h / 2) - D(h)) / 3;
}

template <typename F>
double fd2(F f, double h) {
  auto D = [&](double k) { return (f(k) + f(-k)) / (k * k); };
  return (4 * D(h / 2) - D(h)) / 3;
}

Point family_center(const ManifoldSpec& spec) {
  Point c = Point::Zero(spec.ambient_dim());
  if (spec.family == Family::sphere) {
    c[spec.dim] = 1;
    if (spec.domain)
      if (auto cap = std::get_if<SphereCap>(&*spec.domain)) c = cap->pole;
    return c;
  }
  if (spec.family == Family::torus) return Point::Constant(spec.dim, 0.5);
  if (spec.domain)
    std::visit(
        [&](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, BallDomain>) c = d.center;
          else if constexpr (std::is_same_v<D, BoxDomain>) c = 0.5 * (d.lo + d.hi);
          else if constexpr (std::is_same_v<D, AnnulusSector>) {
            const double r = 0.5 * (d.r0 + d.r1), th = 0.5 * d.angle_deg * kPi / 180;
            c[0] = r * std::cos(th);
            c[1] = r * std::sin(th);
          }
        },
        *spec.domain);
  return c;
}

// Family center displaced by a geodesic of length t along a fixed tangent direction.
Point shifted_center(const ManifoldSpec& spec, const Point& c0, double t) {
  if (spec.family == Family::euclidean) {
    Point c = c0;
    c[0] += t;
    return c;
  }
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(spec.ambient_dim());
  dir[0] = 1;
  dir = project_tangent(spec, c0, dir);
  if (dir.norm() == 0) {
    dir.setZero();
    dir[1] = 1;
    dir = project_tangent(spec, c0, dir);
  }
  return exp_map(spec, c0, t * dir.normalized());
}

struct TargetGenerator {
  const StabilityConfig& cfg;
  DiscreteMeasure rho;
  PointSet grid;
  Point c0;

  DiscreteMeasure target(double shift) const {
    Point c = shifted_center(cfg.spec, c0, shift);
    Eigen::VectorXd w(grid.cols());
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      if (cfg.family == TargetFamily::rotating_cap) w[j] = std::exp(cfg.kappa * (grid.col(j).dot(c) - 1));
      else {
        double r = dist(cfg.spec, grid.col(j), c);
        w[j] = std::exp(-0.5 * cfg.kappa * r * r);
      }
    }
    return from_samples(cfg.spec, grid, w);
  }
};

}  // namespace

SharpnessRecord sharpness_closed_form(int d, double eps) {
  if (d < 1) throw PreconditionError("sharpness_closed_form: d must be >= 1");
  if (!(eps > 0 && eps < 1)) throw PreconditionError("sharpness_closed_form: eps must lie in (0, 1)");
  SharpnessRecord r;
  r.eps = eps;
  r.mean_diff = std::pow(eps, d + 1) / (d + 1);
  r.second_moment = 2 * std::pow(eps, d + 2) / ((d + 1.0) * (d + 2.0));
  // second_moment - mean_diff^2 with the eps^{d+2} factor pulled out
  r.variance = std::pow(eps, d + 2) * (2 / ((d + 1.0) * (d + 2.0)) - std::pow(eps, d) / ((d + 1.0) * (d + 1.0)));
  r.w1 = std::pow(eps, d);
  return r;
}

double sharpness_exponent(int d) {
  if (d < 1) throw PreconditionError("sharpness_exponent: d must be >= 1");
  return (d + 2.0) / (2.0 * d);
}

LogLogFit fit_loglog(const PairList& pairs) {
  LogLogFit fit;
  std::vector<double> lx, ly;
  for (auto [x, y] : pairs) {
    if (x > 0 && y > 0 && std::isfinite(x) && std::isfinite(y)) {
      lx.push_back(std::log(x));
      ly.push_back(std::log(y));
    } else {
      ++fit.dropped;
    }
  }
  fit.used = static_cast<int>(lx.size());
  if (fit.used < 3) throw FitError("fit_loglog: " + std::to_string(fit.used) + " usable pairs, need 3");
  Eigen::Map<const Eigen::VectorXd> X(lx.data(), fit.used), Y(ly.data(), fit.used);
  const double mx = X.mean(), my = Y.mean();
  const double sxx = (X.array() - mx).square().sum(), syy = (Y.array() - my).square().sum();
  const double sxy = ((X.array() - mx) * (Y.array() - my)).sum();
  if (!(sxx > 0)) throw FitError("fit_loglog: all abscissae are equal");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

ExponentReport exponent_report(PairList pairs, double envelope) {
  ExponentReport rep;
  rep.envelope = envelope;
  rep.fit = fit_loglog(pairs);
  double lo = kInf, hi = 0;
  std::map<int, DecadeBin> bins;
  for (auto [w, y] : pairs) {
    if (!(w > 0)) continue;
    lo = std::min(lo, w);
    hi = std::max(hi, w);
    double ratio = y / std::pow(w, envelope);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    int k = static_cast<int>(std::floor(std::log10(w)));
    DecadeBin& b = bins[k];
    b.decade = k;
    ++b.count;
    b.max_ratio = std::max(b.max_ratio, ratio);
  }
  rep.valid = hi > 0 && std::log10(hi / lo) >= 2 - kDecadeSlack;
  for (const auto& [k, b] : bins) rep.decades.push_back(b);
  double top = 0, bottom = kInf;
  for (std::size_t k = 0; k < rep.decades.size(); ++k) {
    double r = rep.decades[k].max_ratio;
    if (r > 0) top = std::max(top, r), bottom = std::min(bottom, r);
    if (k + 1 == rep.decades.size()) continue;
    double next = rep.decades[k + 1].max_ratio;
    if (next > 0) rep.worst_rise = std::max(rep.worst_rise, r / next);
    else if (r > 0) rep.worst_rise = kInf;
  }
  rep.spread = top > 0 ? top / bottom : 1.0;
  rep.decade_stable = rep.worst_rise < 10;
  rep.pairs = std::move(pairs);
  return rep;
}

PointSet vogel_disk(long n) {
  PointSet x(2, n);
  const double golden = kPi * (3 - std::sqrt(5.0));
  for (long i = 0; i < n; ++i) {
    double r = std::sqrt((i + 0.5) / n), t = static_cast<double>(i) * golden;
    x(0, i) = r * std::cos(t);
    x(1, i) = r * std::sin(t);
  }
  return x;
}

PointSet fibonacci_sphere(long n) {
  PointSet x(3, n);
  const double golden = kPi * (3 - std::sqrt(5.0));
  for (long j = 0; j < n; ++j) {
    double z = 1 - 2 * (j + 0.5) / n, r = std::sqrt(1 - z * z), t = static_cast<double>(j) * golden;
    x.col(j) << r * std::cos(t), r * std::sin(t), z;
  }
  return x;
}

SharpnessNumeric sharpness_numeric(int d, const SharpnessNumericConfig& cfg) {
  if (d != 2) throw PreconditionError("sharpness_numeric: only d = 2 is implemented");
  if (cfg.n_rho < 1 || cfg.n_rho > 10000) throw PreconditionError("sharpness_numeric: n_rho must lie in [1, 1e4]");
  if (cfg.grid_m < 3) throw PreconditionError("sharpness_numeric: grid_m must be >= 3");
  if (cfg.eps_values.size() < 3) throw PreconditionError("sharpness_numeric: need at least 3 eps values");
  const auto spec = parse_spec("ball:2:1.0");
  const long m = cfg.grid_m - 1;
  auto rho = from_samples(spec, vogel_disk(cfg.n_rho));
  PointSet y(2, m + 1);
  for (long j = 0; j < m; ++j) {
    double t = 2 * kPi * (j + 0.5) / m;
    y.col(j) << std::cos(t), std::sin(t);
  }
  y.col(m).setZero();
  auto mu = from_samples(spec, PointSet(y.leftCols(m)));
  auto cost_mu = quadratic_cost<double>(spec, rho.points(), mu.points());
  auto cost_nu = quadratic_cost<double>(spec, rho.points(), y);

  auto solve = [&](const DiscreteMeasure& target, const CostMatrix<double>& cost, double tag) {
    try {
      return potential_from_target(rho, target, cost, cfg.schedule, cfg.solver);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("sharpness eps " + std::to_string(tag) + ": " + e.what(), e.eps(), e.residual(), e.iterations());
    }
  };
  auto base = solve(mu, cost_mu, 0.0);
  const Eigen::VectorXd& phi_mu = cfg.smoothed ? base.smoothed.phi : base.potential.phi;

  SharpnessNumeric out;
  PairList numeric, closed;
  for (double eps : cfg.eps_values) {
    auto cf = sharpness_closed_form(d, eps);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(m + 1, (1 - cf.w1) / m);
    w[m] = cf.w1;
    auto nu = from_samples(spec, y, w);
    auto r = solve(nu, cost_nu, eps);
    SharpnessNumericRow row;
    row.eps = eps;
    row.w1 = wasserstein1(mu, nu);
    row.variance = potential_discrepancy(phi_mu, cfg.smoothed ? r.smoothed.phi : r.potential.phi, rho.weights());
    row.variance_closed = cf.variance;
    row.w1_closed = cf.w1;
    row.rel_error = row.variance / cf.variance - 1;
    for (const auto& l : r.solver.levels) row.iterations += l.iterations;
    row.residual = r.solver.levels.back().residual;
    out.rows.push_back(row);
    numeric.emplace_back(row.w1, row.variance);
    closed.emplace_back(cf.w1, cf.variance);
  }
  out.report = exponent_report(std::move(numeric), 1.0);
  out.closed_slope = fit_loglog(closed).slope;
  return out;
}

std::vector<StabilityPair> stability_pairs(const StabilityConfig& cfg) {
  if (cfg.n_pairs < 1) throw PreconditionError("stability_pairs: n_pairs must be positive");
  if (!(cfg.w1_lo > 0 && cfg.w1_hi > cfg.w1_lo)) throw PreconditionError("stability_pairs: need 0 < w1_lo < w1_hi");
  if (cfg.family == TargetFamily::rotating_cap && cfg.spec.family != Family::sphere)
    throw ConfigError("stability_pairs: the rotating-cap family needs a sphere");
  const bool lattice = cfg.spec.family == Family::sphere && cfg.spec.dim == 2 && !cfg.spec.domain;
  TargetGenerator fam{cfg, from_samples(cfg.spec, sample_uniform(cfg.spec, cfg.n_rho, cfg.seed)),
              lattice ? fibonacci_sphere(cfg.grid_m) : sample_uniform(cfg.spec, cfg.grid_m, cfg.seed + 1), family_center(cfg.spec)};
  const auto cost = quadratic_cost<double>(cfg.spec, fam.rho.points(), fam.grid);
  const DiscreteMeasure mu = fam.target(0.0);

  // shift -> W1 is close to linear at small shifts; one pilot and one fixed-point correction per endpoint
  auto w1_at = [&](double s) { return wasserstein1(mu, fam.target(s)); };
  double slope = w1_at(0.01) / 0.01;
  double s_lo = cfg.w1_lo, s_hi = cfg.w1_hi;
  if (slope > 0) {
    s_lo = cfg.w1_lo / slope;
    s_hi = cfg.w1_hi / slope;
    for (int it = 0; it < 3; ++it) {
      double a = w1_at(s_lo), b = w1_at(s_hi);
      if (a > 0) s_lo *= cfg.w1_lo / a;
      if (b > 0) s_hi *= cfg.w1_hi / b;
    }
  }

  auto base = potential_from_target(fam.rho, mu, cost, cfg.schedule, cfg.solver);
  std::vector<StabilityPair> out;
  for (int k = 0; k < cfg.n_pairs; ++k) {
    double f = cfg.n_pairs == 1 ? 0.0 : static_cast<double>(k) / (cfg.n_pairs - 1);
    StabilityPair p;
    p.index = k;
    p.shift = s_lo * std::pow(s_hi / s_lo, f);
    auto nu = fam.target(p.shift);
    p.w1 = wasserstein1(mu, nu);
    auto r = potential_from_target(fam.rho, nu, cost, cfg.schedule, cfg.solver);
    p.potential_variance = cfg.smoothed ? potential_discrepancy(base.smoothed.phi, r.smoothed.phi, fam.rho.weights())
                                        : potential_discrepancy(base.potential.phi, r.potential.phi, fam.rho.weights());
    p.map_discrepancy = map_discrepancy(base.assignment, r.assignment, fam.rho.weights(), fam.grid, cfg.spec);
    for (const auto& l : r.solver.levels) p.iterations += l.iterations;
    out.push_back(p);
  }
  return out;
}

StabilityResult stability_batch(const StabilityConfig& cfg) {
  StabilityResult res;
  res.pairs = stability_pairs(cfg);
  PairList pv, pm;
  for (const auto& p : res.pairs) {
    pv.emplace_back(p.w1, p.potential_variance);
    pm.emplace_back(p.w1, p.map_discrepancy);
  }
  res.potentials = exponent_report(std::move(pv), 1.0);
  res.maps = exponent_report(std::move(pm), 1.0 / 6.0);
  return res;
}

double DerivativeCheck::worst() const { return std::max({grad_K, hess_K, grad_I, hess_I}); }

std::vector<DerivativeCheck> derivative_checks(int instances, std::uint64_t seed) {
  const ManifoldSpec families[] = {sphere(2), torus(2), parse_spec("ball:2:1.0")};
  std::mt19937_64 rng(seed);
  std::vector<DerivativeCheck> out;
  for (int k = 0; k < instances; ++k) {
    DerivativeCheck c;
    c.instance = k;
    c.spec = families[k % 3];
    c.n = 2 + k % 7;
    c.m = 2 + (k * 3) % 7;
    c.eps = k % 2 ? 0.5 : 0.05;
    const std::uint64_t sx = rng(), sy = rng();
    auto cost = quadratic_cost<double>(c.spec, sample_uniform(c.spec, c.n, sx), sample_uniform(c.spec, c.m, sy));
    Eigen::VectorXd rho = random_probability(c.n, rng);
    Eigen::VectorXd psi = random_vector(c.m, rng, 0.3), v = random_vector(c.m, rng, 1.0);
    auto s = make_state<double>(c.eps, psi);
    const RowIncrements inc(s, cost, v);
    double slope = 0;
    for (int i = 0; i < c.n; ++i) slope += rho[i] * inc.linear(i);
    auto K_curved = [&](double h) {
      double acc = 0;
      for (int i = 0; i < c.n; ++i) acc += rho[i] * inc.curved(i, h);
      return acc;
    };
    auto K = [&](double h) { return h * slope + K_curved(h); };
    // I(psi + hv) - I(psi) = log1p(sum_i w_i expm1(increment_i)), w = rho exp(psi^{c,eps} - I)
    const Eigen::VectorXd w = (rho.array() * i_functional_eps(s, cost, rho).reweighting.array()).matrix();
    auto I = [&](double h) {
      double acc = 0;
      for (int i = 0; i < c.n; ++i) acc += w[i] * std::expm1(inc.full(i, h));
      return std::log1p(acc);
    };
    const double h = 0.02 * c.eps;
    c.grad_K = rel_error(fd1(K, h), kantorovich_gradient(s, cost, rho).dot(v));
    c.hess_K = rel_error(fd2(K_curved, h), kantorovich_hessian(s, cost, rho, v));
    c.grad_I = rel_error(fd1(I, h), i_functional_gradient(s, cost, rho, v));
    c.hess_I = rel_error(fd2(I, h), i_functional_hessian(s, cost, rho, v));
    out.push_back(c);
  }
  return out;
}

std::vector<ConcavityCheck> strong_concavity_suite(const ConcavityConfig& cfg) {
  const ManifoldSpec families[] = {parse_spec("ball:2:1.0"), sphere(2), torus(2)};
  std::mt19937_64 rng(cfg.seed);
  std::vector<ConcavityCheck> out;
  int instance = 0;
  for (const auto& spec : families) {
    const double radius = std::min(curvature_constants(spec).radius, cfg.max_radius);
    for (int k = 0; k < cfg.instances_per_family; ++k, ++instance) {
      auto rho = from_samples(spec, sample_uniform(spec, cfg.n_rho, rng()));
      auto wb = weighted_ball_measure(rho, 0, radius, weighted_ball_K(spec));
      auto ref = as_measure(rho, wb);
      const std::uint64_t sy = rng();
      auto cost = quadratic_cost<double>(spec, ref.points(), sample_uniform(spec, cfg.grid_m, sy));
      auto state = make_state<double>(cfg.eps, random_vector(cfg.grid_m, rng, cfg.psi_scale));
      ConcavityCheck c;
      c.instance = instance;
      c.spec = spec;
      c.support = ref.size();
      c.worst_slack = -kInf;
      for (int j = 0; j < cfg.directions; ++j) {
        auto sides = strong_concavity_sides(state, cost, ref.weights(), random_vector(cfg.grid_m, rng, 1.0));
        c.c0 = sides.c0;
        c.worst_slack = std::max(c.worst_slack, sides.hessian - sides.bound);
        ++c.directions;
        if (!sides.holds(1e-8)) ++c.violations;
      }
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace otstab
