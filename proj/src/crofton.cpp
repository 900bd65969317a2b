#include "otstab/crofton.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "otstab/errors.hpp"

namespace otstab {

namespace {

constexpr double kPi = std::numbers::pi;

void check_direction(const ManifoldSpec& spec, const PointRef& x, const PointRef& v) {
  validate_point(spec, x);
  if (v.size() != x.size()) throw DomainError("direction length mismatch");
  if (std::abs(v.norm() - 1.0) > 1e-10) throw DomainError("direction must be a unit vector");
  if (spec.family == Family::sphere && std::abs(v.dot(x)) > 1e-10) throw DomainError("direction must be tangent to the sphere");
}

void check_horizon(const ManifoldSpec& spec, double T) {
  if (!(T > 0)) throw PreconditionError("horizon T must be positive");
  if (!(T < injectivity_radius(spec))) throw PreconditionError("horizon T must be below the injectivity radius");
}

// Writes b_t(x, v) into out without allocating.
void flow_point(const ManifoldSpec& spec, const PointRef& x, const PointRef& v, double t, Eigen::VectorXd& out) {
  switch (spec.family) {
    case Family::euclidean:
      out = x + t * v;
      return;
    case Family::sphere:
      out = std::cos(t) * x + std::sin(t) * v;
      return;
    case Family::torus:
      out = x + t * v;
      for (Eigen::Index k = 0; k < out.size(); ++k) {
        out[k] -= std::floor(out[k]);
        if (out[k] >= 1.0) out[k] = 0.0;
      }
      return;
  }
}

double sphere_area(int d) { return 2 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d); }

}  // namespace

FlowState geodesic_flow(const ManifoldSpec& spec, const PointRef& x, const PointRef& v, double t) {
  check_direction(spec, x, v);
  FlowState s;
  flow_point(spec, x, v, t, s.x);
  s.v = spec.family == Family::sphere ? Eigen::VectorXd(-std::sin(t) * x + std::cos(t) * v) : Eigen::VectorXd(v);
  return s;
}

FlowSample flow_crossings(const ManifoldSpec& spec, const PointRef& x, const PointRef& v, double T, double solver_tol) {
  check_direction(spec, x, v);
  check_horizon(spec, T);
  if (!(solver_tol > 0)) throw PreconditionError("solver_tol must be positive");
  FlowSample out;
  out.x = x;
  out.v = v;
  out.T = T;
  if (!spec.domain) {
    out.interval_count = 1;
    return out;
  }
  Eigen::VectorXd b(x.size());
  auto in = [&](double t) {
    flow_point(spec, x, v, t, b);
    return inside(spec, b);
  };
  auto signed_dist = [&](double t) {
    flow_point(spec, x, v, t, b);
    return signed_boundary_distance(spec, b);
  };
  const double step = T / kCrossingScan;
  bool prev = in(0.0);
  out.interval_count = prev ? 1 : 0;
  for (int k = 1; k <= kCrossingScan; ++k) {
    double hi = k == kCrossingScan ? T : k * step;
    bool cur = in(hi);
    if (cur == prev) continue;
    double lo = (k - 1) * step;
    for (int it = 0; hi - lo > solver_tol; ++it) {
      if (it > 200) throw ConvergenceError("flow_crossings: bisection stalled in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]",
                                           0.0, hi - lo, it);
      double mid = 0.5 * (lo + hi);
      if (in(mid) == prev) lo = mid;
      else hi = mid;
    }
    double root = 0.5 * (lo + hi);
    double h = std::min({1e-6, root, T - root});
    double slope = h > 0 ? (signed_dist(root + h) - signed_dist(root - h)) / (2 * h) : 1.0;
    if (std::abs(slope) < solver_tol) out.grazes.push_back(root);
    else out.crossing_params.push_back(root);
    if (cur) ++out.interval_count;
    prev = cur;
  }
  return out;
}

double direction_sphere_area(int d) {
  if (d < 1) throw PreconditionError("direction sphere needs d >= 1");
  return sphere_area(d);
}

Slab sampling_slab(const ManifoldSpec& spec, double T) {
  if (!(T > 0)) throw PreconditionError("horizon T must be positive");
  if (!spec.bounded()) throw DomainError("sampling slab needs a bounded domain");
  if (!spec.domain) return {spec, domain_volume(spec)};
  const int d = spec.dim;
  ManifoldSpec region = std::visit(
      [&](const auto& dom) -> ManifoldSpec {
        using D = std::decay_t<decltype(dom)>;
        if constexpr (std::is_same_v<D, BallDomain>) {
          Eigen::VectorXd r = Eigen::VectorXd::Constant(d, dom.radius + T);
          return euclidean(d, BoxDomain{dom.center - r, dom.center + r});
        } else if constexpr (std::is_same_v<D, BoxDomain>) {
          Eigen::VectorXd t = Eigen::VectorXd::Constant(d, T);
          return euclidean(d, BoxDomain{dom.lo - t, dom.hi + t});
        } else if constexpr (std::is_same_v<D, AnnulusSector>) {
          Eigen::VectorXd r = Eigen::VectorXd::Constant(2, dom.r1 + T);
          return euclidean(2, BoxDomain{-r, r});
        } else {
          if (dom.angle + T >= kPi) return sphere(d);
          ManifoldSpec s = sphere(d);
          s.domain = SphereCap{dom.pole, dom.angle + T};
          return s;
        }
      },
      *spec.domain);
  return {region, domain_volume(region)};
}

CrossingEstimate estimate_crossing_integral(const ManifoldSpec& spec, double T, long n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw PreconditionError("estimate_crossing_integral: zero samples");
  check_horizon(spec, T);
  Slab slab = sampling_slab(spec, T);
  CrossingEstimate est;
  est.T = T;
  est.n = n_samples;
  if (!spec.domain) {
    est.accepted = n_samples;
    return est;
  }
  UniformSampler sampler(slab.region, seed);
  // integer accumulators keep the sums exact regardless of how samples are partitioned
  long sum = 0, sum_sq = 0, accepted = 0;
  for (long k = 0; k < n_samples; ++k) {
    Point x = sampler.draw();
    Eigen::VectorXd v = sampler.unit_direction(x);
    if (signed_boundary_distance(spec, x) < -T) continue;
    ++accepted;
    long c = static_cast<long>(flow_crossings(spec, x, v, T).crossing_params.size());
    sum += c;
    sum_sq += c * c;
  }
  est.accepted = accepted;
  const double scale = slab.volume * direction_sphere_area(spec.dim);
  if (accepted > 0) {
    est.mean = static_cast<double>(sum) / accepted;
    double var = accepted > 1 ? (sum_sq - accepted * est.mean * est.mean) / (accepted - 1) : 0.0;
    est.std_error = std::sqrt(std::max(var, 0.0) / accepted);
  }
  const double n = static_cast<double>(n_samples);
  double mean_all = sum / n;
  double var_all = n_samples > 1 ? (sum_sq - n * mean_all * mean_all) / (n - 1) : 0.0;
  est.unnormalized = mean_all * scale;
  est.unnormalized_std_error = scale * std::sqrt(std::max(var_all, 0.0) / n);
  return est;
}

ZetaEstimate zeta_diameter_bound(const ManifoldSpec& spec, const PointRef& center, double radius, double T, long n_samples,
                                 std::uint64_t seed) {
  if (n_samples < 1) throw PreconditionError("zeta_diameter_bound: zero samples");
  validate_point(spec, center);
  check_horizon(spec, T);
  if (!(radius > 0) || !(2 * radius < T)) throw PreconditionError("zeta_diameter_bound: need 0 < diam(S) < T");
  const int d = spec.dim;
  ManifoldSpec region;
  switch (spec.family) {
    case Family::euclidean: region = euclidean(d, BallDomain{center, radius + T}); break;
    case Family::sphere:
      region = sphere(d);
      if (radius + T < kPi) region.domain = SphereCap{center, radius + T};
      break;
    case Family::torus: region = torus(d); break;
  }
  const double volume = domain_volume(region);

  auto hits_segment = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& v, const Eigen::VectorXd& c) {
    double t = std::clamp((c - x).dot(v), 0.0, T);
    return (x + t * v - c).norm() <= radius;
  };
  auto hits = [&](const Point& x, const Eigen::VectorXd& v) {
    switch (spec.family) {
      case Family::euclidean: return hits_segment(x, v, center);
      case Family::sphere: {
        double a = x.dot(center), b = v.dot(center);
        double best = std::max(a, std::cos(T) * a + std::sin(T) * b);
        double ts = std::atan2(b, a);
        if (ts < 0) ts += 2 * kPi;
        if (ts <= T) best = std::max(best, std::hypot(a, b));
        return best >= std::cos(radius);
      }
      case Family::torus: {
        Eigen::VectorXi shift = Eigen::VectorXi::Constant(d, -1);
        for (;;) {
          if (hits_segment(x, v, center + shift.cast<double>())) return true;
          int k = 0;
          while (k < d && shift[k] == 1) shift[k++] = -1;
          if (k == d) return false;
          ++shift[k];
        }
      }
    }
    return false;
  };

  UniformSampler sampler(region, seed);
  long count = 0;
  for (long k = 0; k < n_samples; ++k) {
    Point x = sampler.draw();
    if (hits(x, sampler.unit_direction(x))) ++count;
  }
  const double p = static_cast<double>(count) / n_samples;
  const double scale = volume * direction_sphere_area(d);
  ZetaEstimate z;
  z.zeta_hat = p * scale;
  z.std_error = scale * std::sqrt(p * (1 - p) / n_samples);
  z.bound_ratio = z.zeta_hat / std::pow(2 * radius, d - 1);
  return z;
}

ReversePoincare reverse_poincare_1d(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& grid) {
  const Eigen::Index n = grid.size();
  if (n < 2 || u.size() != n || v.size() != n) throw PreconditionError("reverse_poincare_1d: need matching arrays of length >= 2");
  Eigen::VectorXd h = grid.tail(n - 1) - grid.head(n - 1);
  if ((h.array() <= 0).any()) throw PreconditionError("reverse_poincare_1d: grid must be strictly increasing");
  Eigen::VectorXd du = (u.tail(n - 1) - u.head(n - 1)).cwiseQuotient(h);
  Eigen::VectorXd dv = (v.tail(n - 1) - v.head(n - 1)).cwiseQuotient(h);
  for (Eigen::Index k = 1; k + 1 < n; ++k) {
    double w = 0.5 * (h[k - 1] + h[k]);
    if ((du[k] - du[k - 1]) * w < -1e-9) throw PreconditionError("reverse_poincare_1d: u is not convex at index " + std::to_string(k));
    if ((dv[k] - dv[k - 1]) * w < -1e-9) throw PreconditionError("reverse_poincare_1d: v is not convex at index " + std::to_string(k));
  }
  ReversePoincare r;
  r.lhs = h.dot((du - dv).cwiseAbs2());
  Eigen::VectorXd diff2 = (u - v).cwiseAbs2();
  double l2sq = 0.5 * h.dot(diff2.head(n - 1) + diff2.tail(n - 1));
  double sup = du.cwiseAbs().maxCoeff() + dv.cwiseAbs().maxCoeff();
  r.rhs = 8 * std::pow(sup, 4.0 / 3.0) * std::pow(l2sq, 1.0 / 3.0);
  r.holds = r.lhs <= r.rhs * (1 + 1e-6) + 1e-9;
  return r;
}

ConvexTrace geodesic_trace(const ManifoldSpec& spec, const PointSet& targets, const Eigen::VectorXd& psi, const PointRef& x,
                           const PointRef& v, double T, int n_grid) {
  check_direction(spec, x, v);
  check_horizon(spec, T);
  validate_points(spec, targets);
  if (targets.cols() == 0 || psi.size() != targets.cols()) throw PreconditionError("geodesic_trace: psi must match the targets");
  if (n_grid < 3) throw PreconditionError("geodesic_trace: need at least 3 grid points");
  const double inj = injectivity_radius(spec);
  ConvexTrace tr;
  tr.grid = Eigen::VectorXd::LinSpaced(n_grid, 0.0, T);
  tr.u.resize(n_grid);
  Eigen::VectorXd b(x.size());
  for (int k = 0; k < n_grid; ++k) {
    flow_point(spec, x, v, tr.grid[k], b);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < targets.cols(); ++j) {
      bool cut = false;
      double dj = dist(spec, b, targets.col(j));
      if (spec.family == Family::sphere) cut = dj >= inj - 1e-9;
      else if (spec.family == Family::torus) cut = log_map(spec, b, targets.col(j)).cwiseAbs().maxCoeff() >= 0.5 - 1e-12;
      if (cut) throw CutLocusError("geodesic_trace: trace point " + std::to_string(k) + " is on the cut locus of target " + std::to_string(j));
      best = std::min(best, 0.5 * dj * dj - psi[j]);
    }
    tr.u[k] = best;
  }
  const double h = T / (n_grid - 1);
  double worst = 0;
  for (int k = 1; k + 1 < n_grid; ++k) worst = std::max(worst, tr.u[k - 1] - 2 * tr.u[k] + tr.u[k + 1] - 1e-9);
  tr.zeta = worst / (2 * h * h);
  for (int k = 0; k + 1 < n_grid; ++k) tr.modulus = std::max(tr.modulus, std::abs(tr.u[k + 1] - tr.u[k]) / h);
  double diam = 0;
  for (Eigen::Index i = 0; i < targets.cols(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) diam = std::max(diam, dist(spec, targets.col(i), targets.col(j)));
  tr.modulus_bound = diam + 2 * tr.zeta * T;
  tr.modulus_ok = tr.modulus <= tr.modulus_bound + 1e-9;
  return tr;
}

}  // namespace otstab
