#include "otstab/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

namespace otstab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw ConfigError("not a number: '" + s + "'");
  return v;
}

int parse_dim(const std::string& s) {
  double v = parse_double(s);
  if (v < 1 || v != std::floor(v)) throw ConfigError("bad dimension: '" + s + "'");
  return static_cast<int>(v);
}

Eigen::VectorXd parse_vector(const std::string& s, int d) {
  auto parts = split(s, ',');
  if (static_cast<int>(parts.size()) != d) throw ConfigError("expected " + std::to_string(d) + " coordinates in '" + s + "'");
  Eigen::VectorXd v(d);
  for (int k = 0; k < d; ++k) v[k] = parse_double(parts[k]);
  return v;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) out += ",";
    out += fmt(v[k]);
  }
  return out;
}

// Torus displacement wrapped into (-1/2, 1/2]; ties go to +1/2.
double wrap_half(double delta) { return delta - std::ceil(delta - 0.5); }

double wrap_unit(double x) {
  double y = x - std::floor(x);
  return y >= 1.0 ? 0.0 : y;
}

double sphere_sin_angle(const PointRef& x, const PointRef& y) {
  if (x.size() == 3) {
    Eigen::Vector3d a = x.head<3>(), b = y.head<3>();
    return a.cross(b).norm();
  }
  return std::abs(x[0] * y[1] - x[1] * y[0]);
}

double unit_ball_volume(int d) { return std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0 + 1.0); }

double polar_angle(const PointRef& x) {
  double a = std::atan2(x[1], x[0]);
  return a < 0 ? a + 2 * kPi : a;
}

double dist_to_segment(const PointRef& x, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  Eigen::Vector2d p = x.head<2>();
  Eigen::Vector2d ab = b - a;
  double s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - a - s * ab).norm();
}

double dist_to_arc(const PointRef& x, double r, double sweep) {
  double rho = x.head<2>().norm();
  if (rho > 0 && polar_angle(x) <= sweep) return std::abs(rho - r);
  Eigen::Vector2d e0(r, 0.0), e1(r * std::cos(sweep), r * std::sin(sweep));
  return std::min((x.head<2>() - e0).norm(), (x.head<2>() - e1).norm());
}

double annulus_boundary_distance(const AnnulusSector& a, const PointRef& x) {
  double sweep = a.angle_deg * kPi / 180.0;
  Eigen::Vector2d u0(1.0, 0.0), u1(std::cos(sweep), std::sin(sweep));
  double d = std::min(dist_to_arc(x, a.r0, sweep), dist_to_arc(x, a.r1, sweep));
  d = std::min(d, dist_to_segment(x, a.r0 * u0, a.r1 * u0));
  d = std::min(d, dist_to_segment(x, a.r0 * u1, a.r1 * u1));
  return d;
}

bool annulus_inside(const AnnulusSector& a, const PointRef& x) {
  double rho = x.head<2>().norm();
  if (rho < a.r0 || rho > a.r1) return false;
  return polar_angle(x) <= a.angle_deg * kPi / 180.0;
}

// Rotation-free map taking e_last to pole (Householder reflection).
Eigen::VectorXd reflect_from_last_axis(const Eigen::VectorXd& z, const Eigen::VectorXd& pole) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(pole.size());
  e[pole.size() - 1] = 1.0;
  Eigen::VectorXd w = e - pole;
  double n2 = w.squaredNorm();
  if (n2 < 1e-30) return z;
  return z - 2.0 * w * (w.dot(z) / n2);
}

void check_domain(const ManifoldSpec& spec) {
  if (!spec.domain) return;
  std::visit(
      [&](const auto& dom) {
        using T = std::decay_t<decltype(dom)>;
        if constexpr (std::is_same_v<T, SphereCap>) {
          if (spec.family != Family::sphere) throw ConfigError("cap domain requires a sphere");
          if (dom.pole.size() != spec.ambient_dim()) throw ConfigError("cap pole has wrong length");
          if (!(dom.angle > 0 && dom.angle < kPi)) throw ConfigError("cap angle must lie in (0, pi)");
        } else {
          if (spec.family != Family::euclidean) throw ConfigError("planar domains require a euclidean spec");
          if constexpr (std::is_same_v<T, BallDomain>) {
            if (dom.center.size() != spec.dim || !(dom.radius > 0)) throw ConfigError("bad ball domain");
          } else if constexpr (std::is_same_v<T, BoxDomain>) {
            if (dom.lo.size() != spec.dim || dom.hi.size() != spec.dim || !(dom.lo.array() < dom.hi.array()).all())
              throw ConfigError("bad box domain");
          } else {
            if (spec.dim != 2) throw ConfigError("annulus sector is planar");
            if (!(dom.r0 > 0 && dom.r0 < dom.r1 && dom.angle_deg > 0 && dom.angle_deg <= 360))
              throw ConfigError("bad annulus sector");
          }
        }
      },
      *spec.domain);
}

}  // namespace

ManifoldSpec sphere(int d) {
  if (d != 1 && d != 2) throw ConfigError("sphere supported for d in {1,2}");
  return ManifoldSpec{Family::sphere, d, std::nullopt};
}

ManifoldSpec torus(int d) {
  if (d < 1) throw ConfigError("torus dimension must be positive");
  return ManifoldSpec{Family::torus, d, std::nullopt};
}

ManifoldSpec euclidean(int d) {
  if (d < 1 || d > 4) throw ConfigError("euclidean dimension must lie in [1,4]");
  return ManifoldSpec{Family::euclidean, d, std::nullopt};
}

ManifoldSpec euclidean(int d, DomainDescriptor domain) {
  ManifoldSpec s = euclidean(d);
  s.domain = std::move(domain);
  check_domain(s);
  return s;
}

ManifoldSpec parse_spec(const std::string& text) {
  auto parts = split(text, ':');
  if (parts.size() < 2) throw ConfigError("bad manifold spec '" + text + "'");
  const std::string& kind = parts[0];
  int d = parse_dim(parts[1]);
  auto need = [&](std::size_t n) {
    if (parts.size() != n) throw ConfigError("bad manifold spec '" + text + "'");
  };
  if (kind == "sphere") {
    need(2);
    return sphere(d);
  }
  if (kind == "torus") {
    need(2);
    return torus(d);
  }
  if (kind == "euclidean") {
    need(2);
    return euclidean(d);
  }
  if (kind == "ball") {
    need(3);
    return euclidean(d, BallDomain{Eigen::VectorXd::Zero(d), parse_double(parts[2])});
  }
  if (kind == "box") {
    need(4);
    return euclidean(d, BoxDomain{parse_vector(parts[2], d), parse_vector(parts[3], d)});
  }
  if (kind == "annulus") {
    need(5);
    return euclidean(d, AnnulusSector{parse_double(parts[2]), parse_double(parts[3]), parse_double(parts[4])});
  }
  if (kind == "cap") {
    need(3);
    ManifoldSpec s = sphere(d);
    Eigen::VectorXd pole = Eigen::VectorXd::Zero(d + 1);
    pole[d] = 1.0;
    s.domain = SphereCap{pole, parse_double(parts[2])};
    check_domain(s);
    return s;
  }
  throw ConfigError("unknown manifold kind '" + kind + "'");
}

std::string to_string(const ManifoldSpec& spec) {
  std::string d = std::to_string(spec.dim);
  if (!spec.domain) {
    switch (spec.family) {
      case Family::sphere: return "sphere:" + d;
      case Family::torus: return "torus:" + d;
      case Family::euclidean: return "euclidean:" + d;
    }
  }
  return std::visit(
      [&](const auto& dom) -> std::string {
        using T = std::decay_t<decltype(dom)>;
        if constexpr (std::is_same_v<T, BallDomain>) return "ball:" + d + ":" + fmt(dom.radius);
        else if constexpr (std::is_same_v<T, BoxDomain>) return "box:" + d + ":" + fmt_vector(dom.lo) + ":" + fmt_vector(dom.hi);
        else if constexpr (std::is_same_v<T, AnnulusSector>)
          return "annulus:" + d + ":" + fmt(dom.r0) + ":" + fmt(dom.r1) + ":" + fmt(dom.angle_deg);
        else return "cap:" + d + ":" + fmt(dom.angle);
      },
      *spec.domain);
}

bool same_manifold(const ManifoldSpec& a, const ManifoldSpec& b) { return a.family == b.family && a.dim == b.dim; }

void validate_point(const ManifoldSpec& spec, const PointRef& x) {
  if (x.size() != spec.ambient_dim())
    throw DomainError("point has " + std::to_string(x.size()) + " coordinates, expected " + std::to_string(spec.ambient_dim()));
  if (!x.allFinite()) throw DomainError("point has non-finite coordinates");
  if (spec.family == Family::sphere && std::abs(x.norm() - 1.0) > 1e-12) throw DomainError("sphere point is not unit length");
  if (spec.family == Family::torus && ((x.array() < 0.0).any() || (x.array() >= 1.0).any()))
    throw DomainError("torus coordinates must lie in [0,1)");
}

void validate_points(const ManifoldSpec& spec, const PointSet& xs) {
  for (Eigen::Index i = 0; i < xs.cols(); ++i) validate_point(spec, xs.col(i));
}

double dist(const ManifoldSpec& spec, const PointRef& x, const PointRef& y) {
  validate_point(spec, x);
  validate_point(spec, y);
  switch (spec.family) {
    case Family::sphere: return std::atan2(sphere_sin_angle(x, y), x.dot(y));
    case Family::torus: {
      double s = 0.0;
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        double w = wrap_half(y[k] - x[k]);
        s += w * w;
      }
      return std::sqrt(s);
    }
    case Family::euclidean: return (x - y).norm();
  }
  return 0.0;
}

Point exp_map(const ManifoldSpec& spec, const PointRef& x, const PointRef& v) {
  if (v.size() != x.size()) throw DomainError("tangent vector length mismatch");
  switch (spec.family) {
    case Family::sphere: {
      if (std::abs(v.dot(x)) > 1e-10) throw DomainError("tangent vector not orthogonal to its base point");
      double t = v.norm();
      if (t == 0.0) return x;
      Point y = std::cos(t) * x + (std::sin(t) / t) * v;
      return y / y.norm();
    }
    case Family::torus: {
      Point y(x.size());
      for (Eigen::Index k = 0; k < x.size(); ++k) y[k] = wrap_unit(x[k] + v[k]);
      return y;
    }
    case Family::euclidean: return x + v;
  }
  return x;
}

Eigen::VectorXd log_map(const ManifoldSpec& spec, const PointRef& x, const PointRef& y) {
  switch (spec.family) {
    case Family::sphere: {
      double d = dist(spec, x, y);
      if (d >= kPi - 1e-12) throw CutLocusError("log_map: points are antipodal");
      Eigen::VectorXd u = y - x.dot(y) * x;
      double n = u.norm();
      if (d == 0.0 || n == 0.0) return Eigen::VectorXd::Zero(x.size());
      return (d / n) * u;
    }
    case Family::torus: {
      Eigen::VectorXd w(x.size());
      for (Eigen::Index k = 0; k < x.size(); ++k) w[k] = wrap_half(y[k] - x[k]);
      return w;
    }
    case Family::euclidean: return y - x;
  }
  return Eigen::VectorXd::Zero(x.size());
}

Point geodesic_point(const ManifoldSpec& spec, const PointRef& x, const PointRef& y, double t) {
  if (t == 0.0) return x;
  if (t == 1.0) return y;
  Eigen::VectorXd v = log_map(spec, x, y);
  return exp_map(spec, x, t * v);
}

double injectivity_radius(const ManifoldSpec& spec) {
  switch (spec.family) {
    case Family::sphere: return kPi;
    case Family::torus: return 0.5;
    case Family::euclidean: return kInf;
  }
  return kInf;
}

Eigen::VectorXd project_tangent(const ManifoldSpec& spec, const PointRef& x, const PointRef& v) {
  if (spec.family != Family::sphere) return v;
  return v - v.dot(x) * x;
}

UniformSampler::UniformSampler(ManifoldSpec spec, std::uint64_t seed) : spec_(std::move(spec)), rng_(seed) {
  if (!spec_.bounded()) throw DomainError("cannot sample uniformly from an unbounded euclidean spec");
  check_domain(spec_);
}

double UniformSampler::uniform01() {
  double u = unif_(rng_);
  return u >= 1.0 ? 0.0 : u;
}

Eigen::VectorXd UniformSampler::gaussian(int n) {
  Eigen::VectorXd g(n);
  for (int k = 0; k < n; ++k) g[k] = normal_(rng_);
  return g;
}

Eigen::VectorXd UniformSampler::unit_direction(const PointRef& x) {
  for (;;) {
    Eigen::VectorXd g = project_tangent(spec_, x, gaussian(static_cast<int>(x.size())));
    double n = g.norm();
    if (n > 1e-12) return g / n;
  }
}

Point UniformSampler::draw() {
  const int d = spec_.dim;
  auto on_sphere = [&]() {
    for (;;) {
      Eigen::VectorXd g = gaussian(d + 1);
      double n = g.norm();
      if (n > 1e-12) return Eigen::VectorXd(g / n);
    }
  };
  if (!spec_.domain) {
    if (spec_.family == Family::sphere) return on_sphere();
    Point x(d);
    for (int k = 0; k < d; ++k) x[k] = uniform01();
    return x;
  }
  return std::visit(
      [&](const auto& dom) -> Point {
        using T = std::decay_t<decltype(dom)>;
        if constexpr (std::is_same_v<T, BallDomain>) {
          Eigen::VectorXd g;
          do g = gaussian(d);
          while (g.norm() < 1e-12);
          double r = dom.radius * std::pow(uniform01(), 1.0 / d);
          return dom.center + r * g / g.norm();
        } else if constexpr (std::is_same_v<T, BoxDomain>) {
          Point x(d);
          for (int k = 0; k < d; ++k) x[k] = dom.lo[k] + (dom.hi[k] - dom.lo[k]) * uniform01();
          return x;
        } else if constexpr (std::is_same_v<T, AnnulusSector>) {
          for (;;) {
            Point x(2);
            x[0] = dom.r1 * (2.0 * uniform01() - 1.0);
            x[1] = dom.r1 * (2.0 * uniform01() - 1.0);
            if (annulus_inside(dom, x)) return x;
          }
        } else {
          Eigen::VectorXd z(d + 1);
          if (d == 1) {
            double a = dom.angle * (2.0 * uniform01() - 1.0);
            z << std::sin(a), std::cos(a);
          } else {
            double h = std::cos(dom.angle) + (1.0 - std::cos(dom.angle)) * uniform01();
            double az = 2.0 * kPi * uniform01();
            double s = std::sqrt(std::max(0.0, 1.0 - h * h));
            z << s * std::cos(az), s * std::sin(az), h;
          }
          z = reflect_from_last_axis(z, dom.pole);
          return z / z.norm();
        }
      },
      *spec_.domain);
}

PointSet sample_uniform(const ManifoldSpec& spec, long n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("sample_uniform: n must be positive");
  UniformSampler sampler(spec, seed);
  PointSet out(spec.ambient_dim(), n);
  for (long i = 0; i < n; ++i) out.col(i) = sampler.draw();
  return out;
}

bool inside(const ManifoldSpec& spec, const PointRef& x) {
  if (!spec.domain) return true;
  return std::visit(
      [&](const auto& dom) -> bool {
        using T = std::decay_t<decltype(dom)>;
        if constexpr (std::is_same_v<T, BallDomain>) return (x - dom.center).norm() <= dom.radius;
        else if constexpr (std::is_same_v<T, BoxDomain>)
          return (x.array() >= dom.lo.array()).all() && (x.array() <= dom.hi.array()).all();
        else if constexpr (std::is_same_v<T, AnnulusSector>) return annulus_inside(dom, x);
        else return dist(spec, x, dom.pole) <= dom.angle;
      },
      *spec.domain);
}

double boundary_distance(const ManifoldSpec& spec, const PointRef& x) {
  if (!spec.domain) return kInf;
  return std::visit(
      [&](const auto& dom) -> double {
        using T = std::decay_t<decltype(dom)>;
        if constexpr (std::is_same_v<T, BallDomain>) return std::abs(dom.radius - (x - dom.center).norm());
        else if constexpr (std::is_same_v<T, BoxDomain>) {
          Eigen::ArrayXd below = dom.lo.array() - x.array();
          Eigen::ArrayXd above = x.array() - dom.hi.array();
          Eigen::ArrayXd out = below.max(above).max(0.0);
          if ((out > 0.0).any()) return out.matrix().norm();
          return (-below).min(-above).minCoeff();
        } else if constexpr (std::is_same_v<T, AnnulusSector>) return annulus_boundary_distance(dom, x);
        else return std::abs(dist(spec, x, dom.pole) - dom.angle);
      },
      *spec.domain);
}

double signed_boundary_distance(const ManifoldSpec& spec, const PointRef& x) {
  double d = boundary_distance(spec, x);
  return inside(spec, x) ? d : -d;
}

double domain_volume(const ManifoldSpec& spec) {
  if (!spec.domain) {
    switch (spec.family) {
      case Family::sphere: return spec.dim == 1 ? 2 * kPi : 4 * kPi;
      case Family::torus: return 1.0;
      case Family::euclidean: return kInf;
    }
  }
  return std::visit(
      [&](const auto& dom) -> double {
        using T = std::decay_t<decltype(dom)>;
        if constexpr (std::is_same_v<T, BallDomain>) return unit_ball_volume(spec.dim) * std::pow(dom.radius, spec.dim);
        else if constexpr (std::is_same_v<T, BoxDomain>) return (dom.hi - dom.lo).prod();
        else if constexpr (std::is_same_v<T, AnnulusSector>)
          return 0.5 * dom.angle_deg * kPi / 180.0 * (dom.r1 * dom.r1 - dom.r0 * dom.r0);
        else return spec.dim == 1 ? 2 * dom.angle : 2 * kPi * (1 - std::cos(dom.angle));
      },
      *spec.domain);
}

double boundary_measure(const ManifoldSpec& spec) {
  if (!spec.domain) return 0.0;
  return std::visit(
      [&](const auto& dom) -> double {
        using T = std::decay_t<decltype(dom)>;
        const int d = spec.dim;
        if constexpr (std::is_same_v<T, BallDomain>) return d * unit_ball_volume(d) * std::pow(dom.radius, d - 1);
        else if constexpr (std::is_same_v<T, BoxDomain>) {
          Eigen::VectorXd w = dom.hi - dom.lo;
          double s = 0.0;
          for (int k = 0; k < d; ++k) s += 2.0 * w.prod() / w[k];
          return s;
        } else if constexpr (std::is_same_v<T, AnnulusSector>) {
          double sweep = dom.angle_deg * kPi / 180.0;
          return sweep * (dom.r0 + dom.r1) + 2 * (dom.r1 - dom.r0);
        } else return d == 1 ? 2.0 : 2 * kPi * std::sin(dom.angle);
      },
      *spec.domain);
}

CurvatureConstants curvature_constants(const ManifoldSpec& spec) {
  switch (spec.family) {
    case Family::sphere: return {4.0, 0.5, kPi / 4};
    case Family::torus: return {4.0, 1.0, 0.125};
    case Family::euclidean: return {2.0, 2.0, kInf};
  }
  return {2.0, 2.0, kInf};
}

}  // namespace otstab
