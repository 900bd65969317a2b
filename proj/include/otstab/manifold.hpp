#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>

#include "otstab/errors.hpp"

namespace otstab {

// Points are Eigen column vectors; point sets store one point per column.
using Point = Eigen::VectorXd;
using PointRef = Eigen::Ref<const Eigen::VectorXd>;
using PointSet = Eigen::MatrixXd;

enum class Family { euclidean, sphere, torus };

struct BallDomain {
  Eigen::VectorXd center;
  double radius = 1.0;
};

struct BoxDomain {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

// Planar sector {r0 < |x| < r1, 0 < angle(x) < angle_deg} with angles measured from the +x axis.
struct AnnulusSector {
  double r0 = 0.5;
  double r1 = 1.0;
  double angle_deg = 270.0;
};

// Geodesic cap {x : dist(x, pole) < angle} on the unit sphere.
struct SphereCap {
  Eigen::VectorXd pole;
  double angle = 0.0;
};

using DomainDescriptor = std::variant<BallDomain, BoxDomain, AnnulusSector, SphereCap>;

struct ManifoldSpec {
  Family family = Family::euclidean;
  int dim = 2;
  std::optional<DomainDescriptor> domain;

  // Length of a coordinate vector: d+1 for the sphere, d otherwise.
  int ambient_dim() const { return family == Family::sphere ? dim + 1 : dim; }
  bool bounded() const { return family != Family::euclidean || domain.has_value(); }
};

ManifoldSpec sphere(int d);
ManifoldSpec torus(int d);
ManifoldSpec euclidean(int d);
ManifoldSpec euclidean(int d, DomainDescriptor domain);

// Grammar: "sphere:2", "torus:3", "euclidean:3", "ball:2:1.0", "box:2:0,0:1,1",
// "annulus:2:0.5:1.0:270", "cap:2:0.785398".
ManifoldSpec parse_spec(const std::string& text);
std::string to_string(const ManifoldSpec& spec);
bool same_manifold(const ManifoldSpec& a, const ManifoldSpec& b);

void validate_point(const ManifoldSpec& spec, const PointRef& x);
void validate_points(const ManifoldSpec& spec, const PointSet& xs);

double dist(const ManifoldSpec& spec, const PointRef& x, const PointRef& y);
Point exp_map(const ManifoldSpec& spec, const PointRef& x, const PointRef& v);
Eigen::VectorXd log_map(const ManifoldSpec& spec, const PointRef& x, const PointRef& y);
Point geodesic_point(const ManifoldSpec& spec, const PointRef& x, const PointRef& y, double t);
double injectivity_radius(const ManifoldSpec& spec);

// Removes the normal component on the sphere; identity elsewhere.
Eigen::VectorXd project_tangent(const ManifoldSpec& spec, const PointRef& x, const PointRef& v);

// Draws i.i.d. points from normalized volume on the manifold (restricted to its domain, if any).
class UniformSampler {
 public:
  UniformSampler(ManifoldSpec spec, std::uint64_t seed);
  Point draw();
  Eigen::VectorXd unit_direction(const PointRef& x);
  std::mt19937_64& engine() { return rng_; }

 private:
  double uniform01();
  Eigen::VectorXd gaussian(int n);

  ManifoldSpec spec_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

PointSet sample_uniform(const ManifoldSpec& spec, long n, std::uint64_t seed);

// Domain geometry. Without a domain the whole manifold is the domain.
bool inside(const ManifoldSpec& spec, const PointRef& x);
double boundary_distance(const ManifoldSpec& spec, const PointRef& x);
// Positive inside, negative outside, zero on the boundary.
double signed_boundary_distance(const ManifoldSpec& spec, const PointRef& x);
double domain_volume(const ManifoldSpec& spec);
double boundary_measure(const ManifoldSpec& spec);

struct CurvatureConstants {
  double lambda;  // semi-concavity of 1/2 dist^2
  double theta;   // strong convexity of dist^2 in balls of radius R
  double radius;  // R
};
CurvatureConstants curvature_constants(const ManifoldSpec& spec);

}  // namespace otstab
