#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "otstab/manifold.hpp"

namespace otstab {

// Unit-speed geodesic b_t(x, v) and its velocity.
struct FlowState {
  Point x;
  Eigen::VectorXd v;
};
FlowState geodesic_flow(const ManifoldSpec& spec, const PointRef& x, const PointRef& v, double t);

struct FlowSample {
  Point x;
  Eigen::VectorXd v;
  double T = 0;
  std::vector<double> crossing_params;  // transversal boundary crossings in [0, T]
  std::vector<double> grazes;           // tangential contacts, not counted
  int interval_count = 0;               // components of {s in [0,T] : b_s in X}
};

inline constexpr double kCrossingTol = 1e-12;
inline constexpr int kCrossingScan = 2048;

// Crossings of the domain boundary of spec along the geodesic; without a domain there are none.
FlowSample flow_crossings(const ManifoldSpec& spec, const PointRef& x, const PointRef& v, double T,
                          double solver_tol = kCrossingTol);

// Uniform sampler on a region containing every point within T of the domain.
struct Slab {
  ManifoldSpec region;
  double volume = 0;
};
Slab sampling_slab(const ManifoldSpec& spec, double T);

// Volume of the unit sphere S^{d-1} of directions.
double direction_sphere_area(int d);

struct CrossingEstimate {
  double T = 0;
  long n = 0;             // proposals drawn from the bounding region
  long accepted = 0;      // proposals inside the slab X_T
  double mean = 0;        // mean crossing count over X_T x S^{d-1}
  double std_error = 0;
  double unnormalized = 0;  // integral of the crossing count over the unit sphere bundle
  double unnormalized_std_error = 0;
};

CrossingEstimate estimate_crossing_integral(const ManifoldSpec& spec, double T, long n_samples, std::uint64_t seed);

struct ZetaEstimate {
  double zeta_hat = 0;
  double std_error = 0;
  double bound_ratio = 0;  // zeta_hat / diam(S)^{d-1}
};

// Measure of the (x, v) whose geodesic segment of length T meets the ball B(center, radius).
ZetaEstimate zeta_diameter_bound(const ManifoldSpec& spec, const PointRef& center, double radius, double T, long n_samples,
                                 std::uint64_t seed);

struct ReversePoincare {
  double lhs = 0;
  double rhs = 0;
  bool holds = false;
};

// ||u' - v'||^2 <= 8 (||u'||_inf + ||v'||_inf)^{4/3} ||u - v||^{2/3} with forward differences and trapezoid norms.
ReversePoincare reverse_poincare_1d(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& grid);

struct ConvexTrace {
  Eigen::VectorXd grid;
  Eigen::VectorXd u;
  double zeta = 0;  // smallest zeta making u - zeta s^2 concave on the grid
  double modulus = 0;
  double modulus_bound = 0;  // diam(Y) + 2 zeta T
  bool modulus_ok = false;
};

// u(s) = min_j (1/2 dist(b_s, y_j)^2 - psi_j) sampled at n_grid uniform parameters of [0, T].
ConvexTrace geodesic_trace(const ManifoldSpec& spec, const PointSet& targets, const Eigen::VectorXd& psi, const PointRef& x,
                           const PointRef& v, double T, int n_grid);

}  // namespace otstab
