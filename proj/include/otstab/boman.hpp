#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <vector>

#include "otstab/measure.hpp"

namespace otstab {

// Rectifiable curve from start to the John center, parametrized by arclength on [0, length].
struct JohnCurve {
  double length = 0;
  std::function<Point(double)> at;
};

struct JohnDomain {
  ManifoldSpec spec;  // euclidean spec carrying a ball, box or annulus-sector descriptor
  Point center;       // x0
  double eta = 1;
  std::function<JohnCurve(const PointRef&)> curve;

  bool inside(const PointRef& x) const;
  double boundary_dist(const PointRef& x) const;
};

// Analytic John structure: radial segments for balls and boxes, polar-coordinate segments for annulus sectors.
JohnDomain john_domain(const ManifoldSpec& spec);

// min over sampled curve parameters of dist(gamma(t), X^c) / t, starting from the given points.
double certify_eta(const JohnDomain& domain, const PointSet& starts, int params_per_curve = 64);

enum class MassModel {
  lebesgue,   // rho(Q) = |Q| / |X|, exact for uniform rho and balls inside X
  empirical,  // rho(Q) = weight of support points in Q
};

struct CoverParams {
  double shrink = 100;   // selected balls are B(x, delta/shrink)
  double dilation = 5;   // emitted balls are their dilations
  double chain_steps = 1000;  // L: John-curve step delta/L
  MassModel mass = MassModel::lebesgue;
  long max_balls = 2000000;
};

struct CoverBall {
  Point center;
  double radius = 0;
  double delta = 0;  // min(dist(center, X^c), R)
  int dyadic_class = 0;
};

struct BomanCover {
  std::vector<CoverBall> balls;
  int central_index = 0;
  double R_cap = 0;
  std::vector<std::vector<int>> chains;  // chains[q] runs from central_index to q
  std::vector<int> owner;                // a ball containing each support point
  CoverParams params;
};

BomanCover build_cover(const JohnDomain& domain, const DiscreteMeasure& rho, double R, const CoverParams& params = {});

struct CoverReport {
  double A = 0;
  double B = 0;
  double C = 0;
  bool pass = false;
};

// Boman constants measured on the cover. Test points count the overlap of the dilated balls 2Q.
CoverReport verify_cover(const BomanCover& cover, const JohnDomain& domain, const DiscreteMeasure& rho, const PointSet& test_points);

// Mass of a ball and of the intersection of two balls under the cover's mass model.
double ball_mass(const BomanCover& cover, const JohnDomain& domain, const DiscreteMeasure& rho, int q);
double intersection_mass(const BomanCover& cover, const JohnDomain& domain, const DiscreteMeasure& rho, int p, int q);

// Volume of the intersection of two euclidean balls, d <= 3.
double lens_volume(int d, double r1, double r2, double center_dist);

struct GluingResult {
  double lhs = 0;  // Var_rho(f)
  double rhs = 0;  // sum_Q rho(Q) Var_Q(f)
  double kappa_hat = 1;
};

// Empirical version: rho(Q) and the local variances use the support points inside Q.
GluingResult gluing_check(const BomanCover& cover, const DiscreteMeasure& rho, const Eigen::VectorXd& f);

// Continuum version: local variances by a fixed quadrature of the uniform measure on each ball, masses from the
// cover's mass model; the global variance is over the support.
GluingResult gluing_check(const BomanCover& cover, const JohnDomain& domain, const DiscreteMeasure& rho,
                          const std::function<double(const PointRef&)>& f, int quadrature_nodes = 64);

}  // namespace otstab
