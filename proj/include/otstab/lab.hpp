#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "otstab/entropic.hpp"
#include "otstab/measure.hpp"

namespace otstab {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Closed-form statistics of the pair phi1 = |x|, phi2 = max(|x|, eps) under the uniform measure on the unit d-ball.
struct SharpnessRecord {
  double eps = 0;
  double mean_diff = 0;      // eps^{d+1} / (d+1)
  double second_moment = 0;  // 2 eps^{d+2} / ((d+1)(d+2))
  double variance = 0;
  double w1 = 0;  // eps^d
};

SharpnessRecord sharpness_closed_form(int d, double eps);

// alpha_d = (d+2) / (2d).
double sharpness_exponent(int d);

using PairList = std::vector<std::pair<double, double>>;

struct LogLogFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 1;
  int used = 0;
  int dropped = 0;  // pairs with a zero or non-finite coordinate
};

// Least squares of log y on log x. Throws FitError with fewer than 3 usable pairs.
LogLogFit fit_loglog(const PairList& pairs);

struct DecadeBin {
  int decade = 0;  // floor(log10 w1)
  int count = 0;
  double max_ratio = 0;
};

struct ExponentReport {
  PairList pairs;          // (w1, discrepancy)
  double envelope = 1;     // ratios are discrepancy / w1^envelope
  LogLogFit fit;
  double max_ratio = 0;
  bool valid = false;      // w1 spans at least two decades, less 1e-3 decade
  std::vector<DecadeBin> decades;  // ascending in w1
  double worst_rise = 0;   // largest max_ratio(k) / max_ratio(k+1) over adjacent populated decades
  double spread = 1;       // largest over smallest nonzero decade max_ratio
  bool decade_stable = false;  // worst_rise < 10
};

ExponentReport exponent_report(PairList pairs, double envelope);

// Vogel spiral: n quasi-uniform points of the unit disk.
PointSet vogel_disk(long n);
// n points of S^2 on a Fibonacci lattice.
PointSet fibonacci_sphere(long n);

struct SharpnessNumericConfig {
  long n_rho = 2000;
  long grid_m = 800;  // grid_m - 1 circle points plus the origin
  std::vector<double> eps_values;
  std::vector<double> schedule = geometric_schedule(1.0, 1e-3, 0.5);
  SolverOptions solver = [] {
    SolverOptions o;
    o.tol = 1e-6;
    return o;
  }();
  bool smoothed = true;  // discrepancy on psi^{c,eps}; false uses the hard transform
};

struct SharpnessNumericRow {
  double eps = 0;
  double w1 = 0;  // measured
  double variance = 0;
  double variance_closed = 0;
  double w1_closed = 0;
  double rel_error = 0;
  long iterations = 0;  // all levels of the nu solve
  double residual = 0;
};

struct SharpnessNumeric {
  std::vector<SharpnessNumericRow> rows;
  ExponentReport report;  // variance against w1, envelope 1
  double closed_slope = 0;  // the same fit on the closed-form series
};

// Full pipeline at d = 2: mu is the radial projection of rho, nu collapses the core |x| < eps to the origin.
SharpnessNumeric sharpness_numeric(int d, const SharpnessNumericConfig& cfg);

enum class TargetFamily {
  rotating_cap,  // sphere: weights exp(kappa <y, c>) with c rotated about a fixed axis
  sliding_bump,  // any spec: weights exp(-kappa dist(y, c)^2 / 2) with c moved along a geodesic
};

struct StabilityConfig {
  ManifoldSpec spec = sphere(2);
  TargetFamily family = TargetFamily::rotating_cap;
  long n_rho = 1000;
  long grid_m = 400;
  double kappa = 4;
  int n_pairs = 20;
  double w1_lo = 1e-3;
  double w1_hi = 1e-1;
  std::uint64_t seed = 7;
  std::vector<double> schedule = geometric_schedule(1.0, 1e-2, 0.5);
  SolverOptions solver;
  bool smoothed = true;
};

struct StabilityPair {
  int index = 0;
  double shift = 0;  // geodesic displacement of the family center
  double w1 = 0;
  double potential_variance = 0;
  double map_discrepancy = 0;
  long iterations = 0;
};

// One reference measure mu at shift 0 against nu at n_pairs shifts, log-spaced so W1 spans [w1_lo, w1_hi] after a
// pilot pair and a few endpoint corrections. W1 is measured exactly for every pair.
std::vector<StabilityPair> stability_pairs(const StabilityConfig& cfg);

struct StabilityResult {
  std::vector<StabilityPair> pairs;
  ExponentReport potentials;  // Var_rho(phi_mu - phi_nu) against W1
  ExponentReport maps;        // map discrepancy against W1^{1/6}
};

StabilityResult stability_batch(const StabilityConfig& cfg);

struct DerivativeCheck {
  int instance = 0;
  ManifoldSpec spec;
  int n = 0;
  int m = 0;
  double eps = 0;
  double grad_K = 0;  // relative errors against Richardson central differences
  double hess_K = 0;
  double grad_I = 0;
  double hess_I = 0;
  double worst() const;
};

// Random instances with n, m <= 8 cycling through sphere, torus and the unit disk, eps alternating 0.05 / 0.5.
std::vector<DerivativeCheck> derivative_checks(int instances = 20, std::uint64_t seed = 19);

struct ConcavityCheck {
  int instance = 0;
  ManifoldSpec spec;
  long support = 0;   // points in the weighted ball
  double c0 = 0;
  double worst_slack = 0;  // max over directions of hessian - bound
  int directions = 0;
  int violations = 0;      // directions with hessian > bound + 1e-8
};

struct ConcavityConfig {
  int instances_per_family = 10;
  int directions = 50;
  double eps = 0.1;
  long n_rho = 400;
  long grid_m = 30;
  double psi_scale = 0.2;
  double max_radius = 0.5;  // ball radius is min(R, max_radius)
  std::uint64_t seed = 1;
};

// Weighted-ball reference measures on sphere:2, torus:2 and the unit disk.
std::vector<ConcavityCheck> strong_concavity_suite(const ConcavityConfig& cfg = {});

}  // namespace otstab
