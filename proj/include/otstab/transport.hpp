#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

#include "otstab/entropic.hpp"
#include "otstab/measure.hpp"

namespace otstab {

struct KantorovichPotential {
  Eigen::VectorXd phi;  // one value per rho support point
};

struct TransportAssignment {
  std::vector<Eigen::Index> target_index;
  Eigen::VectorXd gap;  // second best minus best; +inf with a single target
};

inline constexpr double kNoRunnerUp = std::numeric_limits<double>::infinity();

// phi_i = min_j (C_ij - psi_j), no gauge applied.
KantorovichPotential ctransform_hard(const Eigen::VectorXd& psi, const CostMatrix<double>& cost);

// The column-side transform psi_j = min_i (C_ij - phi_i).
Eigen::VectorXd ctransform_hard_dual(const Eigen::VectorXd& phi, const CostMatrix<double>& cost);

// argmin_j (C_ij - psi_j), smallest index on exact ties.
TransportAssignment assign_map(const Eigen::VectorXd& psi, const CostMatrix<double>& cost);

// Weights of the assignment pushforward on the target grid.
Eigen::VectorXd assignment_pushforward(const TransportAssignment& a, const Eigen::VectorXd& rho, Eigen::Index m);

struct PotentialSolve {
  KantorovichPotential potential;  // gauge <rho, phi> = 0
  KantorovichPotential smoothed;   // psi^{c,eps} at the final level, same gauge
  TransportAssignment assignment;
  AnnealedResult<double> solver;
  double pushforward_residual = 0;  // 1/2 sum_j |(assign # rho)_j - mu_j|
};

PotentialSolve potential_from_target(const DiscreteMeasure& rho, const DiscreteMeasure& mu, const CostMatrix<double>& cost,
                                     const std::vector<double>& eps_schedule, const SolverOptions& opt = {});
PotentialSolve potential_from_target(const DiscreteMeasure& rho, const DiscreteMeasure& mu,
                                     const std::vector<double>& eps_schedule, const SolverOptions& opt = {});

// Var_rho(phi_a - phi_b).
double potential_discrepancy(const Eigen::VectorXd& phi_a, const Eigen::VectorXd& phi_b, const Eigen::VectorXd& rho);

// sum_i rho_i dist(y[a_i], y[b_i])^2.
double map_discrepancy(const TransportAssignment& a, const TransportAssignment& b, const Eigen::VectorXd& rho,
                       const PointSet& targets, const ManifoldSpec& spec);

struct WeightedBallMeasure {
  Eigen::Index center = 0;
  double radius = 0;
  double K = 0;
  std::vector<Eigen::Index> support;  // rho indices strictly inside the ball
  Eigen::VectorXd weights;            // over support, sums to 1
  double E = 1;                       // exp(K R^2) M/m
};

// Hessian weight lambda/(2 theta) from the family curvature constants.
double weighted_ball_K(const ManifoldSpec& spec);

// rho_i exp(-K dist(x_i, x_center)^2) restricted to the open ball and renormalized. density_ratio is M/m.
WeightedBallMeasure weighted_ball_measure(const DiscreteMeasure& rho, Eigen::Index center, double radius, double K,
                                          double density_ratio = 1.0);

// Largest ratio rho^V_i / rho^B_i (and its inverse) against the renormalized restriction rho^B.
double weighted_ball_comparability(const DiscreteMeasure& rho, const WeightedBallMeasure& wb);

DiscreteMeasure as_measure(const DiscreteMeasure& rho, const WeightedBallMeasure& wb);

}  // namespace otstab
