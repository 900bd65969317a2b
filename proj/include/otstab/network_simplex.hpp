#pragma once

#include <Eigen/Dense>

#include <vector>

namespace otstab {

struct PlanEntry {
  int source;
  int target;
  double mass;
};

struct TransportLP {
  double value = 0.0;       // primal objective
  double dual_value = 0.0;  // sum_j b_j v_j - sum_i a_i u_i at the final potentials
  long pivots = 0;
  std::vector<PlanEntry> plan;
  Eigen::VectorXd source_potential;
  Eigen::VectorXd target_potential;

  double gap() const { return value - dual_value; }
};

// Uncapacitated transportation problem min <C, P> s.t. P 1 = supply, P^T 1 = demand, P >= 0,
// solved by primal network simplex with block-search pivoting and a strongly feasible
// spanning tree. Supply and demand must be nonnegative with (nearly) equal totals.
TransportLP solve_transport(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand, const Eigen::MatrixXd& cost);

}  // namespace otstab
