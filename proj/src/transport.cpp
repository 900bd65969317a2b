#include "otstab/transport.hpp"

#include <cmath>

namespace otstab {

namespace {

void check_psi(const Eigen::VectorXd& psi, const CostMatrix<double>& cost) {
  if (psi.size() != cost.cols()) throw PreconditionError("dual potential length does not match cost columns");
}

}  // namespace

KantorovichPotential ctransform_hard(const Eigen::VectorXd& psi, const CostMatrix<double>& cost) {
  check_psi(psi, cost);
  KantorovichPotential out;
  out.phi.resize(cost.rows());
  for (Eigen::Index i = 0; i < cost.rows(); ++i) out.phi[i] = (cost.row(i).transpose() - psi).minCoeff();
  return out;
}

Eigen::VectorXd ctransform_hard_dual(const Eigen::VectorXd& phi, const CostMatrix<double>& cost) {
  if (phi.size() != cost.rows()) throw PreconditionError("potential length does not match cost rows");
  return (cost.entries().colwise() - phi).colwise().minCoeff().transpose();
}

TransportAssignment assign_map(const Eigen::VectorXd& psi, const CostMatrix<double>& cost) {
  check_psi(psi, cost);
  TransportAssignment out;
  out.target_index.resize(cost.rows());
  out.gap.resize(cost.rows());
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity(), second = best;
    Eigen::Index arg = 0;
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      double v = cost(i, j) - psi[j];
      if (v < best) {
        second = best;
        best = v;
        arg = j;
      } else if (v < second) {
        second = v;
      }
    }
    out.target_index[i] = arg;
    out.gap[i] = cost.cols() == 1 ? kNoRunnerUp : second - best;
  }
  return out;
}

Eigen::VectorXd assignment_pushforward(const TransportAssignment& a, const Eigen::VectorXd& rho, Eigen::Index m) {
  if (static_cast<Eigen::Index>(a.target_index.size()) != rho.size()) throw PreconditionError("assignment length does not match rho");
  Eigen::VectorXd push = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    Eigen::Index j = a.target_index[i];
    if (j < 0 || j >= m) throw PreconditionError("assignment index out of range");
    push[j] += rho[i];
  }
  return push;
}

PotentialSolve potential_from_target(const DiscreteMeasure& rho, const DiscreteMeasure& mu, const CostMatrix<double>& cost,
                                     const std::vector<double>& eps_schedule, const SolverOptions& opt) {
  if (!same_manifold(rho.spec(), mu.spec())) throw DomainError("potential_from_target: measures live on different manifolds");
  if (cost.rows() != rho.size() || cost.cols() != mu.size()) throw PreconditionError("potential_from_target: cost shape mismatch");
  PotentialSolve out;
  out.solver = solve_annealed<double>(cost, rho.weights(), mu.weights(), eps_schedule, opt);
  const Eigen::VectorXd& psi = out.solver.state.psi.values;
  out.potential = ctransform_hard(psi, cost);
  out.potential.phi.array() -= rho.weights().dot(out.potential.phi);
  out.smoothed.phi = ctransform_eps(out.solver.state, cost);
  out.smoothed.phi.array() -= rho.weights().dot(out.smoothed.phi);
  out.assignment = assign_map(psi, cost);
  Eigen::VectorXd push = assignment_pushforward(out.assignment, rho.weights(), mu.size());
  out.pushforward_residual = 0.5 * (push - mu.weights()).cwiseAbs().sum();
  return out;
}

PotentialSolve potential_from_target(const DiscreteMeasure& rho, const DiscreteMeasure& mu,
                                     const std::vector<double>& eps_schedule, const SolverOptions& opt) {
  if (!same_manifold(rho.spec(), mu.spec())) throw DomainError("potential_from_target: measures live on different manifolds");
  return potential_from_target(rho, mu, quadratic_cost<double>(rho.spec(), rho.points(), mu.points()), eps_schedule, opt);
}

double potential_discrepancy(const Eigen::VectorXd& phi_a, const Eigen::VectorXd& phi_b, const Eigen::VectorXd& rho) {
  if (phi_a.size() != phi_b.size() || phi_a.size() != rho.size()) throw PreconditionError("potential_discrepancy: length mismatch");
  return variance(phi_a - phi_b, rho);
}

double map_discrepancy(const TransportAssignment& a, const TransportAssignment& b, const Eigen::VectorXd& rho,
                       const PointSet& targets, const ManifoldSpec& spec) {
  const auto n = static_cast<std::size_t>(rho.size());
  if (a.target_index.size() != n || b.target_index.size() != n) throw PreconditionError("map_discrepancy: length mismatch");
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index ja = a.target_index[i], jb = b.target_index[i];
    if (ja < 0 || jb < 0 || ja >= targets.cols() || jb >= targets.cols())
      throw PreconditionError("map_discrepancy: target index out of range");
    if (ja == jb) continue;
    double d = dist(spec, targets.col(ja), targets.col(jb));
    total += rho[i] * d * d;
  }
  return total;
}

double weighted_ball_K(const ManifoldSpec& spec) {
  auto k = curvature_constants(spec);
  return k.lambda / (2 * k.theta);
}

WeightedBallMeasure weighted_ball_measure(const DiscreteMeasure& rho, Eigen::Index center, double radius, double K,
                                          double density_ratio) {
  if (center < 0 || center >= rho.size()) throw PreconditionError("weighted_ball_measure: center index out of range");
  if (!(radius > 0) || !(K >= 0) || !(density_ratio >= 1)) throw PreconditionError("weighted_ball_measure: bad radius, K or density ratio");
  if (radius > curvature_constants(rho.spec()).radius) throw PreconditionError("weighted_ball_measure: radius exceeds the convexity radius");
  WeightedBallMeasure out;
  out.center = center;
  out.radius = radius;
  out.K = K;
  std::vector<double> w;
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    if (!(rho.weights()[i] > 0)) continue;
    double d = dist(rho.spec(), rho.point(i), rho.point(center));
    if (d >= radius) continue;
    out.support.push_back(i);
    w.push_back(rho.weights()[i] * std::exp(-K * d * d));
  }
  if (out.support.empty()) throw PreconditionError("weighted_ball_measure: empty ball");
  out.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  out.weights /= out.weights.sum();
  out.E = std::exp(K * radius * radius) * density_ratio;
  return out;
}

double weighted_ball_comparability(const DiscreteMeasure& rho, const WeightedBallMeasure& wb) {
  double mass = 0;
  for (Eigen::Index i : wb.support) mass += rho.weights()[i];
  double worst = 1;
  for (std::size_t k = 0; k < wb.support.size(); ++k) {
    double r = wb.weights[static_cast<Eigen::Index>(k)] / (rho.weights()[wb.support[k]] / mass);
    worst = std::max({worst, r, 1 / r});
  }
  return worst;
}

DiscreteMeasure as_measure(const DiscreteMeasure& rho, const WeightedBallMeasure& wb) {
  PointSet pts(rho.points().rows(), static_cast<Eigen::Index>(wb.support.size()));
  for (std::size_t k = 0; k < wb.support.size(); ++k) pts.col(static_cast<Eigen::Index>(k)) = rho.point(wb.support[k]);
  return from_samples(rho.spec(), std::move(pts), wb.weights);
}

}  // namespace otstab
