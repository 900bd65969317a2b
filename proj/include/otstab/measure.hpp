#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>

#include "otstab/manifold.hpp"
#include "otstab/network_simplex.hpp"

namespace otstab {

class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  const ManifoldSpec& spec() const { return spec_; }
  const PointSet& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::Index size() const { return weights_.size(); }
  auto point(Eigen::Index i) const { return points_.col(i); }

  friend DiscreteMeasure from_samples(const ManifoldSpec&, PointSet, std::optional<Eigen::VectorXd>);

 private:
  ManifoldSpec spec_;
  PointSet points_;
  Eigen::VectorXd weights_;
};

// Normalizes the weights (uniform when absent) and validates every point against spec.
DiscreteMeasure from_samples(const ManifoldSpec& spec, PointSet points, std::optional<Eigen::VectorXd> weights = std::nullopt);

struct DensitySpec {
  enum class Kind { uniform, bounded_ratio };
  Kind kind = Kind::uniform;
  double lower = 1.0;  // m_rho
  double upper = 1.0;  // M_rho
  std::function<double(const PointRef&)> evaluator;

  static DensitySpec uniform();
  static DensitySpec bounded(double lower, double upper, std::function<double(const PointRef&)> f);
};

// Rejection sampling against uniform volume; a uniform density reproduces sample_uniform exactly.
DiscreteMeasure sample_density(const ManifoldSpec& spec, const DensitySpec& density, long n, std::uint64_t seed);

// Pairwise geodesic distances, rows indexed by a, columns by b.
Eigen::MatrixXd distance_matrix(const ManifoldSpec& spec, const PointSet& a, const PointSet& b);

struct W1Result {
  double value;
  double gap;  // primal minus dual objective
  long pivots;
};

inline constexpr double kW1Capacity = 4e6;

W1Result wasserstein1_report(const DiscreteMeasure& a, const DiscreteMeasure& b);
double wasserstein1(const DiscreteMeasure& a, const DiscreteMeasure& b);

double variance(const Eigen::VectorXd& f, const Eigen::VectorXd& weights);
double variance(const Eigen::VectorXd& f, const DiscreteMeasure& m);

}  // namespace otstab
