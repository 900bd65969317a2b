#include "otstab/measure.hpp"

#include <cmath>
#include <vector>

namespace otstab {

DiscreteMeasure from_samples(const ManifoldSpec& spec, PointSet points, std::optional<Eigen::VectorXd> weights) {
  const Eigen::Index n = points.cols();
  if (n == 0) throw PreconditionError("from_samples: no points");
  validate_points(spec, points);
  Eigen::VectorXd w = weights ? *weights : Eigen::VectorXd::Ones(n);
  if (w.size() != n) throw PreconditionError("from_samples: weight count does not match point count");
  if (!w.allFinite()) throw PreconditionError("from_samples: non-finite weight");
  if ((w.array() < 0).any()) throw PreconditionError("from_samples: negative weight");
  double total = w.sum();
  if (!(total > 0) || !std::isfinite(total)) throw PreconditionError("from_samples: weights cannot be normalized");

  DiscreteMeasure m;
  m.spec_ = spec;
  m.points_ = std::move(points);
  m.weights_ = w / total;
  return m;
}

DensitySpec DensitySpec::uniform() { return DensitySpec{}; }

DensitySpec DensitySpec::bounded(double lower, double upper, std::function<double(const PointRef&)> f) {
  if (!(lower > 0) || !(upper >= lower) || !std::isfinite(upper)) throw ConfigError("density bounds must satisfy 0 < m <= M < inf");
  if (!f) throw ConfigError("density evaluator missing");
  return DensitySpec{Kind::bounded_ratio, lower, upper, std::move(f)};
}

DiscreteMeasure sample_density(const ManifoldSpec& spec, const DensitySpec& density, long n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("sample_density: n must be positive");
  if (density.kind == DensitySpec::Kind::uniform) return from_samples(spec, sample_uniform(spec, n, seed));

  UniformSampler sampler(spec, seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PointSet out(spec.ambient_dim(), n);
  long accepted = 0, proposed = 0;
  while (accepted < n) {
    Point x = sampler.draw();
    ++proposed;
    double f = density.evaluator(x);
    if (!(f >= density.lower * (1 - 1e-12) && f <= density.upper * (1 + 1e-12)))
      throw ConfigError("density evaluator leaves its declared bounds");
    if (unif(sampler.engine()) * density.upper < f) out.col(accepted++) = x;
    if (proposed >= 10000 && static_cast<double>(accepted) < 1e-4 * proposed)
      throw ConfigError("sample_density: acceptance rate below 1e-4");
  }
  return from_samples(spec, std::move(out));
}

Eigen::MatrixXd distance_matrix(const ManifoldSpec& spec, const PointSet& a, const PointSet& b) {
  Eigen::MatrixXd d(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index i = 0; i < a.cols(); ++i) d(i, j) = dist(spec, a.col(i), b.col(j));
  return d;
}

namespace {

// Indices of strictly positive weights; zero-mass points do not enter the LP.
std::vector<Eigen::Index> support(const Eigen::VectorXd& w) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w[i] > 0) idx.push_back(i);
  return idx;
}

}  // namespace

W1Result wasserstein1_report(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (!same_manifold(a.spec(), b.spec())) throw DomainError("wasserstein1: measures live on different manifolds");
  if (static_cast<double>(a.size()) * static_cast<double>(b.size()) > kW1Capacity)
    throw CapacityError("wasserstein1: n_a * n_b exceeds 4e6");
  auto ia = support(a.weights()), ib = support(b.weights());
  Eigen::VectorXd sa(ia.size()), sb(ib.size());
  PointSet pa(a.points().rows(), ia.size()), pb(b.points().rows(), ib.size());
  for (std::size_t k = 0; k < ia.size(); ++k) {
    sa[k] = a.weights()[ia[k]];
    pa.col(k) = a.point(ia[k]);
  }
  for (std::size_t k = 0; k < ib.size(); ++k) {
    sb[k] = b.weights()[ib[k]];
    pb.col(k) = b.point(ib[k]);
  }
  sb *= sa.sum() / sb.sum();
  TransportLP lp = solve_transport(sa, sb, distance_matrix(a.spec(), pa, pb));
  return {lp.value, lp.gap(), lp.pivots};
}

double wasserstein1(const DiscreteMeasure& a, const DiscreteMeasure& b) { return wasserstein1_report(a, b).value; }

double variance(const Eigen::VectorXd& f, const Eigen::VectorXd& weights) {
  if (f.size() != weights.size()) throw PreconditionError("variance: value count does not match weight count");
  double mean = weights.dot(f);
  double v = weights.dot((f.array() - mean).square().matrix());
  return v > 0 ? v : 0.0;
}

double variance(const Eigen::VectorXd& f, const DiscreteMeasure& m) { return variance(f, m.weights()); }

}  // namespace otstab
