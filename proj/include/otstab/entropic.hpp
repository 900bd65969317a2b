#pragma once

// Entropic (epsilon-regularized) semi-dual machinery over a dense cost matrix. Everything is
// templated on the scalar type; the library instantiates it with double.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "otstab/errors.hpp"
#include "otstab/manifold.hpp"

namespace otstab {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// C[i][j] = c(x_i, y_j); rows index the source support, columns the target grid.
template <typename Scalar = double>
class CostMatrix {
 public:
  using Entries = RowMajorMatrix<Scalar>;

  CostMatrix() = default;
  explicit CostMatrix(Entries entries) : c_(std::move(entries)) {
    if (c_.rows() == 0 || c_.cols() == 0) throw PreconditionError("CostMatrix: empty");
    if (!c_.allFinite()) throw PreconditionError("CostMatrix: non-finite entry");
    if ((c_.array() < Scalar(0)).any()) throw PreconditionError("CostMatrix: negative entry");
    osc_ = (c_.colwise().maxCoeff() - c_.colwise().minCoeff()).maxCoeff();
  }

  Eigen::Index rows() const { return c_.rows(); }
  Eigen::Index cols() const { return c_.cols(); }
  const Entries& entries() const { return c_; }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return c_(i, j); }
  auto row(Eigen::Index i) const { return c_.row(i); }

  // sup over x, x' (rows) and y (column) of c(x,y) - c(x',y).
  Scalar osc() const { return osc_; }

  CostMatrix restrict_rows(const std::vector<Eigen::Index>& keep) const {
    Entries sub(keep.size(), c_.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) sub.row(k) = c_.row(keep[k]);
    return CostMatrix(std::move(sub));
  }

 private:
  Entries c_;
  Scalar osc_ = 0;
};

// 1/2 dist(x_i, y_j)^2 over point sets stored column-wise.
template <typename Scalar = double>
CostMatrix<Scalar> quadratic_cost(const ManifoldSpec& spec, const PointSet& sources, const PointSet& targets) {
  RowMajorMatrix<Scalar> c(sources.cols(), targets.cols());
  for (Eigen::Index i = 0; i < sources.cols(); ++i)
    for (Eigen::Index j = 0; j < targets.cols(); ++j) {
      double d = dist(spec, sources.col(i), targets.col(j));
      c(i, j) = static_cast<Scalar>(0.5 * d * d);
    }
  return CostMatrix<Scalar>(std::move(c));
}

template <typename Scalar = double>
struct DualPotential {
  VectorX<Scalar> values;
  bool normalized = false;
};

template <typename Scalar = double>
struct EntropicState {
  Scalar eps = 1;
  DualPotential<Scalar> psi;
  VectorX<Scalar> sigma;
  Scalar residual = 0;
  long iterations = 0;
};

template <typename Scalar>
void validate_state(const EntropicState<Scalar>& s, Eigen::Index cols) {
  if (!(s.eps > 0)) throw PreconditionError("entropic state: eps must be positive");
  if (s.psi.values.size() != cols || s.sigma.size() != cols) throw PreconditionError("entropic state: dimension mismatch with cost");
  if (!s.psi.values.allFinite()) throw PreconditionError("entropic state: non-finite potential");
  if (!s.sigma.allFinite() || (s.sigma.array() < Scalar(0)).any() || !(s.sigma.maxCoeff() > 0))
    throw PreconditionError("entropic state: sigma must be a nonnegative, nonzero measure");
  if (std::abs(s.sigma.sum() - Scalar(1)) > Scalar(1e-9)) throw PreconditionError("entropic state: sigma must sum to 1");
}

template <typename Scalar = double>
EntropicState<Scalar> make_state(Scalar eps, std::type_identity_t<VectorX<Scalar>> psi,
                                 std::type_identity_t<std::optional<VectorX<Scalar>>> sigma = std::nullopt) {
  EntropicState<Scalar> s;
  s.eps = eps;
  const Eigen::Index m = psi.size();
  s.sigma = sigma ? *sigma : VectorX<Scalar>::Constant(m, Scalar(1) / Scalar(m));
  s.psi.values = std::move(psi);
  validate_state(s, m);
  return s;
}

namespace detail {

// Per-row log-domain Gibbs evaluation. For row i, a_j = (psi_j - C_ij)/eps + log sigma_j,
// lse_i = log sum_j exp(a_j) and the Gibbs masses are exp(a_j - lse_i).
template <typename Scalar>
class GibbsKernel {
 public:
  GibbsKernel(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost) : s_(s), cost_(cost) {
    validate_state(s, cost.cols());
    inv_eps_ = Scalar(1) / s.eps;
    shift_ = s.psi.values.array() * inv_eps_ + s.sigma.array().log();
    a_.resize(cost.cols());
    has_zero_sigma_ = (s.sigma.array() == Scalar(0)).any();
  }

  // Fills exp(a - max) into e and returns (max, sum).
  std::pair<Scalar, Scalar> row(Eigen::Index i, ArrayX<Scalar>& e) {
    a_ = shift_ - cost_.row(i).transpose().array() * inv_eps_;
    Scalar mx = a_.maxCoeff();
    a_ -= mx;
    // flush the far tail to exact zero; subnormal arithmetic there is ~4x slower
    const Scalar floor = std::log(std::numeric_limits<Scalar>::min()) + Scalar(8);
    e = (a_ < floor).select(Scalar(0), a_.max(floor).exp());
    // vectorized exp(-inf) is not exactly zero
    if (has_zero_sigma_) e = (s_.sigma.array() > Scalar(0)).select(e, Scalar(0));
    return {mx, e.sum()};
  }

  Scalar lse(Eigen::Index i, ArrayX<Scalar>& e) {
    auto [mx, sum] = row(i, e);
    return mx + std::log(sum);
  }

  Scalar eps() const { return s_.eps; }

 private:
  const EntropicState<Scalar>& s_;
  const CostMatrix<Scalar>& cost_;
  Scalar inv_eps_;
  ArrayX<Scalar> shift_;
  ArrayX<Scalar> a_;
  bool has_zero_sigma_ = false;
};

template <typename Scalar>
void check_rho(const VectorX<Scalar>& rho, Eigen::Index rows) {
  if (rho.size() != rows) throw PreconditionError("rho weights do not match cost rows");
  if ((rho.array() < Scalar(0)).any() || std::abs(rho.sum() - Scalar(1)) > Scalar(1e-9))
    throw PreconditionError("rho weights must be a probability vector");
}

}  // namespace detail

// psi^{c,eps}(x_i) = -eps log sum_j sigma_j exp(-(C_ij - psi_j)/eps).
template <typename Scalar>
VectorX<Scalar> ctransform_eps(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost) {
  detail::GibbsKernel<Scalar> k(s, cost);
  ArrayX<Scalar> e;
  VectorX<Scalar> out(cost.rows());
  for (Eigen::Index i = 0; i < cost.rows(); ++i) out[i] = -s.eps * k.lse(i, e);
  return out;
}

// The Gibbs measure mu_eps^{x_i}[psi] over the target grid.
template <typename Scalar>
VectorX<Scalar> gibbs_row(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost, Eigen::Index i) {
  if (i < 0 || i >= cost.rows()) throw PreconditionError("gibbs_row: row out of range");
  detail::GibbsKernel<Scalar> k(s, cost);
  ArrayX<Scalar> e;
  auto [mx, sum] = k.row(i, e);
  return (e / sum).matrix();
}

template <typename Scalar>
RowMajorMatrix<Scalar> gibbs_matrix(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost) {
  detail::GibbsKernel<Scalar> k(s, cost);
  ArrayX<Scalar> e;
  RowMajorMatrix<Scalar> p(cost.rows(), cost.cols());
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    auto [mx, sum] = k.row(i, e);
    p.row(i) = (e / sum).matrix().transpose();
  }
  return p;
}

// mu_eps[psi] = sum_i rho_i mu_eps^{x_i}[psi].
template <typename Scalar>
VectorX<Scalar> pushforward_eps(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost, const VectorX<Scalar>& rho) {
  detail::check_rho(rho, cost.rows());
  detail::GibbsKernel<Scalar> k(s, cost);
  ArrayX<Scalar> e, acc = ArrayX<Scalar>::Zero(cost.cols());
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    if (rho[i] == Scalar(0)) continue;
    auto [mx, sum] = k.row(i, e);
    acc += (rho[i] / sum) * e;
  }
  return acc.matrix();
}

template <typename Scalar>
Scalar kantorovich_eps(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost, const VectorX<Scalar>& rho) {
  detail::check_rho(rho, cost.rows());
  return rho.dot(ctransform_eps(s, cost));
}

// Gradient of K as a vector over the target grid: grad K . v = -<mu_eps[psi], v>.
template <typename Scalar>
VectorX<Scalar> kantorovich_gradient(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost, const VectorX<Scalar>& rho) {
  return -pushforward_eps(s, cost, rho);
}

// Row-wise <mu^{x_i}, v> and Var_{mu^{x_i}}(v).
template <typename Scalar>
std::pair<VectorX<Scalar>, VectorX<Scalar>> gibbs_moments(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost,
                                                          const VectorX<Scalar>& v) {
  if (v.size() != cost.cols()) throw PreconditionError("direction does not match cost columns");
  detail::GibbsKernel<Scalar> k(s, cost);
  ArrayX<Scalar> e;
  VectorX<Scalar> mean(cost.rows()), var(cost.rows());
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    auto [mx, sum] = k.row(i, e);
    ArrayX<Scalar> p = e / sum;
    Scalar m1 = (p * v.array()).sum();
    mean[i] = m1;
    var[i] = std::max(Scalar(0), (p * (v.array() - m1).square()).sum());
  }
  return {mean, var};
}

// <D^2 K v, v> = -(1/eps) sum_i rho_i Var_{mu^{x_i}}(v).
template <typename Scalar>
Scalar kantorovich_hessian(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost, const VectorX<Scalar>& rho,
                           const VectorX<Scalar>& v) {
  detail::check_rho(rho, cost.rows());
  auto [mean, var] = gibbs_moments(s, cost, v);
  return -rho.dot(var) / s.eps;
}

template <typename Scalar = double>
struct IFunctional {
  Scalar value;
  VectorX<Scalar> reweighting;  // rho_hat_i; rho_i * rho_hat_i is a probability vector
};

// I(psi) = log sum_i rho_i exp(psi^{c,eps}(x_i)).
template <typename Scalar>
IFunctional<Scalar> i_functional_eps(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost, const VectorX<Scalar>& rho) {
  detail::check_rho(rho, cost.rows());
  VectorX<Scalar> f = ctransform_eps(s, cost);
  Scalar mx = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < f.size(); ++i)
    if (rho[i] > 0) mx = std::max(mx, f[i]);
  ArrayX<Scalar> e = (f.array() - mx).exp();
  Scalar z = (rho.array() * e).sum();
  return {mx + std::log(z), (e / z).matrix()};
}

// Directional derivative of I along v: -sum_i rho_i rho_hat_i <mu^{x_i}, v>.
template <typename Scalar>
Scalar i_functional_gradient(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost, const VectorX<Scalar>& rho,
                             const VectorX<Scalar>& v) {
  auto I = i_functional_eps(s, cost, rho);
  auto [mean, var] = gibbs_moments(s, cost, v);
  return -(rho.array() * I.reweighting.array() * mean.array()).sum();
}

// <D^2 I v, v> = Var_{rho_eps}(<mu^x, v>) - (1/eps) int Var_{mu^x}(v) d rho_eps.
template <typename Scalar>
Scalar i_functional_hessian(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost, const VectorX<Scalar>& rho,
                            const VectorX<Scalar>& v) {
  auto I = i_functional_eps(s, cost, rho);
  auto [mean, var] = gibbs_moments(s, cost, v);
  ArrayX<Scalar> w = rho.array() * I.reweighting.array();
  Scalar m1 = (w * mean.array()).sum();
  Scalar vr = (w * (mean.array() - m1).square()).sum();
  return vr - (w * var.array()).sum() / s.eps;
}

template <typename Scalar = double>
struct StrongConcavitySides {
  Scalar hessian;  // <D^2 K v, v>
  Scalar bound;    // -C0^{-2} Var_rho(<mu^x, v>)
  Scalar c0;
  bool holds(Scalar slack) const { return hessian <= bound + slack; }
};

// Both sides of <D^2 K v, v> <= -C0^{-2} Var_rho(x -> <mu^x, v>) with C0 = exp(osc(cost)).
template <typename Scalar>
StrongConcavitySides<Scalar> strong_concavity_sides(const EntropicState<Scalar>& s, const CostMatrix<Scalar>& cost,
                                                    const VectorX<Scalar>& rho, const VectorX<Scalar>& v) {
  detail::check_rho(rho, cost.rows());
  auto [mean, var] = gibbs_moments(s, cost, v);
  Scalar m1 = rho.dot(mean);
  Scalar vr = (rho.array() * (mean.array() - m1).square()).sum();
  Scalar c0 = std::exp(cost.osc());
  return {-rho.dot(var) / s.eps, -vr / (c0 * c0), c0};
}

template <typename Scalar>
void normalize_potential(DualPotential<Scalar>& psi, const VectorX<Scalar>& mu) {
  psi.values.array() -= mu.dot(psi.values);
  psi.normalized = true;
}

template <typename Scalar = double>
class NonConvergence : public ConvergenceError {
 public:
  NonConvergence(const std::string& what, EntropicState<Scalar> last)
      : ConvergenceError(what, static_cast<double>(last.eps), static_cast<double>(last.residual), last.iterations),
        last_(std::move(last)) {}
  const EntropicState<Scalar>& last_state() const { return last_; }

 private:
  EntropicState<Scalar> last_;
};

struct SolverOptions {
  double tol = 1e-8;
  long max_iter = 100000;
  double damping = 1.0;           // theta in psi <- psi + theta eps log(mu / mu_eps[psi])
  double fallback_damping = 0.5;  // used once the residual stalls
  long stall_window = 50;
};

// Semi-dual Sinkhorn: fixed point of mu_eps[psi] = mu, psi normalized so <mu, psi> = 0.
template <typename Scalar>
EntropicState<Scalar> solve_semidual(const CostMatrix<Scalar>& cost, const VectorX<Scalar>& rho, const VectorX<Scalar>& mu,
                                     Scalar eps, const SolverOptions& opt = {},
                                     std::type_identity_t<std::optional<VectorX<Scalar>>> warm = std::nullopt,
                                     std::type_identity_t<std::optional<VectorX<Scalar>>> sigma = std::nullopt) {
  const Eigen::Index m = cost.cols();
  detail::check_rho(rho, cost.rows());
  if (mu.size() != m) throw PreconditionError("solve_semidual: target weights do not match cost columns");
  if (!(opt.tol > 0)) throw PreconditionError("solve_semidual: tol must be positive");
  EntropicState<Scalar> s = make_state<Scalar>(eps, warm ? *warm : VectorX<Scalar>::Zero(m), sigma);
  for (Eigen::Index j = 0; j < m; ++j)
    if (s.sigma[j] > 0 && !(mu[j] > 0)) throw PreconditionError("solve_semidual: target must be positive where sigma is");
  if (std::abs(mu.sum() - Scalar(1)) > Scalar(1e-9)) throw PreconditionError("solve_semidual: target must sum to 1");
  normalize_potential(s.psi, mu);

  const ArrayX<Scalar> log_mu = mu.array().log();
  Scalar theta = static_cast<Scalar>(opt.damping);
  Scalar best = std::numeric_limits<Scalar>::infinity();
  long since_best = 0;
  for (long it = 0;; ++it) {
    VectorX<Scalar> push = pushforward_eps(s, cost, rho);
    s.residual = Scalar(0.5) * (push - mu).cwiseAbs().sum();
    s.iterations = it;
    if (s.residual <= static_cast<Scalar>(opt.tol)) return s;
    if (it >= opt.max_iter)
      throw NonConvergence<Scalar>("solve_semidual: no convergence at eps=" + std::to_string(static_cast<double>(eps)), s);
    if (s.residual < best) {
      best = s.residual;
      since_best = 0;
    } else if (++since_best >= opt.stall_window && theta > static_cast<Scalar>(opt.fallback_damping)) {
      theta = static_cast<Scalar>(opt.fallback_damping);
      since_best = 0;
    }
    for (Eigen::Index j = 0; j < m; ++j)
      if (s.sigma[j] > 0) s.psi.values[j] += theta * eps * (log_mu[j] - std::log(push[j]));
    normalize_potential(s.psi, mu);
  }
}

struct LevelReport {
  double eps;
  long iterations;
  double residual;
};

template <typename Scalar = double>
struct AnnealedResult {
  EntropicState<Scalar> state;
  Scalar annealing_gap = 0;  // sup-norm change of psi^{c,eps} over the last two levels
  std::vector<LevelReport> levels;
};

inline std::vector<double> geometric_schedule(double start = 1.0, double stop = 1e-3, double ratio = 0.5) {
  if (!(start > 0 && stop > 0 && stop <= start && ratio > 0 && ratio < 1)) throw ConfigError("bad geometric schedule");
  std::vector<double> out;
  for (double e = start; e > stop * (1 + 1e-12); e *= ratio) out.push_back(e);
  out.push_back(stop);
  return out;
}

// Warm-started chain of semi-dual solves over a strictly decreasing schedule.
template <typename Scalar>
AnnealedResult<Scalar> solve_annealed(const CostMatrix<Scalar>& cost, const VectorX<Scalar>& rho, const VectorX<Scalar>& mu,
                                      const std::vector<double>& schedule, const SolverOptions& opt = {},
                                      std::type_identity_t<std::optional<VectorX<Scalar>>> sigma = std::nullopt) {
  if (schedule.empty()) throw ConfigError("empty eps schedule");
  for (std::size_t k = 1; k < schedule.size(); ++k)
    if (!(schedule[k] < schedule[k - 1])) throw ConfigError("eps schedule must be strictly decreasing");
  AnnealedResult<Scalar> out;
  std::optional<VectorX<Scalar>> warm;
  VectorX<Scalar> prev_transform;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    Scalar eps = static_cast<Scalar>(schedule[k]);
    EntropicState<Scalar> s;
    try {
      s = solve_semidual(cost, rho, mu, eps, opt, warm, sigma);
    } catch (const NonConvergence<Scalar>& e) {
      throw NonConvergence<Scalar>("solve_annealed: level " + std::to_string(k) + " (eps=" + std::to_string(schedule[k]) +
                                       ") did not converge",
                                   e.last_state());
    }
    out.levels.push_back({schedule[k], s.iterations, static_cast<double>(s.residual)});
    VectorX<Scalar> transform = ctransform_eps(s, cost);
    if (k > 0) out.annealing_gap = (transform - prev_transform).cwiseAbs().maxCoeff();
    prev_transform = std::move(transform);
    warm = s.psi.values;
    out.state = std::move(s);
  }
  return out;
}

}  // namespace otstab
