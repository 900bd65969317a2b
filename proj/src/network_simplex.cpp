#include "otstab/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "otstab/errors.hpp"

namespace otstab {

namespace {

class Simplex {
 public:
  Simplex(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand, const Eigen::MatrixXd& cost)
      : n_(static_cast<int>(supply.size())), m_(static_cast<int>(demand.size())), cost_(cost) {
    nodes_ = n_ + m_ + 1;
    root_ = n_ + m_;
    real_arcs_ = static_cast<long>(n_) * m_;
    arcs_ = real_arcs_ + n_ + m_;

    double cmax = cost.size() ? cost.maxCoeff() : 0.0;
    art_cost_ = (cmax + 1.0) * nodes_;
    tol_ = 1e-14 * (cmax + 1.0);

    flow_.assign(arcs_, 0.0);
    in_tree_.assign(arcs_, 0);
    parent_.assign(nodes_, -1);
    pred_.assign(nodes_, -1);
    up_.assign(nodes_, 0);
    depth_.assign(nodes_, 0);
    pi_.assign(nodes_, 0.0);
    first_child_.assign(nodes_, -1);
    next_.assign(nodes_, -1);
    prev_.assign(nodes_, -1);
    art_out_.assign(n_ + m_, 0);

    for (int u = 0; u < n_ + m_; ++u) {
      double s = u < n_ ? supply[u] : -demand[u - n_];
      long a = real_arcs_ + u;
      art_out_[u] = s >= 0 ? 1 : 0;
      flow_[a] = std::abs(s);
      in_tree_[a] = 1;
      parent_[u] = root_;
      pred_[u] = a;
      up_[u] = art_out_[u];
      depth_[u] = 1;
      pi_[u] = art_out_[u] ? -art_cost_ : art_cost_;
      link_child(root_, u);
    }
    block_ = std::max<long>(10, static_cast<long>(std::sqrt(static_cast<double>(arcs_))));
  }

  long run() {
    long pivots = 0;
    for (;;) {
      long e = find_entering();
      if (e < 0) break;
      pivot(e);
      ++pivots;
    }
    return pivots;
  }

  int source(long a) const {
    if (a < real_arcs_) return static_cast<int>(a / m_);
    int u = static_cast<int>(a - real_arcs_);
    return art_out_[u] ? u : root_;
  }
  int target(long a) const {
    if (a < real_arcs_) return n_ + static_cast<int>(a % m_);
    int u = static_cast<int>(a - real_arcs_);
    return art_out_[u] ? root_ : u;
  }
  double arc_cost(long a) const {
    if (a < real_arcs_) return cost_(a / m_, a % m_);
    return art_cost_;
  }
  double reduced(long a) const { return arc_cost(a) + pi_[source(a)] - pi_[target(a)]; }

  const std::vector<double>& flow() const { return flow_; }
  const std::vector<double>& pi() const { return pi_; }
  long real_arcs() const { return real_arcs_; }

 private:
  void link_child(int p, int c) {
    prev_[c] = -1;
    next_[c] = first_child_[p];
    if (first_child_[p] >= 0) prev_[first_child_[p]] = c;
    first_child_[p] = c;
  }

  void unlink_child(int p, int c) {
    if (prev_[c] >= 0) next_[prev_[c]] = next_[c];
    else first_child_[p] = next_[c];
    if (next_[c] >= 0) prev_[next_[c]] = prev_[c];
    prev_[c] = next_[c] = -1;
  }

  long find_entering() {
    long best = -1;
    double best_rc = -tol_;
    long scanned = 0;
    long in_block = 0;
    while (scanned < arcs_) {
      long a = next_arc_;
      next_arc_ = next_arc_ + 1 == arcs_ ? 0 : next_arc_ + 1;
      ++scanned;
      ++in_block;
      if (!in_tree_[a]) {
        double rc = reduced(a);
        if (rc < best_rc) {
          best_rc = rc;
          best = a;
        }
      }
      if (in_block == block_) {
        if (best >= 0) return best;
        in_block = 0;
      }
    }
    return best;
  }

  void pivot(long e) {
    const int s = source(e), t = target(e);
    int u = s, v = t;
    while (u != v) {
      if (depth_[u] > depth_[v]) u = parent_[u];
      else if (depth_[v] > depth_[u]) v = parent_[v];
      else {
        u = parent_[u];
        v = parent_[v];
      }
    }
    const int join = u;

    // Cycle direction: s -> t, then t up to join, then join down to s.
    double delta = std::numeric_limits<double>::infinity();
    int u_out = -1;
    bool on_source_side = false;
    for (int w = s; w != join; w = parent_[w]) {
      if (up_[w] && flow_[pred_[w]] < delta) {
        delta = flow_[pred_[w]];
        u_out = w;
        on_source_side = true;
      }
    }
    for (int w = t; w != join; w = parent_[w]) {
      if (!up_[w] && flow_[pred_[w]] <= delta) {
        delta = flow_[pred_[w]];
        u_out = w;
        on_source_side = false;
      }
    }
    if (u_out < 0) throw std::logic_error("transport simplex: unbounded cycle");

    if (delta > 0) {
      flow_[e] += delta;
      for (int w = s; w != join; w = parent_[w]) flow_[pred_[w]] += up_[w] ? -delta : delta;
      for (int w = t; w != join; w = parent_[w]) flow_[pred_[w]] += up_[w] ? delta : -delta;
    }

    const long leaving = pred_[u_out];
    in_tree_[leaving] = 0;
    in_tree_[e] = 1;

    const int new_root = on_source_side ? s : t;
    const int attach = on_source_side ? t : s;
    const double rc = arc_cost(e) + pi_[s] - pi_[t];
    const double sigma = on_source_side ? -rc : rc;

    // Reverse the stem new_root -> ... -> u_out.
    int w = new_root;
    int new_parent = attach;
    long new_pred = e;
    bool new_up = (s == new_root);
    for (;;) {
      int old_parent = parent_[w];
      long old_pred = pred_[w];
      bool old_up = up_[w];
      unlink_child(old_parent, w);
      parent_[w] = new_parent;
      pred_[w] = new_pred;
      up_[w] = new_up;
      link_child(new_parent, w);
      if (w == u_out) break;
      new_parent = w;
      new_pred = old_pred;
      new_up = !old_up;
      w = old_parent;
    }

    // Refresh depth and potentials over the moved subtree.
    stack_.clear();
    stack_.push_back(new_root);
    while (!stack_.empty()) {
      int x = stack_.back();
      stack_.pop_back();
      depth_[x] = depth_[parent_[x]] + 1;
      pi_[x] += sigma;
      for (int c = first_child_[x]; c >= 0; c = next_[c]) stack_.push_back(c);
    }
  }

  int n_, m_;
  const Eigen::MatrixXd& cost_;
  int nodes_, root_;
  long real_arcs_, arcs_;
  double art_cost_, tol_;
  long block_;
  long next_arc_ = 0;

  std::vector<double> flow_;
  std::vector<char> in_tree_;
  std::vector<int> parent_;
  std::vector<long> pred_;
  std::vector<char> up_;
  std::vector<int> depth_;
  std::vector<double> pi_;
  std::vector<int> first_child_, next_, prev_;
  std::vector<char> art_out_;
  std::vector<int> stack_;
};

}  // namespace

TransportLP solve_transport(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand, const Eigen::MatrixXd& cost) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size())
    throw PreconditionError("solve_transport: cost shape does not match marginals");
  if (supply.size() == 0 || demand.size() == 0) throw PreconditionError("solve_transport: empty marginal");
  if ((supply.array() < 0).any() || (demand.array() < 0).any()) throw PreconditionError("solve_transport: negative mass");
  if (!cost.allFinite()) throw PreconditionError("solve_transport: non-finite cost");
  double total = supply.sum();
  if (std::abs(total - demand.sum()) > 1e-9 * std::max(1.0, total))
    throw PreconditionError("solve_transport: marginals have different totals");

  Simplex simplex(supply, demand, cost);
  TransportLP out;
  out.pivots = simplex.run();

  const auto& flow = simplex.flow();
  const auto& pi = simplex.pi();
  const int n = static_cast<int>(supply.size()), m = static_cast<int>(demand.size());
  for (long a = 0; a < simplex.real_arcs(); ++a) {
    if (flow[a] > 0) {
      int i = static_cast<int>(a / m), j = static_cast<int>(a % m);
      out.plan.push_back({i, j, flow[a]});
      out.value += flow[a] * cost(i, j);
    }
  }
  out.source_potential.resize(n);
  out.target_potential.resize(m);
  for (int i = 0; i < n; ++i) out.source_potential[i] = pi[i];
  for (int j = 0; j < m; ++j) out.target_potential[j] = pi[n + j];
  // Potentials are exact up to a common shift; measure the dual with the shift removed.
  double shift = out.source_potential.minCoeff();
  out.source_potential.array() -= shift;
  out.target_potential.array() -= shift;
  out.dual_value = demand.dot(out.target_potential) - supply.dot(out.source_potential);
  return out;
}

}  // namespace otstab
