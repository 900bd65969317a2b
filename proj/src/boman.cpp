#include "otstab/boman.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "otstab/errors.hpp"

namespace otstab {

namespace {

constexpr double kPi = std::numbers::pi;

JohnCurve radial_curve(const PointRef& x, const Point& x0) {
  Point start = x;
  Eigen::VectorXd dir = x0 - start;
  double len = dir.norm();
  if (len > 0) dir /= len;
  return {len, [start, dir, len](double t) -> Point { return start + std::clamp(t, 0.0, len) * dir; }};
}

double polar_angle(const PointRef& x) {
  double a = std::atan2(x[1], x[0]);
  return a < 0 ? a + 2 * kPi : a;
}

// Straight line in (r, theta) from x to the sector center, reparametrized by arclength through a chord table.
JohnCurve polar_curve(const PointRef& x, double r_mid, double theta_mid) {
  constexpr int kNodes = 512;
  const double r_x = x.head<2>().norm(), th_x = polar_angle(x);
  auto point = [=](double u) -> Point {
    double r = r_x + u * (r_mid - r_x), th = th_x + u * (theta_mid - th_x);
    Point p(2);
    p << r * std::cos(th), r * std::sin(th);
    return p;
  };
  std::vector<double> s(kNodes + 1, 0.0);
  Point prev = point(0.0);
  for (int k = 1; k <= kNodes; ++k) {
    Point cur = point(static_cast<double>(k) / kNodes);
    s[k] = s[k - 1] + (cur - prev).norm();
    prev = std::move(cur);
  }
  const double len = s.back();
  return {len, [s = std::move(s), point, len](double t) -> Point {
            if (len == 0) return point(0.0);
            t = std::clamp(t, 0.0, len);
            auto it = std::upper_bound(s.begin(), s.end(), t);
            int k = std::clamp(static_cast<int>(it - s.begin()) - 1, 0, kNodes - 1);
            double seg = s[k + 1] - s[k];
            double frac = seg > 0 ? (t - s[k]) / seg : 0.0;
            return point((k + frac) / kNodes);
          }};
}

// Dyadic class k with 2^{k-1} < delta <= 2^k.
int dyadic_class(double delta) {
  int e;
  double m = std::frexp(delta, &e);
  return m == 0.5 ? e - 1 : e;
}

struct CellKey {
  std::array<long long, 4> c{};
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (long long v : k.c) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

// Uniform grid of buckets; each ball is registered in every cell its reach-box touches.
class BallGrid {
 public:
  BallGrid(int dim, double cell) : dim_(dim), cell_(cell) {}

  void insert(int id, const Point& c, double reach) {
    CellKey lo = key(c.array() - reach), hi = key(c.array() + reach);
    CellKey k = lo;
    for (;;) {
      cells_[k].push_back(id);
      int a = 0;
      while (a < dim_ && k.c[a] == hi.c[a]) k.c[a] = lo.c[a], ++a;
      if (a == dim_) break;
      ++k.c[a];
    }
  }

  const std::vector<int>& query(const PointRef& x) const {
    auto it = cells_.find(key(x.array()));
    return it == cells_.end() ? empty_ : it->second;
  }

 private:
  template <typename A>
  CellKey key(const A& x) const {
    CellKey k;
    for (int a = 0; a < dim_; ++a) k.c[a] = static_cast<long long>(std::floor(x[a] / cell_));
    return k;
  }

  int dim_;
  double cell_;
  std::unordered_map<CellKey, std::vector<int>, CellHash> cells_;
  std::vector<int> empty_;
};

std::vector<int> loop_erase(const std::vector<int>& seq) {
  std::vector<int> out;
  std::unordered_map<int, std::size_t> pos;
  for (int b : seq) {
    auto it = pos.find(b);
    if (it != pos.end()) {
      for (std::size_t k = it->second + 1; k < out.size(); ++k) pos.erase(out[k]);
      out.resize(it->second + 1);
      continue;
    }
    pos[b] = out.size();
    out.push_back(b);
  }
  return out;
}

// Halton points of the unit ball, deterministic.
PointSet ball_quadrature(int d, int count) {
  static constexpr int primes[] = {2, 3, 5, 7};
  PointSet out(d, count);
  int filled = 0;
  for (long i = 1; filled < count; ++i) {
    Point p(d);
    for (int a = 0; a < d; ++a) {
      double f = 1, r = 0;
      for (long n = i; n > 0; n /= primes[a]) {
        f /= primes[a];
        r += f * static_cast<double>(n % primes[a]);
      }
      p[a] = 2 * r - 1;
    }
    if (p.norm() <= 1) out.col(filled++) = p;
  }
  return out;
}

double ball_volume(int d, double r) { return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1) * std::pow(r, d); }

}  // namespace

bool JohnDomain::inside(const PointRef& x) const { return otstab::inside(spec, x); }

double JohnDomain::boundary_dist(const PointRef& x) const { return boundary_distance(spec, x); }

JohnDomain john_domain(const ManifoldSpec& spec) {
  if (spec.family != Family::euclidean || !spec.domain) throw ConfigError("john_domain: needs a euclidean spec with a domain");
  JohnDomain dom;
  dom.spec = spec;
  std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, BallDomain>) {
          dom.center = d.center;
          dom.eta = 1.0;
          dom.curve = [x0 = dom.center](const PointRef& x) { return radial_curve(x, x0); };
        } else if constexpr (std::is_same_v<D, BoxDomain>) {
          Eigen::VectorXd half = 0.5 * (d.hi - d.lo);
          dom.center = 0.5 * (d.lo + d.hi);
          dom.eta = half.minCoeff() / half.norm();
          dom.curve = [x0 = dom.center](const PointRef& x) { return radial_curve(x, x0); };
        } else if constexpr (std::is_same_v<D, AnnulusSector>) {
          const double r_mid = 0.5 * (d.r0 + d.r1), th_mid = 0.5 * d.angle_deg * kPi / 180;
          dom.center = Point(2);
          dom.center << r_mid * std::cos(th_mid), r_mid * std::sin(th_mid);
          dom.curve = [=](const PointRef& x) { return polar_curve(x, r_mid, th_mid); };
          // certified on a boundary-inclusive polar grid, with a safety margin for unsampled starts
          const int nr = 21, nt = 91;
          PointSet starts(2, nr * nt);
          for (int i = 0; i < nr; ++i)
            for (int j = 0; j < nt; ++j) {
              double r = d.r0 + (d.r1 - d.r0) * i / (nr - 1), th = d.angle_deg * kPi / 180 * j / (nt - 1);
              starts.col(i * nt + j) << r * std::cos(th), r * std::sin(th);
            }
          dom.eta = 0.9 * certify_eta(dom, starts, 256);
        } else {
          throw ConfigError("john_domain: sphere caps are not supported");
        }
      },
      *spec.domain);
  return dom;
}

double certify_eta(const JohnDomain& domain, const PointSet& starts, int params_per_curve) {
  double eta = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < starts.cols(); ++i) {
    JohnCurve g = domain.curve(starts.col(i));
    if (!(g.length > 0)) continue;
    for (int k = 1; k <= params_per_curve; ++k) {
      double t = g.length * k / params_per_curve;
      Point p = g.at(t);
      double d = domain.inside(p) ? domain.boundary_dist(p) : 0.0;
      eta = std::min(eta, d / t);
    }
  }
  return eta;
}

BomanCover build_cover(const JohnDomain& domain, const DiscreteMeasure& rho, double R, const CoverParams& params) {
  if (!(R > 0) || !std::isfinite(R)) throw PreconditionError("build_cover: R must be positive and finite");
  if (!(params.shrink > 0 && params.dilation >= 1 && params.chain_steps >= 1)) throw ConfigError("build_cover: bad cover parameters");
  if (rho.points().rows() != domain.spec.ambient_dim()) throw DomainError("build_cover: support dimension does not match the domain");
  const int d = domain.spec.dim;
  auto delta_of = [&](const PointRef& x) { return std::min(domain.boundary_dist(x), R); };

  std::vector<double> delta(rho.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    if (!domain.inside(rho.point(i))) throw DomainError("build_cover: support point " + std::to_string(i) + " lies outside the domain");
    delta[i] = delta_of(rho.point(i));
    if (!(delta[i] > 0)) throw DomainError("build_cover: support point " + std::to_string(i) + " lies on the boundary");
  }
  const double delta0 = delta_of(domain.center);
  const double top = std::max(delta0, delta.empty() ? 0.0 : *std::max_element(delta.begin(), delta.end()));

  BomanCover cover;
  cover.R_cap = R;
  cover.params = params;
  const double factor = params.dilation / params.shrink;
  BallGrid grid(d, 2 * factor * top);

  // Vitali selection inside one dyadic class; returns the selected ball whose dilation covers x.
  auto select = [&](const PointRef& x, double dx) -> int {
    int k = dyadic_class(dx);
    for (int b : grid.query(x)) {
      const CoverBall& q = cover.balls[b];
      if (q.dyadic_class == k && (x - q.center).norm() < (dx + q.delta) / params.shrink) return b;
    }
    if (static_cast<long>(cover.balls.size()) >= params.max_balls) throw CapacityError("build_cover: ball budget exhausted");
    cover.balls.push_back({Point(x), factor * dx, dx, k});
    int id = static_cast<int>(cover.balls.size()) - 1;
    grid.insert(id, cover.balls[id].center, 2 * cover.balls[id].radius);
    return id;
  };
  auto holds = [&](int b, const PointRef& y, double r) {
    const CoverBall& q = cover.balls[b];
    return (y - q.center).norm() + r <= q.radius;
  };

  cover.central_index = select(domain.center, delta0);
  std::vector<Eigen::Index> order(rho.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return delta[a] > delta[b]; });
  cover.owner.assign(rho.size(), -1);
  for (Eigen::Index i : order) cover.owner[i] = select(rho.point(i), delta[i]);

  auto finish = [&](std::vector<int> seq) {
    if (seq.back() != cover.central_index) seq.push_back(cover.central_index);
    std::vector<int> chain = loop_erase(seq);
    std::reverse(chain.begin(), chain.end());
    return chain;
  };

  std::vector<bool> done;
  for (std::size_t q = 0; q < cover.balls.size(); ++q) {
    done.resize(cover.balls.size(), false);
    if (done[q]) continue;
    const Point start = cover.balls[q].center;
    JohnCurve g = domain.curve(start);
    std::vector<int> seq{static_cast<int>(q)};
    std::vector<std::pair<int, std::size_t>> spawned;
    double t = 0, dy = cover.balls[q].delta;
    while (t < g.length) {
      t = std::min(t + dy / params.chain_steps, g.length);
      Point y = g.at(t);
      dy = delta_of(y);
      if (!(dy > 0)) throw DomainError("build_cover: John curve left the domain");
      const double r = dy / params.shrink;
      if (holds(seq.back(), y, r)) continue;
      int pick = -1;
      for (int b : grid.query(y))
        if (holds(b, y, r) && (pick < 0 || cover.balls[b].radius > cover.balls[pick].radius)) pick = b;
      if (pick < 0) {
        std::size_t before = cover.balls.size();
        pick = select(y, dy);
        if (cover.balls.size() > before) spawned.emplace_back(pick, seq.size());
      }
      seq.push_back(pick);
    }
    cover.chains.resize(cover.balls.size());
    done.resize(cover.balls.size(), false);
    for (auto [b, pos] : spawned) {
      cover.chains[b] = finish(std::vector<int>(seq.begin() + static_cast<std::ptrdiff_t>(pos), seq.end()));
      done[b] = true;
    }
    cover.chains[q] = finish(std::move(seq));
    done[q] = true;
  }
  cover.chains.resize(cover.balls.size());
  return cover;
}

double lens_volume(int d, double r1, double r2, double D) {
  if (D >= r1 + r2) return 0.0;
  if (D <= std::abs(r1 - r2)) return ball_volume(d, std::min(r1, r2));
  switch (d) {
    case 1: return r1 + r2 - D;
    case 2: {
      double a = std::acos(std::clamp((D * D + r1 * r1 - r2 * r2) / (2 * D * r1), -1.0, 1.0));
      double b = std::acos(std::clamp((D * D + r2 * r2 - r1 * r1) / (2 * D * r2), -1.0, 1.0));
      double k = (-D + r1 + r2) * (D + r1 - r2) * (D - r1 + r2) * (D + r1 + r2);
      return r1 * r1 * a + r2 * r2 * b - 0.5 * std::sqrt(std::max(k, 0.0));
    }
    case 3: {
      double s = r1 + r2 - D;
      return kPi * s * s * (D * D + 2 * D * (r1 + r2) - 3 * (r1 - r2) * (r1 - r2)) / (12 * D);
    }
    default: throw PreconditionError("lens_volume: only d <= 3 is supported");
  }
}

double ball_mass(const BomanCover& cover, const JohnDomain& domain, const DiscreteMeasure& rho, int q) {
  const CoverBall& b = cover.balls.at(q);
  if (cover.params.mass == MassModel::lebesgue) return ball_volume(domain.spec.dim, b.radius) / domain_volume(domain.spec);
  double m = 0;
  for (Eigen::Index i = 0; i < rho.size(); ++i)
    if ((rho.point(i) - b.center).norm() <= b.radius) m += rho.weights()[i];
  return m;
}

double intersection_mass(const BomanCover& cover, const JohnDomain& domain, const DiscreteMeasure& rho, int p, int q) {
  const CoverBall &a = cover.balls.at(p), &b = cover.balls.at(q);
  if (cover.params.mass == MassModel::lebesgue)
    return lens_volume(domain.spec.dim, a.radius, b.radius, (a.center - b.center).norm()) / domain_volume(domain.spec);
  double m = 0;
  for (Eigen::Index i = 0; i < rho.size(); ++i)
    if ((rho.point(i) - a.center).norm() <= a.radius && (rho.point(i) - b.center).norm() <= b.radius) m += rho.weights()[i];
  return m;
}

CoverReport verify_cover(const BomanCover& cover, const JohnDomain& domain, const DiscreteMeasure& rho, const PointSet& test_points) {
  if (cover.chains.size() != cover.balls.size()) throw PreconditionError("verify_cover: chains missing");
  CoverReport rep;
  rep.B = rep.C = 1;
  double rmax = 0;
  for (const auto& b : cover.balls) rmax = std::max(rmax, b.radius);
  BallGrid grid(domain.spec.dim, 4 * rmax);
  for (std::size_t q = 0; q < cover.balls.size(); ++q) grid.insert(static_cast<int>(q), cover.balls[q].center, 2 * cover.balls[q].radius);
  for (Eigen::Index i = 0; i < test_points.cols(); ++i) {
    int count = 0;
    for (int b : grid.query(test_points.col(i)))
      if ((test_points.col(i) - cover.balls[b].center).norm() <= 2 * cover.balls[b].radius) ++count;
    rep.A = std::max(rep.A, static_cast<double>(count));
  }

  std::vector<double> mass(cover.balls.size(), -1);
  auto mass_of = [&](int q) {
    if (mass[q] < 0) mass[q] = ball_mass(cover, domain, rho, q);
    return mass[q];
  };
  std::map<std::pair<int, int>, double> ratio;
  for (std::size_t q = 0; q < cover.chains.size(); ++q) {
    const auto& chain = cover.chains[q];
    if (chain.empty() || chain.front() != cover.central_index || chain.back() != static_cast<int>(q))
      throw PreconditionError("verify_cover: malformed chain for ball " + std::to_string(q));
    const CoverBall& last = cover.balls[q];
    for (std::size_t j = 0; j < chain.size(); ++j) {
      const CoverBall& bj = cover.balls[chain[j]];
      rep.B = std::max(rep.B, ((bj.center - last.center).norm() + last.radius) / bj.radius);
      if (j + 1 == chain.size()) continue;
      auto key = std::minmax(chain[j], chain[j + 1]);
      auto it = ratio.find(key);
      if (it == ratio.end()) {
        double inter = intersection_mass(cover, domain, rho, key.first, key.second);
        double big = std::max(mass_of(key.first), mass_of(key.second));
        it = ratio.emplace(key, inter > 0 ? big / inter : std::numeric_limits<double>::infinity()).first;
      }
      rep.C = std::max(rep.C, it->second);
    }
  }
  rep.pass = std::isfinite(rep.A) && std::isfinite(rep.B) && std::isfinite(rep.C);
  return rep;
}

GluingResult gluing_check(const BomanCover& cover, const DiscreteMeasure& rho, const Eigen::VectorXd& f) {
  if (f.size() != rho.size()) throw PreconditionError("gluing_check: f must have one value per support point");
  GluingResult g;
  if (f.size() == 0 || f.maxCoeff() == f.minCoeff()) return g;
  g.lhs = variance(f, rho.weights());
  for (const auto& b : cover.balls) {
    std::vector<double> vals, w;
    for (Eigen::Index i = 0; i < rho.size(); ++i)
      if (rho.weights()[i] > 0 && (rho.point(i) - b.center).norm() <= b.radius) {
        vals.push_back(f[i]);
        w.push_back(rho.weights()[i]);
      }
    if (vals.size() < 2) continue;
    Eigen::Map<Eigen::VectorXd> fv(vals.data(), static_cast<Eigen::Index>(vals.size())), wv(w.data(), static_cast<Eigen::Index>(w.size()));
    g.rhs += wv.sum() * variance(fv, Eigen::VectorXd(wv / wv.sum()));
  }
  g.kappa_hat = g.rhs > 0 ? g.lhs / g.rhs : (g.lhs > 0 ? std::numeric_limits<double>::infinity() : 1.0);
  return g;
}

GluingResult gluing_check(const BomanCover& cover, const JohnDomain& domain, const DiscreteMeasure& rho,
                          const std::function<double(const PointRef&)>& f, int quadrature_nodes) {
  if (quadrature_nodes < 2) throw PreconditionError("gluing_check: need at least 2 quadrature nodes");
  Eigen::VectorXd fx(rho.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i) fx[i] = f(rho.point(i));
  GluingResult g;
  if (fx.size() == 0 || fx.maxCoeff() == fx.minCoeff()) return g;
  g.lhs = variance(fx, rho.weights());
  const PointSet nodes = ball_quadrature(domain.spec.dim, quadrature_nodes);
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(quadrature_nodes, 1.0 / quadrature_nodes);
  Eigen::VectorXd local(quadrature_nodes);
  for (std::size_t q = 0; q < cover.balls.size(); ++q) {
    const CoverBall& b = cover.balls[q];
    for (int k = 0; k < quadrature_nodes; ++k) local[k] = f(b.center + b.radius * nodes.col(k));
    g.rhs += ball_mass(cover, domain, rho, static_cast<int>(q)) * variance(local, uniform);
  }
  g.kappa_hat = g.rhs > 0 ? g.lhs / g.rhs : (g.lhs > 0 ? std::numeric_limits<double>::infinity() : 1.0);
  return g;
}

}  // namespace otstab
