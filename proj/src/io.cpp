#include "otstab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "otstab/errors.hpp"

namespace otstab {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(ws) - a + 1);
}

double parse_double(const std::string& text, const std::string& where) {
  std::string t = trim(text);
  char* end = nullptr;
  double x = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) throw ConfigError(where + ": not a number: '" + t + "'");
  return x;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// JSON has no infinity; non-finite values become strings.
nlohmann::json number_json(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(format_double(x)); }

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

void write_measure_csv(std::ostream& out, const DiscreteMeasure& m) {
  const Eigen::Index k = m.points().rows();
  for (Eigen::Index a = 0; a < k; ++a) out << "coord_" << a << ",";
  out << "weight\n";
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    for (Eigen::Index a = 0; a < k; ++a) out << format_double(m.points()(a, i)) << ",";
    out << format_double(m.weights()[i]) << "\n";
  }
}

DiscreteMeasure read_measure_csv(std::istream& in, const ManifoldSpec& spec) {
  const int k = spec.ambient_dim();
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("measure csv: empty input");
  auto head = split(trim(line), ',');
  if (static_cast<int>(head.size()) != k + 1) throw DomainError("measure csv: expected " + std::to_string(k) + " coordinates for " + to_string(spec));
  for (int a = 0; a < k; ++a)
    if (trim(head[a]) != "coord_" + std::to_string(a)) throw ConfigError("measure csv: bad header column '" + head[a] + "'");
  if (trim(head[k]) != "weight") throw ConfigError("measure csv: last header column must be 'weight'");
  std::vector<double> coords, weights;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split(trim(line), ',');
    const std::string where = "measure csv line " + std::to_string(row);
    if (static_cast<int>(cells.size()) != k + 1) throw ConfigError(where + ": expected " + std::to_string(k + 1) + " fields");
    for (int a = 0; a < k; ++a) coords.push_back(parse_double(cells[a], where));
    weights.push_back(parse_double(cells[k], where));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(weights.size());
  if (n == 0) throw ConfigError("measure csv: no rows");
  PointSet pts = Eigen::Map<PointSet>(coords.data(), k, n);
  if (spec.domain)
    for (Eigen::Index i = 0; i < n; ++i)
      if (!inside(spec, pts.col(i))) throw DomainError("measure csv: point " + std::to_string(i) + " lies outside " + to_string(spec));
  return from_samples(spec, std::move(pts), Eigen::Map<Eigen::VectorXd>(weights.data(), n));
}

void write_potential_csv(std::ostream& out, const KantorovichPotential& phi, const TransportAssignment& assignment) {
  if (static_cast<Eigen::Index>(assignment.target_index.size()) != phi.phi.size())
    throw PreconditionError("potential csv: potential and assignment lengths differ");
  out << "point_index,phi,target_index,gap\n";
  for (Eigen::Index i = 0; i < phi.phi.size(); ++i)
    out << i << "," << format_double(phi.phi[i]) << "," << assignment.target_index[i] << "," << format_double(assignment.gap[i]) << "\n";
}

nlohmann::json cover_json(const BomanCover& cover) {
  nlohmann::json j;
  auto balls = nlohmann::json::array();
  for (const auto& b : cover.balls) balls.push_back({{"center", vector_json(b.center)}, {"radius", b.radius}});
  j["balls"] = std::move(balls);
  j["central"] = cover.central_index;
  j["chains"] = cover.chains;
  return j;
}

nlohmann::json verification_json(const CoverReport& report, double kappa_hat_max) {
  return {{"A", number_json(report.A)},
          {"B", number_json(report.B)},
          {"C", number_json(report.C)},
          {"kappa_hat_max", number_json(kappa_hat_max)},
          {"pass", report.pass}};
}

void write_crofton_csv(std::ostream& out, const std::vector<CrossingEstimate>& rows) {
  out << "T,n,mean,std_error,unnormalized_integral\n";
  for (const auto& r : rows)
    out << format_double(r.T) << "," << r.n << "," << format_double(r.mean) << "," << format_double(r.std_error) << ","
        << format_double(r.unnormalized) << "\n";
}

nlohmann::json solver_report_json(const AnnealedResult<double>& r) {
  nlohmann::json j;
  auto levels = nlohmann::json::array();
  long total = 0;
  for (const auto& l : r.levels) {
    levels.push_back({{"eps", l.eps}, {"iterations", l.iterations}, {"residual", number_json(l.residual)}});
    total += l.iterations;
  }
  j["eps"] = r.levels.empty() ? 0.0 : r.levels.back().eps;
  j["iterations"] = total;
  j["residual"] = r.levels.empty() ? 0.0 : r.levels.back().residual;
  j["annealing_gap"] = number_json(r.annealing_gap);
  j["levels"] = std::move(levels);
  return j;
}

nlohmann::json exponent_report_json(const ExponentReport& r) {
  nlohmann::json j;
  auto pairs = nlohmann::json::array();
  for (auto [w, y] : r.pairs) pairs.push_back({number_json(w), number_json(y)});
  auto decades = nlohmann::json::array();
  for (const auto& b : r.decades) decades.push_back({{"decade", b.decade}, {"count", b.count}, {"max_ratio", number_json(b.max_ratio)}});
  j["pairs"] = std::move(pairs);
  j["envelope"] = r.envelope;
  j["slope"] = r.fit.slope;
  j["intercept"] = r.fit.intercept;
  j["r_squared"] = r.fit.r_squared;
  j["dropped"] = r.fit.dropped;
  j["max_ratio"] = number_json(r.max_ratio);
  j["valid"] = r.valid;
  j["decades"] = std::move(decades);
  j["worst_rise"] = number_json(r.worst_rise);
  j["spread"] = number_json(r.spread);
  j["decade_stable"] = r.decade_stable;
  return j;
}

void write_sharpness_csv(std::ostream& out, int d, const std::vector<SharpnessRecord>& rows) {
  out << "d,eps,mean_diff,second_moment,variance,w1\n";
  for (const auto& r : rows)
    out << d << "," << format_double(r.eps) << "," << format_double(r.mean_diff) << "," << format_double(r.second_moment) << ","
        << format_double(r.variance) << "," << format_double(r.w1) << "\n";
}

void write_sharpness_numeric_csv(std::ostream& out, const SharpnessNumeric& r) {
  out << "eps,w1,w1_closed,variance,variance_closed,rel_error,iterations,residual\n";
  for (const auto& row : r.rows)
    out << format_double(row.eps) << "," << format_double(row.w1) << "," << format_double(row.w1_closed) << ","
        << format_double(row.variance) << "," << format_double(row.variance_closed) << "," << format_double(row.rel_error) << ","
        << row.iterations << "," << format_double(row.residual) << "\n";
}

void write_stability_csv(std::ostream& out, const std::vector<StabilityPair>& pairs) {
  out << "pair_index,shift,w1,potential_variance,map_discrepancy,iterations\n";
  for (const auto& p : pairs)
    out << p.index << "," << format_double(p.shift) << "," << format_double(p.w1) << "," << format_double(p.potential_variance) << ","
        << format_double(p.map_discrepancy) << "," << p.iterations << "\n";
}

void write_derivative_csv(std::ostream& out, const std::vector<DerivativeCheck>& rows) {
  out << "instance,spec,n,m,eps,grad_K,hess_K,grad_I,hess_I\n";
  for (const auto& r : rows)
    out << r.instance << "," << to_string(r.spec) << "," << r.n << "," << r.m << "," << format_double(r.eps) << ","
        << format_double(r.grad_K) << "," << format_double(r.hess_K) << "," << format_double(r.grad_I) << ","
        << format_double(r.hess_I) << "\n";
}

void write_concavity_csv(std::ostream& out, const std::vector<ConcavityCheck>& rows) {
  out << "instance,spec,support,c0,worst_slack,directions,violations\n";
  for (const auto& r : rows)
    out << r.instance << "," << to_string(r.spec) << "," << r.support << "," << format_double(r.c0) << ","
        << format_double(r.worst_slack) << "," << r.directions << "," << r.violations << "\n";
}

Config parse_config(std::istream& in) {
  Config cfg;
  std::string line;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(row) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(row) + ": empty key");
    if (!cfg.emplace(key, value).second) throw ConfigError("config line " + std::to_string(row) + ": duplicate key '" + key + "'");
  }
  return cfg;
}

Config read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

std::string config_hash(const Config& cfg) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& [k, v] : cfg)
    for (char c : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string git_describe() {
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen("git describe --always --dirty 2>/dev/null", "r"), pclose);
  if (!pipe) return "unknown";
  std::string out;
  char buf[256];
  while (std::fgets(buf, sizeof buf, pipe.get())) out += buf;
  out = trim(out);
  return out.empty() ? "unknown" : out;
}

nlohmann::json run_manifest(const Config& cfg, std::uint64_t seed, const std::string& describe) {
  return {{"git_describe", describe}, {"seed", seed}, {"config_hash", config_hash(cfg)}, {"config", cfg}};
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
}

}  // namespace otstab
