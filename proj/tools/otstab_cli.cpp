#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "otstab/errors.hpp"
#include "otstab/io.hpp"

using namespace otstab;
namespace fs = std::filesystem;

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    double x = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0') throw ConfigError("not a number list: '" + text + "'");
    out.push_back(x);
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

// "start:stop:ratio" or an explicit comma list.
std::vector<double> parse_schedule(const std::string& text) {
  if (text.find(':') == std::string::npos) return parse_list(text);
  std::stringstream ss(text);
  std::string a, b, c;
  std::getline(ss, a, ':');
  std::getline(ss, b, ':');
  std::getline(ss, c);
  if (c.empty()) throw ConfigError("eps schedule must be start:stop:ratio");
  return geometric_schedule(parse_list(a).at(0), parse_list(b).at(0), parse_list(c).at(0));
}

DiscreteMeasure load_measure(const std::string& path, const ManifoldSpec& spec) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_measure_csv(in, spec);
}

// Effective option values of a subcommand, after defaults and config injection.
Config effective_config(const CLI::App& sub) {
  Config cfg;
  for (const CLI::Option* opt : sub.get_options()) {
    std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name == "out") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
      if (opt->get_items_expected_max() == 0) value = "true";
    } else {
      value = opt->get_items_expected_max() == 0 ? "false" : opt->get_default_str();
    }
    cfg[name] = value;
  }
  cfg["command"] = sub.get_name();
  return cfg;
}

struct Output {
  fs::path dir;

  void file(const std::string& name, const std::string& content) const { write_text_file((dir / name).string(), content); }
  void json(const std::string& name, const nlohmann::json& j) const { file(name, j.dump(2) + "\n"); }
  void manifest(const CLI::App& sub, std::uint64_t seed) const { json("manifest.json", run_manifest(effective_config(sub), seed, git_describe())); }
};

Output make_output(const std::string& dir) {
  fs::create_directories(dir);
  return {fs::path(dir)};
}

// Appends "--key value" for config keys the command line leaves unset.
std::vector<std::string> inject_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t k = 0; k + 1 < args.size(); ++k)
    if (args[k] == "--config") path = args[k + 1];
  if (path.empty()) return args;
  for (const auto& [key, value] : read_config_file(path)) {
    const std::string flag = "--" + key;
    if (std::find(args.begin(), args.end(), flag) != args.end()) continue;
    if (value == "true") args.push_back(flag);
    else if (value != "false") {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

struct SolveArgs {
  std::string spec, rho, mu, schedule = "1:1e-3:0.5", out = ".";
  double tol = 1e-8;
};

int run_solve(const CLI::App& sub, const SolveArgs& a) {
  auto spec = parse_spec(a.spec);
  auto rho = load_measure(a.rho, spec), mu = load_measure(a.mu, spec);
  SolverOptions opt;
  opt.tol = a.tol;
  auto r = potential_from_target(rho, mu, parse_schedule(a.schedule), opt);
  auto out = make_output(a.out);
  std::ostringstream hard, soft;
  write_potential_csv(hard, r.potential, r.assignment);
  write_potential_csv(soft, r.smoothed, r.assignment);
  out.file("potential.csv", hard.str());
  out.file("potential_smoothed.csv", soft.str());
  auto report = solver_report_json(r.solver);
  report["pushforward_residual"] = r.pushforward_residual;
  out.json("solver.json", report);
  out.manifest(sub, 0);
  std::cout << "solve: eps " << format_double(report["eps"].get<double>()) << ", iterations " << report["iterations"]
            << ", residual " << format_double(report["residual"].get<double>()) << ", pushforward residual "
            << format_double(r.pushforward_residual) << "\n";
  return 0;
}

struct SharpnessArgs {
  int d = 2;
  std::string eps_list = "0.001,0.0015849,0.0025119,0.0039811,0.0063096,0.01", out = ".";
  bool numeric = false;
  long n_rho = 2000, grid_m = 800;
  double eps_final = 1e-3;
  std::string numeric_eps = "0.05,0.079245,0.12559,0.19905,0.31548,0.5";
};

int run_sharpness(const CLI::App& sub, const SharpnessArgs& a) {
  auto out = make_output(a.out);
  std::vector<SharpnessRecord> rows;
  PairList pairs;
  for (double e : parse_list(a.eps_list)) {
    rows.push_back(sharpness_closed_form(a.d, e));
    pairs.emplace_back(rows.back().w1, rows.back().variance);
  }
  std::ostringstream csv;
  write_sharpness_csv(csv, a.d, rows);
  out.file("sharpness.csv", csv.str());
  nlohmann::json summary{{"d", a.d}, {"alpha", sharpness_exponent(a.d)}};
  if (pairs.size() >= 3) {
    auto rep = exponent_report(pairs, 1.0);
    summary["closed_form"] = exponent_report_json(rep);
    std::cout << "sharpness d=" << a.d << ": variance slope " << format_double(rep.fit.slope) << ", alpha estimate "
              << format_double(rep.fit.slope / 2) << " (alpha_d " << format_double(sharpness_exponent(a.d)) << ")\n";
  }
  if (a.numeric) {
    SharpnessNumericConfig cfg;
    cfg.n_rho = a.n_rho;
    cfg.grid_m = a.grid_m;
    cfg.eps_values = parse_list(a.numeric_eps);
    cfg.schedule = geometric_schedule(1.0, a.eps_final, 0.5);
    auto num = sharpness_numeric(a.d, cfg);
    std::ostringstream ncsv;
    write_sharpness_numeric_csv(ncsv, num);
    out.file("sharpness_numeric.csv", ncsv.str());
    summary["numeric"] = exponent_report_json(num.report);
    summary["numeric_closed_slope"] = num.closed_slope;
    std::cout << "numeric: variance slope " << format_double(num.report.fit.slope) << " (closed form on the same eps "
              << format_double(num.closed_slope) << ")\n";
  }
  out.json("exponent.json", summary);
  out.manifest(sub, 0);
  return 0;
}

struct StabilityArgs {
  std::string spec = "sphere:2", domain, family = "rotating-cap", out = ".";
  int pairs = 20;
  std::uint64_t seed = 7;
  long n_rho = 1000, grid_m = 400;
  double kappa = 4, eps_final = 1e-2, w1_lo = 1e-3, w1_hi = 1e-1;
};

int run_stability(const CLI::App& sub, const StabilityArgs& a) {
  StabilityConfig cfg;
  cfg.spec = parse_spec(a.spec);
  if (!a.domain.empty()) {
    auto d = parse_spec(a.domain);
    if (!same_manifold(d, cfg.spec)) throw DomainError("stability: --domain " + a.domain + " does not live on " + a.spec);
    cfg.spec = d;
  }
  if (a.family == "rotating-cap") cfg.family = TargetFamily::rotating_cap;
  else if (a.family == "sliding-bump") cfg.family = TargetFamily::sliding_bump;
  else throw ConfigError("unknown family '" + a.family + "'");
  cfg.n_pairs = a.pairs;
  cfg.seed = a.seed;
  cfg.n_rho = a.n_rho;
  cfg.grid_m = a.grid_m;
  cfg.kappa = a.kappa;
  cfg.w1_lo = a.w1_lo;
  cfg.w1_hi = a.w1_hi;
  cfg.schedule = geometric_schedule(1.0, a.eps_final, 0.5);
  auto r = stability_batch(cfg);
  auto out = make_output(a.out);
  std::ostringstream csv;
  write_stability_csv(csv, r.pairs);
  out.file("stability.csv", csv.str());
  out.json("stability.json", {{"potentials", exponent_report_json(r.potentials)}, {"maps", exponent_report_json(r.maps)}});
  out.manifest(sub, a.seed);
  std::cout << "potentials: slope " << format_double(r.potentials.fit.slope) << ", max_ratio " << format_double(r.potentials.max_ratio)
            << ", worst decade rise " << format_double(r.potentials.worst_rise) << "\n"
            << "maps: max_ratio " << format_double(r.maps.max_ratio) << ", worst decade rise " << format_double(r.maps.worst_rise) << "\n";
  return r.potentials.decade_stable && r.maps.decade_stable ? 0 : 3;
}

struct BomanArgs {
  std::string domain = "ball:2:1.0", out = ".";
  long samples = 500;
  double radius = 0.25;
  int functions = 100;
  std::uint64_t seed = 1;
};

int run_boman(const CLI::App& sub, const BomanArgs& a) {
  auto spec = parse_spec(a.domain);
  auto dom = john_domain(spec);
  auto rho = from_samples(spec, sample_uniform(spec, a.samples, a.seed));
  auto cover = build_cover(dom, rho, a.radius);
  PointSet test(spec.ambient_dim(), rho.size() + 1000);
  test << rho.points(), sample_uniform(spec, 1000, a.seed + 1);
  auto rep = verify_cover(cover, dom, rho, test);
  std::mt19937_64 rng(a.seed + 2);
  std::normal_distribution<double> g(0, 1);
  double kappa = 0;
  for (int k = 0; k < a.functions; ++k) {
    Eigen::VectorXd coef(spec.dim), z(spec.dim);
    for (int i = 0; i < spec.dim; ++i) coef[i] = g(rng), z[i] = g(rng);
    double s = g(rng);
    auto f = [&](const PointRef& x) { return coef.dot(x) + s * std::sin(3 * (x - z).norm()); };
    kappa = std::max(kappa, gluing_check(cover, dom, rho, f).kappa_hat);
  }
  auto out = make_output(a.out);
  out.json("cover.json", cover_json(cover));
  out.json("verification.json", verification_json(rep, kappa));
  out.manifest(sub, a.seed);
  std::cout << "boman: " << cover.balls.size() << " balls, A " << format_double(rep.A) << ", B " << format_double(rep.B) << ", C "
            << format_double(rep.C) << ", kappa_hat_max " << format_double(kappa) << "\n";
  return rep.pass ? 0 : 3;
}

struct CroftonArgs {
  std::string domain = "ball:2:1.0", horizon = "0.5,1", out = ".";
  long samples = 100000;
  std::uint64_t seed = 1;
};

int run_crofton(const CLI::App& sub, const CroftonArgs& a) {
  auto spec = parse_spec(a.domain);
  std::vector<CrossingEstimate> rows;
  for (double T : parse_list(a.horizon)) rows.push_back(estimate_crossing_integral(spec, T, a.samples, a.seed));
  auto out = make_output(a.out);
  std::ostringstream csv;
  write_crofton_csv(csv, rows);
  out.file("crofton.csv", csv.str());
  out.manifest(sub, a.seed);
  for (const auto& r : rows)
    std::cout << "crofton T=" << format_double(r.T) << ": integral " << format_double(r.unnormalized) << " +- "
              << format_double(r.unnormalized_std_error) << "\n";
  return 0;
}

struct DerivativeArgs {
  int instances = 20;
  std::uint64_t seed = 19;
  std::string out = ".";
};

int run_derivative_checks(const CLI::App& sub, const DerivativeArgs& a) {
  auto checks = derivative_checks(a.instances, a.seed);
  auto conc = strong_concavity_suite();
  auto out = make_output(a.out);
  std::ostringstream d, c;
  write_derivative_csv(d, checks);
  write_concavity_csv(c, conc);
  out.file("derivatives.csv", d.str());
  out.file("concavity.csv", c.str());
  out.manifest(sub, a.seed);
  double worst = 0;
  for (const auto& x : checks) worst = std::max(worst, x.worst());
  int violations = 0;
  for (const auto& x : conc) violations += x.violations;
  std::cout << "derivative checks: " << checks.size() << " instances, worst relative error " << format_double(worst) << "\n"
            << "strong concavity: " << conc.size() << " weighted balls, " << violations << " violations\n";
  return worst <= 1e-5 && violations == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-transport stability experiments"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::string config;
  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config, "flat key = value file with option defaults"); };

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "potential and map for one target measure");
  s->add_option("--spec", solve.spec, "manifold spec string")->required();
  s->add_option("--rho", solve.rho, "source measure csv")->required();
  s->add_option("--mu", solve.mu, "target measure csv")->required();
  s->add_option("--eps-schedule", solve.schedule, "start:stop:ratio or a comma list");
  s->add_option("--tol", solve.tol, "residual tolerance per level");
  s->add_option("--out", solve.out, "output directory");
  add_config(s);

  SharpnessArgs sharp;
  auto* sh = app.add_subcommand("sharpness", "closed-form and numerical sharpness family");
  sh->add_option("--d", sharp.d, "dimension");
  sh->add_option("--eps-list", sharp.eps_list, "comma list of core radii for the closed form");
  sh->add_flag("--numeric", sharp.numeric, "also run the transport pipeline (d = 2)");
  sh->add_option("--numeric-eps", sharp.numeric_eps, "comma list of core radii for the numerical run");
  sh->add_option("--n-rho", sharp.n_rho, "source points");
  sh->add_option("--grid-m", sharp.grid_m, "target grid size");
  sh->add_option("--eps-final", sharp.eps_final, "last entropic level");
  sh->add_option("--out", sharp.out, "output directory");
  add_config(sh);

  StabilityArgs stab;
  auto* st = app.add_subcommand("stability", "potential and map discrepancies over a target family");
  st->add_option("--spec", stab.spec, "manifold spec string");
  st->add_option("--domain", stab.domain, "optional domain spec on the same manifold");
  st->add_option("--family", stab.family, "rotating-cap or sliding-bump");
  st->add_option("--pairs", stab.pairs, "number of target pairs");
  st->add_option("--seed", stab.seed, "sampling seed");
  st->add_option("--n-rho", stab.n_rho, "source points");
  st->add_option("--grid-m", stab.grid_m, "target grid size");
  st->add_option("--kappa", stab.kappa, "family concentration");
  st->add_option("--eps-final", stab.eps_final, "last entropic level");
  st->add_option("--w1-lo", stab.w1_lo, "smallest W1 separation");
  st->add_option("--w1-hi", stab.w1_hi, "largest W1 separation");
  st->add_option("--out", stab.out, "output directory");
  add_config(st);

  BomanArgs bom;
  auto* bo = app.add_subcommand("boman", "chain cover of a John domain");
  bo->add_option("--domain", bom.domain, "ball, box or annulus spec string");
  bo->add_option("--samples", bom.samples, "support points");
  bo->add_option("--radius", bom.radius, "radius cap R");
  bo->add_option("--functions", bom.functions, "random Lipschitz functions for the gluing batch");
  bo->add_option("--seed", bom.seed, "sampling seed");
  bo->add_option("--out", bom.out, "output directory");
  add_config(bo);

  CroftonArgs cro;
  auto* cr = app.add_subcommand("crofton", "Monte Carlo geodesic crossing integral");
  cr->add_option("--domain", cro.domain, "spec string with a domain");
  cr->add_option("--horizon", cro.horizon, "comma list of horizons T");
  cr->add_option("--samples", cro.samples, "proposals per horizon");
  cr->add_option("--seed", cro.seed, "sampling seed");
  cr->add_option("--out", cro.out, "output directory");
  add_config(cr);

  DerivativeArgs der;
  auto* de = app.add_subcommand("derivative-checks", "finite-difference and strong-concavity suites");
  de->add_option("--instances", der.instances, "random instances");
  de->add_option("--seed", der.seed, "instance seed");
  de->add_option("--out", der.out, "output directory");
  add_config(de);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = inject_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*s) return run_solve(*s, solve);
    if (*sh) return run_sharpness(*sh, sharp);
    if (*st) return run_stability(*st, stab);
    if (*bo) return run_boman(*bo, bom);
    if (*cr) return run_crofton(*cr, cro);
    if (*de) return run_derivative_checks(*de, der);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
