#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "otstab/boman.hpp"
#include "otstab/crofton.hpp"
#include "otstab/lab.hpp"
#include "otstab/transport.hpp"

namespace otstab {

// Shortest text that parses back to the same double.
std::string format_double(double x);

// "coord_0,...,coord_k,weight"
void write_measure_csv(std::ostream& out, const DiscreteMeasure& m);
// Validates the header, the column count and every point against spec; weights are renormalized.
DiscreteMeasure read_measure_csv(std::istream& in, const ManifoldSpec& spec);

// "point_index,phi,target_index,gap"; an infinite gap is written as inf.
void write_potential_csv(std::ostream& out, const KantorovichPotential& phi, const TransportAssignment& assignment);

// {"balls":[{"center":[...],"radius":r}],"central":i,"chains":[[...]]}
nlohmann::json cover_json(const BomanCover& cover);
// {"A","B","C","kappa_hat_max","pass"}
nlohmann::json verification_json(const CoverReport& report, double kappa_hat_max);

// "T,n,mean,std_error,unnormalized_integral"
void write_crofton_csv(std::ostream& out, const std::vector<CrossingEstimate>& rows);

// {"eps","iterations","residual","annealing_gap","levels":[...]}; eps and residual of the last level, total iterations.
nlohmann::json solver_report_json(const AnnealedResult<double>& r);

nlohmann::json exponent_report_json(const ExponentReport& r);

void write_sharpness_csv(std::ostream& out, int d, const std::vector<SharpnessRecord>& rows);
void write_sharpness_numeric_csv(std::ostream& out, const SharpnessNumeric& r);
void write_stability_csv(std::ostream& out, const std::vector<StabilityPair>& pairs);
void write_derivative_csv(std::ostream& out, const std::vector<DerivativeCheck>& rows);
void write_concavity_csv(std::ostream& out, const std::vector<ConcavityCheck>& rows);

using Config = std::map<std::string, std::string>;

// Flat "key = value" lines; '#' starts a comment, blank lines are skipped. Duplicate keys are a ConfigError.
Config parse_config(std::istream& in);
Config read_config_file(const std::string& path);

// 64-bit FNV-1a over the sorted "key=value\n" lines, as 16 hex digits.
std::string config_hash(const Config& cfg);

// Output of `git describe --always --dirty` in the working directory, or "unknown".
std::string git_describe();

// {"git_describe","seed","config_hash","config"}
nlohmann::json run_manifest(const Config& cfg, std::uint64_t seed, const std::string& describe);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace otstab
