#pragma once

#include <string>
#include <vector>

#include "ellgaudin/report.hpp"

namespace ellgaudin {

struct SiteSpec {
  bool dual = false;
  cplx point;
};

struct RunConfig {
  int n = 2;
  std::vector<std::string> suites{"all"};
  cplx tau{0.0, 1.1};
  cplx hbar{0.137, 0.071};
  std::uint64_t seed = 1;
  double tol = 1e-9;
  int samples = 8;
  std::vector<SiteSpec> sites{{false, {0.1, 0.0}}, {true, {0.45, 0.0}}};
  std::string output_path;
  int threads = 0;  // 0: hardware concurrency

  // Throws UsageError on violated invariants.
  void validate() const;
};

// "0+1.1i", "-0.2i", "0.137+0.071i", "3", "1e-3-2e-2i"
cplx parse_complex(const std::string& s);
// "defining@0.1,dual@0.45+0.02i"
std::vector<SiteSpec> parse_sites(const std::string& s);
std::vector<std::string> parse_suites(const std::string& csv);

enum class TolClass { elliptic, determinant, limit, trend };
double class_base(TolClass c);

struct CatalogueEntry {
  std::string id;  // base id; reports may append ":params"
  std::string anchor;
  std::string suite;
  TolClass tol_class;
};
const std::vector<CatalogueEntry>& catalogue();
const std::vector<std::string>& suite_names();

struct RunResult {
  RunConfig config;
  std::vector<ResidualReport> reports;  // sorted by identity_id
  int passed() const;
  int failed() const;
  int exit_status() const { return failed() ? 1 : 0; }
};

RunResult run(const RunConfig& config);

std::string serialize(const RunResult& r, bool include_timing = true);
RunResult deserialize(const std::string& json);
// Overlays the fields present in a JSON config object.
void apply_config_json(RunConfig& c, const std::string& json);

}  // namespace ellgaudin
