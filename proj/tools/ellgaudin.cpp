// Command-line front end over the C API.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ellgaudin/ellgaudin.h"

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitError = 3;

int report_error(eg_status s, const char* what) {
  std::fprintf(stderr, "error: %s: %s (%s)\n", what, eg_last_error(), eg_status_name(s));
  return s == EG_ERR_USAGE || s == EG_ERR_IO ? kExitUsage : kExitError;
}

struct ConfigDeleter {
  void operator()(eg_config* c) const { eg_config_free(c); }
};
struct ResultDeleter {
  void operator()(eg_result* r) const { eg_result_free(r); }
};

struct VerifyArgs {
  std::string suites, tau, hbar, sites, json_path, config_path;
  int n = 0, samples = 0, threads = -1;
  std::uint64_t seed = 0;
  double tol = 0.0;
  bool no_timing = false, quiet = false;
};

int verify(const VerifyArgs& a, CLI::App& sub) {
  eg_config* raw = nullptr;
  if (eg_status s = eg_config_new(&raw); s != EG_OK) return report_error(s, "config");
  std::unique_ptr<eg_config, ConfigDeleter> cfg(raw);

  // file defaults first, flags override
  std::string path = a.config_path;
  if (path.empty())
    if (const char* env = std::getenv("ELLGAUDIN_CONFIG"); env && *env) path = env;
  if (!path.empty())
    if (eg_status s = eg_config_load_file(cfg.get(), path.c_str()); s != EG_OK) return report_error(s, "config file");

  auto given = [&](const char* name) { return sub.count(name) > 0; };
  auto complex_arg = [&](const std::string& text, double& re, double& im) {
    return eg_parse_complex(text.c_str(), &re, &im);
  };
  eg_status s = EG_OK;
  if (s == EG_OK && given("--suites")) s = eg_config_set_suites(cfg.get(), a.suites.c_str());
  if (s == EG_OK && given("--n")) s = eg_config_set_n(cfg.get(), a.n);
  if (s == EG_OK && given("--tau")) {
    double re, im;
    s = complex_arg(a.tau, re, im);
    if (s == EG_OK) s = eg_config_set_tau(cfg.get(), re, im);
  }
  if (s == EG_OK && given("--hbar")) {
    double re, im;
    s = complex_arg(a.hbar, re, im);
    if (s == EG_OK) s = eg_config_set_hbar(cfg.get(), re, im);
  }
  if (s == EG_OK && given("--seed")) s = eg_config_set_seed(cfg.get(), a.seed);
  if (s == EG_OK && given("--tol")) s = eg_config_set_tol(cfg.get(), a.tol);
  if (s == EG_OK && given("--samples")) s = eg_config_set_samples(cfg.get(), a.samples);
  if (s == EG_OK && given("--threads")) s = eg_config_set_threads(cfg.get(), a.threads);
  if (s == EG_OK && given("--sites")) s = eg_config_set_sites(cfg.get(), a.sites.c_str());
  if (s == EG_OK) s = eg_config_validate(cfg.get());
  if (s != EG_OK) return report_error(s, "invalid configuration");

  eg_result* rraw = nullptr;
  if (eg_status rs = eg_run(cfg.get(), &rraw); rs != EG_OK) return report_error(rs, "run");
  std::unique_ptr<eg_result, ResultDeleter> res(rraw);

  const bool json_stdout = a.json_path == "-";
  std::FILE* table = json_stdout ? stderr : stdout;
  if (!a.quiet) {
    for (size_t i = 0; i < eg_result_count(res.get()); ++i) {
      eg_report r;
      eg_result_report(res.get(), i, &r);
      std::fprintf(table, "%-4s %-36s max_rel=%.3e tol=%.1e  %s", r.pass ? "PASS" : "FAIL", r.identity_id, r.max_rel,
                   r.tol, r.paper_anchor);
      if (std::string(r.status) != "ok") std::fprintf(table, "  [%s: %s]", r.status, r.message);
      std::fprintf(table, "\n");
    }
    std::fprintf(table, "passed %zu, failed %zu\n", eg_result_passed(res.get()), eg_result_failed(res.get()));
  }

  if (!a.json_path.empty()) {
    const char* doc = nullptr;
    if (eg_status js = eg_result_json(res.get(), a.no_timing ? 0 : 1, &doc); js != EG_OK)
      return report_error(js, "serialize");
    if (json_stdout) {
      std::fputs(doc, stdout);
    } else {
      std::ofstream out(a.json_path, std::ios::binary);
      out << doc;
      if (!out) {
        std::fprintf(stderr, "error: cannot write '%s'\n", a.json_path.c_str());
        return kExitError;
      }
    }
  }
  return eg_result_exit_status(res.get()) ? kExitFail : 0;
}

int list_identities() {
  for (size_t i = 0; i < eg_catalogue_count(); ++i) {
    const char *id, *anchor, *suite;
    double tol;
    eg_catalogue_entry(i, &id, &anchor, &suite, &tol);
    std::printf("%-24s %-8s %-7.0e %s\n", id, suite, tol, anchor);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual verification of elliptic dynamical R-matrix, Manin matrix and Gaudin identities"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(eg_version()));

  VerifyArgs a;
  CLI::App* v = app.add_subcommand("verify", "run verification suites");
  v->add_option("--suites", a.suites, "comma list of theta,felder,manin,commfam,gaudin,sl2,trig,newton,all");
  v->add_option("--n", a.n, "rank, 1..3");
  v->add_option("--tau", a.tau, "modulus, e.g. 0+1.1i");
  v->add_option("--hbar", a.hbar, "step, e.g. 0.137+0.071i");
  v->add_option("--seed", a.seed, "master seed");
  v->add_option("--tol", a.tol, "base tolerance; every tolerance class scales with it (default 1e-9)");
  v->add_option("--samples", a.samples, "sample points per identity");
  v->add_option("--sites", a.sites, "Gaudin sites, e.g. defining@0.1,dual@0.45");
  v->add_option("--threads", a.threads, "worker threads, 0 for all cores");
  v->add_option("--json", a.json_path, "write the JSON report here ('-' for stdout)");
  v->add_option("--config", a.config_path, "JSON config file (default: $ELLGAUDIN_CONFIG)");
  v->add_flag("--no-timing", a.no_timing, "write wall_time_ms as 0");
  v->add_flag("--quiet", a.quiet, "no table");

  CLI::App* l = app.add_subcommand("list-identities", "print every identity id with its anchor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  if (*l) return list_identities();
  return verify(a, *v);
}
