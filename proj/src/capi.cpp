#include <fstream>
#include <memory>
#include <sstream>

#include "ellgaudin/ellgaudin.h"
#include "ellgaudin/runner.hpp"

using namespace ellgaudin;

struct eg_config {
  RunConfig cfg;
};

struct eg_result {
  RunResult res;
  std::string json[2];
  bool have_json[2] = {false, false};
};

namespace {

thread_local std::string g_last_error;

eg_status fail(eg_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

eg_status map_error(const Error& e) {
  return static_cast<eg_status>(static_cast<int>(e.code()));
}

// Runs f, translating exceptions into status codes.
template <class F>
eg_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return EG_OK;
  } catch (const Error& e) {
    return fail(map_error(e), e.what());
  } catch (const std::bad_alloc&) {
    return fail(EG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(EG_ERR_INTERNAL, e.what());
  }
}

#define EG_REQUIRE(p) \
  if (!(p)) return fail(EG_ERR_NULL, #p " is NULL")

}  // namespace

extern "C" {

const char* eg_version(void) { return "1.0.0"; }

const char* eg_status_name(eg_status s) {
  switch (s) {
    case EG_OK: return "ok";
    case EG_ERR_USAGE: return "usage";
    case EG_ERR_CONSTRUCTION: return "construction";
    case EG_ERR_ACCURACY: return "accuracy";
    case EG_ERR_SINGULAR: return "singular";
    case EG_ERR_CAPABILITY: return "capability";
    case EG_ERR_SAMPLING: return "sampling_exhausted";
    case EG_ERR_INTERNAL: return "internal";
    case EG_ERR_NULL: return "null_argument";
    case EG_ERR_RANGE: return "out_of_range";
    case EG_ERR_IO: return "io";
  }
  return "unknown";
}

const char* eg_last_error(void) { return g_last_error.c_str(); }

eg_status eg_config_new(eg_config** out) {
  EG_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new eg_config(); });
}

void eg_config_free(eg_config* c) { delete c; }

eg_status eg_config_set_n(eg_config* c, int n) {
  EG_REQUIRE(c);
  if (n < 1 || n > 3) return fail(EG_ERR_USAGE, "n must be in 1..3");
  c->cfg.n = n;
  return EG_OK;
}

eg_status eg_config_set_suites(eg_config* c, const char* csv) {
  EG_REQUIRE(c);
  EG_REQUIRE(csv);
  return guarded([&] {
    RunConfig t = c->cfg;
    t.suites = parse_suites(csv);
    t.validate();
    c->cfg = t;
  });
}

eg_status eg_config_set_tau(eg_config* c, double re, double im) {
  EG_REQUIRE(c);
  if (!(im > 0.0)) return fail(EG_ERR_USAGE, "Im tau must be positive");
  c->cfg.tau = {re, im};
  return EG_OK;
}

eg_status eg_config_set_hbar(eg_config* c, double re, double im) {
  EG_REQUIRE(c);
  c->cfg.hbar = {re, im};
  return EG_OK;
}

eg_status eg_config_set_seed(eg_config* c, uint64_t seed) {
  EG_REQUIRE(c);
  c->cfg.seed = seed;
  return EG_OK;
}

eg_status eg_config_set_tol(eg_config* c, double tol) {
  EG_REQUIRE(c);
  if (!(tol > 0.0)) return fail(EG_ERR_USAGE, "tol must be positive");
  c->cfg.tol = tol;
  return EG_OK;
}

eg_status eg_config_set_samples(eg_config* c, int samples) {
  EG_REQUIRE(c);
  if (samples < 1) return fail(EG_ERR_USAGE, "samples must be at least 1");
  c->cfg.samples = samples;
  return EG_OK;
}

eg_status eg_config_set_threads(eg_config* c, int threads) {
  EG_REQUIRE(c);
  if (threads < 0) return fail(EG_ERR_USAGE, "threads must be non-negative");
  c->cfg.threads = threads;
  return EG_OK;
}

eg_status eg_config_set_sites(eg_config* c, const char* spec) {
  EG_REQUIRE(c);
  EG_REQUIRE(spec);
  return guarded([&] { c->cfg.sites = parse_sites(spec); });
}

eg_status eg_config_load_json(eg_config* c, const char* json_text) {
  EG_REQUIRE(c);
  EG_REQUIRE(json_text);
  return guarded([&] {
    RunConfig t = c->cfg;
    apply_config_json(t, json_text);
    c->cfg = t;
  });
}

eg_status eg_config_load_file(eg_config* c, const char* path) {
  EG_REQUIRE(c);
  EG_REQUIRE(path);
  std::ifstream in(path);
  if (!in) return fail(EG_ERR_IO, std::string("cannot open config file '") + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return eg_config_load_json(c, ss.str().c_str());
}

eg_status eg_config_validate(const eg_config* c) {
  EG_REQUIRE(c);
  return guarded([&] { c->cfg.validate(); });
}

eg_status eg_parse_complex(const char* text, double* re, double* im) {
  EG_REQUIRE(text);
  EG_REQUIRE(re);
  EG_REQUIRE(im);
  return guarded([&] {
    const cplx z = parse_complex(text);
    *re = z.real();
    *im = z.imag();
  });
}

eg_status eg_run(const eg_config* c, eg_result** out) {
  EG_REQUIRE(c);
  EG_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<eg_result>();
    r->res = run(c->cfg);
    *out = r.release();
  });
}

void eg_result_free(eg_result* r) { delete r; }

size_t eg_result_count(const eg_result* r) { return r ? r->res.reports.size() : 0; }

eg_status eg_result_report(const eg_result* r, size_t index, eg_report* out) {
  EG_REQUIRE(r);
  EG_REQUIRE(out);
  if (index >= r->res.reports.size()) return fail(EG_ERR_RANGE, "report index out of range");
  const ResidualReport& x = r->res.reports[index];
  out->identity_id = x.identity_id.c_str();
  out->paper_anchor = x.paper_anchor.c_str();
  out->status = x.status.c_str();
  out->message = x.message.c_str();
  out->samples_used = x.samples_used;
  out->max_abs = x.max_abs;
  out->max_rel = x.max_rel;
  out->tol = x.tol;
  out->pass = x.pass ? 1 : 0;
  out->wall_time_ms = x.wall_time_ms;
  out->seed = x.seed;
  return EG_OK;
}

size_t eg_result_passed(const eg_result* r) { return r ? static_cast<size_t>(r->res.passed()) : 0; }
size_t eg_result_failed(const eg_result* r) { return r ? static_cast<size_t>(r->res.failed()) : 0; }
int eg_result_exit_status(const eg_result* r) { return r ? r->res.exit_status() : 1; }

eg_status eg_result_json(const eg_result* r, int include_timing, const char** out) {
  EG_REQUIRE(r);
  EG_REQUIRE(out);
  auto* m = const_cast<eg_result*>(r);
  const int k = include_timing ? 1 : 0;
  return guarded([&] {
    if (!m->have_json[k]) {
      m->json[k] = serialize(m->res, include_timing != 0);
      m->have_json[k] = true;
    }
    *out = m->json[k].c_str();
  });
}

size_t eg_catalogue_count(void) { return catalogue().size(); }

eg_status eg_catalogue_entry(size_t index, const char** id, const char** anchor, const char** suite,
                             double* default_tol) {
  if (index >= catalogue().size()) return fail(EG_ERR_RANGE, "catalogue index out of range");
  const CatalogueEntry& e = catalogue()[index];
  if (id) *id = e.id.c_str();
  if (anchor) *anchor = e.anchor.c_str();
  if (suite) *suite = e.suite.c_str();
  if (default_tol) *default_tol = class_base(e.tol_class);
  return EG_OK;
}

}  // extern "C"
