#ifndef ELLGAUDIN_H
#define ELLGAUDIN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define EG_API __declspec(dllexport)
#else
#define EG_API __attribute__((visibility("default")))
#endif

typedef enum eg_status {
  EG_OK = 0,
  EG_ERR_USAGE = 1,
  EG_ERR_CONSTRUCTION = 2,
  EG_ERR_ACCURACY = 3,
  EG_ERR_SINGULAR = 4,
  EG_ERR_CAPABILITY = 5,
  EG_ERR_SAMPLING = 6,
  EG_ERR_INTERNAL = 7,
  EG_ERR_NULL = 8,  /* a required pointer argument was NULL */
  EG_ERR_RANGE = 9, /* index out of range */
  EG_ERR_IO = 10
} eg_status;

typedef struct eg_config eg_config;
typedef struct eg_result eg_result;

/* Borrowed views; strings stay valid until the owning eg_result is freed. */
typedef struct eg_report {
  const char* identity_id;
  const char* paper_anchor;
  const char* status; /* "ok" or "error" */
  const char* message;
  int samples_used;
  double max_abs;
  double max_rel;
  double tol;
  int pass;
  double wall_time_ms;
  uint64_t seed;
} eg_report;

EG_API const char* eg_version(void);
EG_API const char* eg_status_name(eg_status s);
/* Message of the last failing call on this thread ("" if none). */
EG_API const char* eg_last_error(void);

EG_API eg_status eg_config_new(eg_config** out);
EG_API void eg_config_free(eg_config* c);
EG_API eg_status eg_config_set_n(eg_config* c, int n);
EG_API eg_status eg_config_set_suites(eg_config* c, const char* csv);
EG_API eg_status eg_config_set_tau(eg_config* c, double re, double im);
EG_API eg_status eg_config_set_hbar(eg_config* c, double re, double im);
EG_API eg_status eg_config_set_seed(eg_config* c, uint64_t seed);
EG_API eg_status eg_config_set_tol(eg_config* c, double tol);
EG_API eg_status eg_config_set_samples(eg_config* c, int samples);
EG_API eg_status eg_config_set_threads(eg_config* c, int threads);
/* "defining@0.1,dual@0.45" */
EG_API eg_status eg_config_set_sites(eg_config* c, const char* spec);
/* Overlays the keys of a JSON object (n, suites, tau, hbar, seed, tol, samples, sites, threads). */
EG_API eg_status eg_config_load_json(eg_config* c, const char* json_text);
EG_API eg_status eg_config_load_file(eg_config* c, const char* path);
EG_API eg_status eg_config_validate(const eg_config* c);

/* "0+1.1i" style literals. */
EG_API eg_status eg_parse_complex(const char* text, double* re, double* im);

/* Runs the selected suites. A failing identity is not an error: inspect the
   reports or eg_result_exit_status. */
EG_API eg_status eg_run(const eg_config* c, eg_result** out);
EG_API void eg_result_free(eg_result* r);
EG_API size_t eg_result_count(const eg_result* r);
EG_API eg_status eg_result_report(const eg_result* r, size_t index, eg_report* out);
EG_API size_t eg_result_passed(const eg_result* r);
EG_API size_t eg_result_failed(const eg_result* r);
/* 0 iff every report passed. */
EG_API int eg_result_exit_status(const eg_result* r);
/* JSON document; with include_timing == 0 every wall_time_ms is 0. */
EG_API eg_status eg_result_json(const eg_result* r, int include_timing, const char** out);

EG_API size_t eg_catalogue_count(void);
EG_API eg_status eg_catalogue_entry(size_t index, const char** id, const char** anchor, const char** suite,
                                    double* default_tol);

#ifdef __cplusplus
}
#endif

#endif
