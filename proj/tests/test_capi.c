/* The public header compiled as C, driven through the shared library. */
#include <stdio.h>
#include <string.h>

#include "ellgaudin/ellgaudin.h"

static int failures = 0;

#define EXPECT(cond)                                            \
  do {                                                          \
    if (!(cond)) {                                              \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                               \
    }                                                           \
  } while (0)

int main(void) {
  eg_config* c = NULL;
  eg_result* r = NULL;
  eg_report rep;
  const char* doc = NULL;
  double re = 0, im = 0;
  size_t i;

  EXPECT(eg_config_new(NULL) == EG_ERR_NULL);
  EXPECT(strlen(eg_last_error()) > 0);

  EXPECT(eg_config_new(&c) == EG_OK);
  EXPECT(eg_config_set_n(c, 7) == EG_ERR_USAGE);
  EXPECT(eg_config_set_suites(c, "nope") == EG_ERR_USAGE);
  EXPECT(eg_config_set_tol(c, -1.0) == EG_ERR_USAGE);
  EXPECT(eg_config_set_sites(c, "defining@x") == EG_ERR_USAGE);
  EXPECT(eg_config_load_json(c, "{\"samples\": 0}") == EG_OK);
  EXPECT(eg_config_validate(c) == EG_ERR_USAGE);
  EXPECT(eg_config_load_json(c, "{\"samples\": 3}") == EG_OK);
  EXPECT(eg_config_load_file(c, "/nonexistent/config.json") == EG_ERR_IO);

  EXPECT(eg_parse_complex("0.137+0.071i", &re, &im) == EG_OK);
  EXPECT(re == 0.137 && im == 0.071);

  EXPECT(eg_config_set_suites(c, "theta,trig") == EG_OK);
  EXPECT(eg_config_set_seed(c, 5) == EG_OK);
  EXPECT(eg_run(c, &r) == EG_OK);
  EXPECT(eg_result_count(r) > 4);
  EXPECT(eg_result_failed(r) == 0);
  EXPECT(eg_result_exit_status(r) == 0);
  for (i = 0; i < eg_result_count(r); ++i) {
    EXPECT(eg_result_report(r, i, &rep) == EG_OK);
    EXPECT(rep.pass == 1);
    EXPECT(strcmp(rep.status, "ok") == 0);
  }
  EXPECT(eg_result_report(r, eg_result_count(r), &rep) == EG_ERR_RANGE);
  EXPECT(eg_result_json(r, 0, &doc) == EG_OK);
  EXPECT(strstr(doc, "\"schema\": 1") != NULL);
  EXPECT(strstr(doc, "\"wall_time_ms\": 0.0") != NULL);
  eg_result_free(r);

  EXPECT(eg_config_set_tol(c, 1e-30) == EG_OK);
  EXPECT(eg_run(c, &r) == EG_OK);
  EXPECT(eg_result_exit_status(r) != 0);
  eg_result_free(r);
  eg_config_free(c);

  EXPECT(eg_catalogue_count() >= 25);
  {
    const char *id, *anchor, *suite;
    double tol;
    int has_dybe = 0;
    for (i = 0; i < eg_catalogue_count(); ++i) {
      EXPECT(eg_catalogue_entry(i, &id, &anchor, &suite, &tol) == EG_OK);
      if (strcmp(id, "DYBE") == 0) has_dybe = 1;
    }
    EXPECT(has_dybe);
    EXPECT(eg_catalogue_entry(eg_catalogue_count(), &id, NULL, NULL, NULL) == EG_ERR_RANGE);
  }

  if (failures) fprintf(stderr, "%d failures\n", failures);
  return failures ? 1 : 0;
}
