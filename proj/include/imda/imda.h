/* C interface to the imda library. All functions return an imda_status;
 * on failure imda_last_error() describes the problem (per thread). */
#ifndef IMDA_IMDA_H
#define IMDA_IMDA_H

#include <stddef.h>

#if defined(IMDA_BUILDING_LIBRARY)
#define IMDA_API __attribute__((visibility("default")))
#else
#define IMDA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum imda_status {
  IMDA_OK = 0,
  IMDA_ERR_INVALID = 1,  /* bad argument or shape mismatch */
  IMDA_ERR_CONFIG = 2,   /* configuration rejected */
  IMDA_ERR_NUMERIC = 3,  /* non-finite values, solver did not converge */
  IMDA_ERR_IO = 4,       /* unreadable or malformed files */
  IMDA_ERR_INTERNAL = 5
} imda_status;

typedef struct imda_config imda_config;
typedef struct imda_result imda_result;

IMDA_API const char* imda_last_error(void);
IMDA_API const char* imda_version(void);

/* Experiment configuration. `mode` is supervised, unsupervised or semi. */
IMDA_API imda_status imda_config_create(const char* mode, imda_config** out);
IMDA_API imda_status imda_config_load(const char* path, imda_config** out);
/* Same semantics as a `--set key=value` override. */
IMDA_API imda_status imda_config_set(imda_config* config, const char* key, const char* value);
IMDA_API void imda_config_destroy(imda_config* config);

/* Trains and, when output_dir is set, writes the CSV outputs. */
IMDA_API imda_status imda_run(const imda_config* config, imda_result** out);
IMDA_API void imda_result_destroy(imda_result* result);

/* Rows of the metrics table: epochs + 1. */
IMDA_API imda_status imda_result_rows(const imda_result* result, size_t* rows);
IMDA_API imda_status imda_result_num_sources(const imda_result* result, size_t* n);
/* Target test accuracy after `row` epochs (NaN when there is no test split). */
IMDA_API imda_status imda_result_target_accuracy(const imda_result* result, size_t row,
                                                 double* accuracy);
/* Final domain weights; `capacity` must be at least the number of sources. */
IMDA_API imda_status imda_result_alpha(const imda_result* result, double* alpha,
                                       size_t capacity);
/* `present` is 0 for noiseless runs, which keep no ledger. */
IMDA_API imda_status imda_result_ledger(const imda_result* result, double* delta_u,
                                        double* delta_v, int* present);
IMDA_API imda_status imda_result_steps(const imda_result* result, size_t* steps);

typedef void (*imda_term_callback)(const char* name, double value, void* user);

/* Bound report from the config's bound_* keys. */
IMDA_API imda_status imda_bound_report(const imda_config* config, imda_term_callback on_term,
                                       void* user, double* total);

/* Exact W1 between the two sides of a `set,label,f0,...` file.
 * label_cost is "none", "indicator" or "abs". */
IMDA_API imda_status imda_oracle_w1_csv(const char* path, const char* label_cost, double scale,
                                        double* w1);

typedef void (*imda_check_callback)(const char* name, int passed, const char* detail,
                                    void* user);

/* Runs the property suites; `failures` receives the number that failed. */
IMDA_API imda_status imda_check(unsigned long long seed, imda_check_callback on_result,
                                void* user, int* failures);

#ifdef __cplusplus
}
#endif

#endif
