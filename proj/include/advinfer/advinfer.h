/* Copyright 2026 The advinfer Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the advinfer library. Every function returns an
 * advinfer_status; on failure a message is available from
 * advinfer_last_error() on the calling thread. Objects handed out through
 * `out` parameters are owned by the caller and released with the matching
 * *_destroy function.
 *
 * Structured inputs and outputs are JSON text. Matrices are arrays of rows.
 */
#ifndef ADVINFER_ADVINFER_H_
#define ADVINFER_ADVINFER_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(ADVINFER_BUILDING_LIBRARY)
#define ADVINFER_API __declspec(dllexport)
#else
#define ADVINFER_API __declspec(dllimport)
#endif
#else
#define ADVINFER_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum advinfer_status {
  ADVINFER_OK = 0,
  ADVINFER_ERR_INVALID_ARGUMENT = 1,
  ADVINFER_ERR_DIMENSION_MISMATCH = 2,
  ADVINFER_ERR_NON_FINITE = 3,
  ADVINFER_ERR_DEGENERATE = 4,
  ADVINFER_ERR_IO = 5,
  ADVINFER_ERR_PARSE = 6,
  ADVINFER_ERR_NUMERIC = 7,
  /* advinfer_selftest ran but at least one check failed. */
  ADVINFER_ERR_CHECK_FAILED = 8,
  ADVINFER_ERR_INTERNAL = 99
} advinfer_status;

typedef struct advinfer_config advinfer_config;
typedef struct advinfer_result advinfer_result;

/* Called after every finished trial. `per` is NaN for degenerate trials. */
typedef void (*advinfer_progress_fn)(int done, int total, double per, void* user_data);

ADVINFER_API const char* advinfer_version(void);
ADVINFER_API const char* advinfer_last_error(void);
ADVINFER_API const char* advinfer_status_name(advinfer_status status);

/* ---- experiment configuration (flat `key = value` settings) ---- */

ADVINFER_API advinfer_status advinfer_config_create(advinfer_config** out);
ADVINFER_API advinfer_status advinfer_config_parse(const char* text, advinfer_config** out);
ADVINFER_API advinfer_status advinfer_config_load(const char* path, advinfer_config** out);
ADVINFER_API advinfer_status advinfer_config_set(advinfer_config* cfg, const char* key,
                                                 const char* value);
ADVINFER_API advinfer_status advinfer_config_serialize(const advinfer_config* cfg,
                                                       advinfer_result** out);
ADVINFER_API void advinfer_config_destroy(advinfer_config* cfg);

/* ---- results ---- */

ADVINFER_API const char* advinfer_result_text(const advinfer_result* result);
ADVINFER_API size_t advinfer_result_size(const advinfer_result* result);
ADVINFER_API advinfer_status advinfer_result_write(const advinfer_result* result, const char* path);
ADVINFER_API void advinfer_result_destroy(advinfer_result* result);

/* ---- operations ---- */

/* Optimal attack. Request: {"attacker": {...}, "x": [...]} (x only for box
 * attackers). The PGD settings come from `cfg` (NULL = defaults). */
ADVINFER_API advinfer_status advinfer_attack(const char* request_json, const advinfer_config* cfg,
                                             advinfer_result** out);

/* MAP inference from one observed attack. Request:
 *   {"alpha_obs": [...], "prior": {"type": "linear", "M_star": [[...]]}}
 *   {"alpha_obs": [...], "x": [...], "prior": {"type": "box", "model": {...}}} */
ADVINFER_API advinfer_status advinfer_infer(const char* request_json, const advinfer_config* cfg,
                                            advinfer_result** out);

/* Builds the missing parameter group so that `alpha` is optimal.
 * construct: "objective" (needs alpha, M, C, c), "capability" (alpha, M, W)
 * or "knowledge" (alpha, C, c, W). The result is checked against `samples`
 * random boundary points. */
ADVINFER_API advinfer_status advinfer_identify(const char* request_json, const char* construct,
                                               int samples, uint64_t seed, advinfer_result** out);

/* Trains the defender model described by cfg (logistic or mlp). */
ADVINFER_API advinfer_status advinfer_train(const advinfer_config* cfg, advinfer_result** out);

/* Runs cfg's trials on `threads` workers (0 = all cores) and renders the
 * summary in cfg's output format. Output does not depend on `threads`. */
ADVINFER_API advinfer_status advinfer_run_experiment(const advinfer_config* cfg, int threads,
                                                     advinfer_progress_fn progress,
                                                     void* user_data, advinfer_result** out);

/* One line per check. Returns ADVINFER_ERR_CHECK_FAILED (with `out` filled)
 * when a check fails. */
ADVINFER_API advinfer_status advinfer_selftest(uint64_t seed, advinfer_result** out);

/* ---- raw-array helpers ---- */

/* M is q×d, C is d×d, W is q×q, all row-major; C and W must be positive
 * definite. Writes d values to alpha_out. */
ADVINFER_API advinfer_status advinfer_optimal_attack_linear(size_t q, size_t d, const double* M,
                                                            const double* C, double c,
                                                            const double* W, double* alpha_out);

ADVINFER_API advinfer_status advinfer_per(double err_prior, double err_estimate, double* out);

#ifdef __cplusplus
}
#endif

#endif /* ADVINFER_ADVINFER_H_ */
