#ifndef QBM_H
#define QBM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  QBM_STATUS_OK = 0,
  QBM_STATUS_NULL_POINTER = 1,
  QBM_STATUS_INVALID_UTF8 = 2,
  QBM_STATUS_OUT_OF_RANGE = 3,
  QBM_STATUS_DOMAIN = 10,
  QBM_STATUS_CONFIG = 11,
  QBM_STATUS_QUADRATURE = 12,
  QBM_STATUS_INTEGRATION = 13,
  QBM_STATUS_ENSEMBLE_ABORTED = 14,
  QBM_STATUS_SIGN_PROBLEM = 15,
  QBM_STATUS_ENVELOPE = 16,
  QBM_STATUS_UNSUPPORTED = 17,
  QBM_STATUS_MISUSE = 18,
  QBM_STATUS_IO = 19,
  QBM_STATUS_FORMAT = 20,
  QBM_STATUS_PANIC = 99,
} QbmStatus;

/**
 * Noise statistics selector.
 */
typedef enum {
  QBM_STATISTICS_QUANTUM = 0,
  QBM_STATISTICS_CLASSICAL = 1,
  QBM_STATISTICS_WHITE = 2,
} QbmStatistics;

/**
 * Bath parameters.
 */
typedef struct QbmBath QbmBath;

/**
 * A parsed experiment config.
 */
typedef struct QbmConfig QbmConfig;

/**
 * Series produced by [`qbm_run`], one per configured observable, followed
 * by the reference curve when the config asks for one.
 */
typedef struct QbmResult QbmResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *qbm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qbm_version(void);

/**
 * Ohmic bath with exponential cutoff.
 *
 * # Safety
 * `out` must be valid for writes.
 */
QbmStatus qbm_bath_new(double gamma,
                       double eps,
                       double mass,
                       double hbar,
                       double kt,
                       QbmBath **out);

/**
 * # Safety
 * `bath` must come from [`qbm_bath_new`] and not be used afterwards. Null is ignored.
 */
void qbm_bath_free(QbmBath *bath);

/**
 * Spectral density J(ω).
 *
 * # Safety
 * `bath` must be a live handle and `out` valid for writes.
 */
QbmStatus qbm_bath_spectral_density(const QbmBath *bath, double omega, double *out);

/**
 * Memory kernel M(t).
 *
 * # Safety
 * `bath` must be a live handle and `out` valid for writes.
 */
QbmStatus qbm_bath_memory_kernel(const QbmBath *bath, double t, double *out);

/**
 * Power spectral density of the quantum noise.
 *
 * # Safety
 * `bath` must be a live handle and `out` valid for writes.
 */
QbmStatus qbm_bath_noise_psd(const QbmBath *bath, double omega, double *out);

/**
 * Symmetrized quantum noise correlation at `lag`.
 *
 * # Safety
 * `bath` must be a live handle and `out` valid for writes.
 */
QbmStatus qbm_bath_noise_correlation(const QbmBath *bath, double lag, double *out);

/**
 * Zero-temperature momentum variance of a free particle released at t = 0.
 *
 * # Safety
 * `bath` must be a live handle and `out` valid for writes.
 */
QbmStatus qbm_p2_quadrature(const QbmBath *bath, double t, double *out);

/**
 * Stationary momentum variance of a free particle.
 *
 * # Safety
 * `bath` must be a live handle and `out` valid for writes.
 */
QbmStatus qbm_stationary_p2(const QbmBath *bath, QbmStatistics statistics, double *out);

/**
 * Parse a TOML experiment config.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for writes.
 */
QbmStatus qbm_config_parse(const char *text, QbmConfig **out);

/**
 * Load a config file, or a bundled preset when no such file exists.
 *
 * # Safety
 * `path_or_preset` must be a NUL-terminated string and `out` valid for writes.
 */
QbmStatus qbm_config_load(const char *path_or_preset, QbmConfig **out);

/**
 * # Safety
 * `config` must come from a `qbm_config_*` constructor and not be used afterwards. Null is ignored.
 */
void qbm_config_free(QbmConfig *config);

/**
 * Override the master seed.
 *
 * # Safety
 * `config` must be a live handle.
 */
QbmStatus qbm_config_set_seed(QbmConfig *config, uint64_t seed);

/**
 * Override the trajectory count; must be positive.
 *
 * # Safety
 * `config` must be a live handle.
 */
QbmStatus qbm_config_set_n_traj(QbmConfig *config, size_t n_traj);

/**
 * Run the experiment. Files are written to `out_dir`, or to the directory
 * the config and environment select when `out_dir` is null. `workers` of 0
 * uses every core.
 *
 * # Safety
 * `config` must be a live handle, `out_dir` null or a NUL-terminated string,
 * and `out` valid for writes.
 */
QbmStatus qbm_run(const QbmConfig *config, const char *out_dir, size_t workers, QbmResult **out);

/**
 * # Safety
 * `result` must come from [`qbm_run`] and not be used afterwards. Null is ignored.
 */
void qbm_result_free(QbmResult *result);

/**
 * Number of series in a result; 0 for null.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t qbm_result_series_count(const QbmResult *result);

/**
 * Name of series `index`, valid while the result lives; null when out of range.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
const char *qbm_result_series_name(const QbmResult *result, size_t index);

/**
 * Number of time points in series `index`.
 *
 * # Safety
 * `result` must be a live handle and `len` valid for writes.
 */
QbmStatus qbm_result_series_len(const QbmResult *result, size_t index, size_t *len);

/**
 * Copy series `index` into caller buffers of `capacity` elements each. Any
 * buffer may be null to skip it; `capacity` must be at least the series length.
 *
 * # Safety
 * Non-null buffers must be valid for `capacity` writes.
 */
QbmStatus qbm_result_series_copy(const QbmResult *result,
                                 size_t index,
                                 double *times,
                                 double *estimates,
                                 double *standard_errors,
                                 double *effective_n,
                                 size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QBM_H */
