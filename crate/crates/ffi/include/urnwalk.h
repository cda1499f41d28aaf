#ifndef URNWALK_H
#define URNWALK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UwStatus {
  UW_STATUS_OK = 0,
  UW_STATUS_NULL_POINTER = 1,
  UW_STATUS_INVALID_ARGUMENT = 2,
  UW_STATUS_CONFIG = 3,
  UW_STATUS_SAMPLE_SIZE = 4,
  UW_STATUS_DOMAIN = 5,
  UW_STATUS_CONVERGENCE = 6,
  UW_STATUS_CAPABILITY = 7,
  UW_STATUS_CASE = 8,
  UW_STATUS_HYPOTHESIS = 9,
  UW_STATUS_IO = 10,
  UW_STATUS_INTERNAL = 11,
} UwStatus;

typedef enum UwRegime {
  UW_REGIME_D1_CRITICAL = 0,
  UW_REGIME_D2_SUPERDIFFUSIVE = 1,
  UW_REGIME_D3A_GAUSSIAN = 2,
  UW_REGIME_D3B_GAUSSIAN = 3,
  UW_REGIME_D3C_GAUSSIAN_JORDAN = 4,
} UwRegime;

/**
 * Opaque model handle.
 */
typedef struct UwModel UwModel;

typedef struct UwFixedPoint {
  double x;
  double y;
  double z;
  double alpha;
  double beta;
  double kappa;
  double rho;
  double residual;
  /**
   * NaN when no margin could be computed.
   */
  double margin;
  uint64_t iterations;
} UwFixedPoint;

typedef struct UwAsymptotics {
  enum UwRegime regime;
  /**
   * Deviations are multiplied by `n^scaling_exponent`, further divided
   * by `sqrt(log n)` when `log_correction` is set.
   */
  double scaling_exponent;
  bool log_correction;
  bool has_sigma;
  /**
   * Row-major 3×3 limit covariance.
   */
  double sigma[9];
  bool has_direction;
  double direction[3];
} UwAsymptotics;

typedef struct UwEnsembleSummary {
  uint64_t n;
  uint64_t replications;
  double mean[3];
  /**
   * Row-major sample covariance of the proportions.
   */
  double cov[9];
  bool has_deviation;
  /**
   * Row-major sample covariance of the scaled deviations.
   */
  double deviation_cov[9];
} UwEnsembleSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *uw_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *uw_last_error_message(void);

/**
 * Parses experiment-config text into a new model.
 *
 * # Safety
 * `config_text` must be NUL-terminated; `out` must be writable.
 */
enum UwStatus uw_model_new(const char *config_text, struct UwModel **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from `uw_model_new` and not be used afterwards.
 */
void uw_model_free(struct UwModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum UwStatus uw_fixed_point(const struct UwModel *model, struct UwFixedPoint *out);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum UwStatus uw_asymptotics(const struct UwModel *model, struct UwAsymptotics *out);

/**
 * Runs the configured ensemble and reports the final checkpoint.
 * Deviations are scaled for the model's regime when one applies.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum UwStatus uw_simulate(const struct UwModel *model, struct UwEnsembleSummary *out);

/**
 * Runs the full experiment, writes the report files to `out_dir` (or the
 * configured directory when NULL) and stores the exit status (0 pass,
 * 1 statistical failure) in `exit_status`.
 *
 * # Safety
 * `model` must be a live handle; `out_dir` NULL or NUL-terminated;
 * `exit_status` writable.
 */
enum UwStatus uw_run_experiment(const struct UwModel *model,
                                const char *out_dir,
                                int32_t *exit_status);

/**
 * `g(x, y) = p F(x, y) + (1 - p)(1 - F(x, y))`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum UwStatus uw_g_eval(const struct UwModel *model, double x, double y, double *out);

/**
 * `H_0(x, y)`; needs a fixed sample-size law.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum UwStatus uw_h0_eval(const struct UwModel *model, double x, double y, double *out);

/**
 * `H_n(x, y)` for the configured law at epoch `n`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum UwStatus uw_hn_eval(const struct UwModel *model, uint64_t n, double x, double y, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* URNWALK_H */
