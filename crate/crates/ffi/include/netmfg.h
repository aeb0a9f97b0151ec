#ifndef NETMFG_H
#define NETMFG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NetmfgMetric {
  NETMFG_METRIC_EXPLOITABILITY = 0,
  NETMFG_METRIC_AVG_RETURN = 1,
  NETMFG_METRIC_POLICY_DIVERGENCE = 2,
} NetmfgMetric;

typedef enum NetmfgStatus {
  NETMFG_STATUS_OK = 0,
  NETMFG_STATUS_NULL_POINTER = 1,
  NETMFG_STATUS_INVALID_UTF8 = 2,
  NETMFG_STATUS_CONFIG = 3,
  NETMFG_STATUS_INVALID_INPUT = 4,
  NETMFG_STATUS_IO = 5,
  NETMFG_STATUS_OUT_OF_RANGE = 6,
  NETMFG_STATUS_BUFFER_TOO_SMALL = 7,
  NETMFG_STATUS_PANIC = 8,
} NetmfgStatus;

/**
 * Experiment configuration.
 */
typedef struct NetmfgConfig NetmfgConfig;

/**
 * Metric log of one trial.
 */
typedef struct NetmfgRunLog NetmfgRunLog;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *netmfg_last_error(void);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum NetmfgStatus netmfg_config_default(struct NetmfgConfig **out);

/**
 * Parses `key = value` configuration text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` as in [`netmfg_config_default`].
 */
enum NetmfgStatus netmfg_config_parse(const char *text, struct NetmfgConfig **out);

/**
 * Sets one key; the configuration is revalidated and left unchanged on error.
 *
 * # Safety
 * `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum NetmfgStatus netmfg_config_set(struct NetmfgConfig *cfg, const char *key, const char *value);

/**
 * Copies the NUL-terminated config digest into `buf`. `needed` (optional)
 * receives the required size including the terminator.
 *
 * # Safety
 * `cfg` must be a live handle; `buf` must hold `len` bytes (may be null if `len` is 0).
 */
enum NetmfgStatus netmfg_config_digest(const struct NetmfgConfig *cfg,
                                       char *buf,
                                       size_t len,
                                       size_t *needed);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void netmfg_config_free(struct NetmfgConfig *cfg);

/**
 * Runs one trial with the given seed.
 *
 * # Safety
 * `cfg` must be a live handle; `out` writable storage for one handle.
 */
enum NetmfgStatus netmfg_run_trial(const struct NetmfgConfig *cfg,
                                   uint64_t seed,
                                   struct NetmfgRunLog **out);

/**
 * Runs every trial of the configuration and writes the run directory.
 *
 * # Safety
 * `cfg` must be a live handle; `dir` a NUL-terminated path.
 */
enum NetmfgStatus netmfg_run_experiment(const struct NetmfgConfig *cfg, const char *dir);

/**
 * Number of rows in the log (0 for a null handle).
 *
 * # Safety
 * `log` must be null or a live handle.
 */
size_t netmfg_run_log_len(const struct NetmfgRunLog *log);

/**
 * Reads row `index` (ordered by k, then metric).
 *
 * # Safety
 * `log` must be a live handle; output pointers must be writable.
 */
enum NetmfgStatus netmfg_run_log_row(const struct NetmfgRunLog *log,
                                     size_t index,
                                     size_t *k,
                                     enum NetmfgMetric *metric,
                                     double *value);

/**
 * Writes the log in the `k,metric,value` trial format.
 *
 * # Safety
 * `log` must be a live handle; `path` a NUL-terminated path.
 */
enum NetmfgStatus netmfg_run_log_write_csv(const struct NetmfgRunLog *log, const char *path);

/**
 * # Safety
 * `log` must be null or a handle not yet freed.
 */
void netmfg_run_log_free(struct NetmfgRunLog *log);

/**
 * Euclidean projection of `v[0..n]` onto the probability simplex, into `out`.
 *
 * # Safety
 * `v` and `out` must each hold `n` doubles.
 */
enum NetmfgStatus netmfg_project_simplex(const double *v, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETMFG_H */
