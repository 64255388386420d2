#ifndef CLPERF_H
#define CLPERF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Values accepted wherever a `level` argument is taken.
 */
typedef enum ClperfLevel {
  CLPERF_LEVEL_MEMORY = 0,
  CLPERF_LEVEL_L1 = 1,
  CLPERF_LEVEL_L2 = 2,
  CLPERF_LEVEL_L3 = 3,
} ClperfLevel;

typedef enum ClperfStatus {
  CLPERF_STATUS_OK = 0,
  CLPERF_STATUS_NULL_POINTER = 1,
  CLPERF_STATUS_INVALID_UTF8 = 2,
  CLPERF_STATUS_PARSE = 3,
  CLPERF_STATUS_VALIDATION = 4,
  CLPERF_STATUS_TOPOLOGY = 5,
  CLPERF_STATUS_DOMAIN = 6,
  CLPERF_STATUS_CONFIG = 7,
  CLPERF_STATUS_UNSUPPORTED = 8,
  CLPERF_STATUS_SIZING = 9,
  CLPERF_STATUS_MEASUREMENT = 10,
  CLPERF_STATUS_IO = 11,
  CLPERF_STATUS_OUT_OF_RANGE = 12,
  CLPERF_STATUS_PANIC = 13,
} ClperfStatus;

typedef struct ClperfKernel ClperfKernel;

typedef struct ClperfMachine ClperfMachine;

typedef struct ClperfPrediction ClperfPrediction;

typedef struct ClperfBalance {
  double machine_balance_wf;
  double algorithmic_balance_wf;
  double lightspeed;
  double applicable_peak_gflops;
  double predicted_gflops;
} ClperfBalance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *clperf_last_error(void);

/**
 * Library version, static string.
 */
const char *clperf_version(void);

/**
 * Parse a machine description from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum ClperfStatus clperf_machine_load(const char *json, struct ClperfMachine **out);

/**
 * A bundled machine by name (`core2`, `nehalem`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum ClperfStatus clperf_machine_bundled(const char *name, struct ClperfMachine **out);

/**
 * # Safety
 * `machine` must come from this library and not be used afterwards.
 */
void clperf_machine_free(struct ClperfMachine *machine);

/**
 * Core cycles to move one cacheline over the memory bus.
 *
 * # Safety
 * `machine` must be a live handle; `out` must be writable.
 */
enum ClperfStatus clperf_machine_memory_cycles_per_cacheline(const struct ClperfMachine *machine,
                                                             double *out);

/**
 * A builtin kernel by name (`load`, `store`, `copy`, `triad`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum ClperfStatus clperf_kernel_builtin(const char *name, struct ClperfKernel **out);

/**
 * Parse a kernel description from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum ClperfStatus clperf_kernel_load(const char *json, struct ClperfKernel **out);

/**
 * # Safety
 * `kernel` must come from this library and not be used afterwards.
 */
void clperf_kernel_free(struct ClperfKernel *kernel);

/**
 * Predict cycles per cacheline update with the working set in `level`
 * (a [`ClperfLevel`] value).
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum ClperfStatus clperf_predict(const struct ClperfMachine *machine,
                                 const struct ClperfKernel *kernel,
                                 uint32_t level,
                                 struct ClperfPrediction **out);

/**
 * # Safety
 * `prediction` must come from this library and not be used afterwards.
 */
void clperf_prediction_free(struct ClperfPrediction *prediction);

/**
 * Unrounded total cycles per cacheline update; NaN for a NULL handle.
 *
 * # Safety
 * `prediction` must be NULL or a live handle.
 */
double clperf_prediction_total_cycles(const struct ClperfPrediction *prediction);

/**
 * Total cycles rounded half away from zero; -1 for a NULL handle.
 *
 * # Safety
 * `prediction` must be NULL or a live handle.
 */
int64_t clperf_prediction_total_rounded(const struct ClperfPrediction *prediction);

/**
 * L1 execution cycles; NaN for a NULL handle.
 *
 * # Safety
 * `prediction` must be NULL or a live handle.
 */
double clperf_prediction_l1_cycles(const struct ClperfPrediction *prediction);

/**
 * Number of bus transfer terms (0 for L1 or a NULL handle).
 *
 * # Safety
 * `prediction` must be NULL or a live handle.
 */
size_t clperf_prediction_transfer_count(const struct ClperfPrediction *prediction);

/**
 * Cachelines and cycles of transfer term `index`, innermost bus first.
 *
 * # Safety
 * `prediction` must be a live handle; the out pointers must be writable.
 */
enum ClperfStatus clperf_prediction_transfer(const struct ClperfPrediction *prediction,
                                             size_t index,
                                             uint32_t *cachelines,
                                             double *cycles);

/**
 * Balance prediction `min(1, bm / ba) * peak`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ClperfStatus clperf_balance(double bm,
                                 double ba,
                                 double peak_gflops,
                                 struct ClperfBalance *out);

/**
 * Simulated steady-state cachelines per update over bus `crossing`
 * (0 = L2-L1) for a working set sized for `level`.
 *
 * # Safety
 * Handles must be live; out pointers must be writable.
 */
enum ClperfStatus clperf_simulate_kernel(const struct ClperfMachine *machine,
                                         const struct ClperfKernel *kernel,
                                         uint32_t level,
                                         size_t crossing,
                                         double *inward,
                                         double *outward);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLPERF_H */
