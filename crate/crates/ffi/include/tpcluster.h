#ifndef TPCLUSTER_H
#define TPCLUSTER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TpStatus {
  TP_STATUS_OK = 0,
  TP_STATUS_NULL_POINTER = 1,
  TP_STATUS_INVALID_ARGUMENT = 2,
  TP_STATUS_INVALID_CONFIG = 3,
  TP_STATUS_KERNEL_ERROR = 4,
  TP_STATUS_SIMULATION_ERROR = 5,
  TP_STATUS_MISSING_CALIBRATION = 6,
  TP_STATUS_IO = 7,
  TP_STATUS_OUT_OF_RANGE = 8,
  TP_STATUS_PANIC = 99,
} TpStatus;

typedef enum TpFpOp {
  TP_FP_OP_ADD = 0,
  TP_FP_OP_SUB = 1,
  TP_FP_OP_MUL = 2,
  TP_FP_OP_DIV = 3,
} TpFpOp;

typedef enum TpFormat {
  TP_FORMAT_F32 = 0,
  TP_FORMAT_F16 = 1,
  TP_FORMAT_BF16 = 2,
} TpFormat;

/**
 * A calibration table.
 */
typedef struct TpCalibration TpCalibration;

/**
 * A cluster configuration.
 */
typedef struct TpConfig TpConfig;

/**
 * A simulated kernel run.
 */
typedef struct TpRun TpRun;

/**
 * Cycle counters of one core.
 */
typedef struct TpCounters {
  uint64_t total;
  uint64_t active;
  uint64_t tcdm_contention;
  uint64_t l2_stall;
  uint64_t fpu_stall;
  uint64_t fpu_contention;
  uint64_t fpu_wb_stall;
  uint64_t icache_miss;
} TpCounters;

typedef struct TpMetrics {
  double perf_gflops;
  double energy_eff_gflops_per_w;
  double area_eff_gflops_per_mm2;
} TpMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *tp_last_error(void);

/**
 * Create a configuration from core, FPU and pipeline-stage counts.
 *
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum TpStatus tp_config_new(size_t cores, size_t fpus, uint8_t stages, struct TpConfig **out);

/**
 * Create a configuration from an id such as `"16c8f1p"`.
 *
 * # Safety
 * `id` must be a NUL-terminated string; `out` a valid pointer.
 */
enum TpStatus tp_config_parse(const char *id, struct TpConfig **out);

/**
 * # Safety
 * `cfg` must come from `tp_config_new`/`tp_config_parse` or be null.
 */
void tp_config_free(struct TpConfig *cfg);

/**
 * Build `benchmark` (e.g. `"fir"`) in `variant` (`"scalar"`, `"f16"`,
 * `"bf16"`) and simulate it on `cfg`. `size` 0 keeps the default problem
 * size. With `schedule` nonzero the instruction streams are list-scheduled
 * and kept if that makes the run faster.
 *
 * # Safety
 * Strings must be NUL-terminated; `cfg` a live handle; `out` valid.
 */
enum TpStatus tp_run(const struct TpConfig *cfg,
                     const char *benchmark,
                     const char *variant,
                     size_t size,
                     uint64_t seed,
                     int32_t schedule,
                     struct TpRun **out);

/**
 * # Safety
 * `run` must be a live handle.
 */
uint64_t tp_run_cycles(const struct TpRun *run);

/**
 * # Safety
 * `run` must be a live handle.
 */
uint64_t tp_run_flops(const struct TpRun *run);

/**
 * # Safety
 * `run` must be a live handle.
 */
size_t tp_run_cores(const struct TpRun *run);

/**
 * Counters of `core`.
 *
 * # Safety
 * `run` must be a live handle and `out` valid.
 */
enum TpStatus tp_run_counters(const struct TpRun *run, size_t core, struct TpCounters *out);

/**
 * # Safety
 * `run` must come from `tp_run` or be null.
 */
void tp_run_free(struct TpRun *run);

/**
 * The calibration rows published for the three reference design points.
 *
 * # Safety
 * `out` must be valid.
 */
enum TpStatus tp_calibration_default(struct TpCalibration **out);

/**
 * Read a calibration CSV.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` valid.
 */
enum TpStatus tp_calibration_load(const char *path, struct TpCalibration **out);

/**
 * # Safety
 * `calib` must come from a `tp_calibration_*` constructor or be null.
 */
void tp_calibration_free(struct TpCalibration *calib);

/**
 * Performance, energy efficiency and area efficiency of `run`. Fails with
 * `MissingCalibration` unless `calib` has both voltage corners of the
 * run's configuration.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum TpStatus tp_metrics(const struct TpRun *run,
                         const struct TpCalibration *calib,
                         struct TpMetrics *out);

/**
 * One correctly rounded operation on raw encodings.
 *
 * # Safety
 * `out` must be valid.
 */
enum TpStatus tp_fp_op(enum TpFpOp op, enum TpFormat fmt, uint32_t a, uint32_t b, uint32_t *out);

/**
 * Fused a*b+c with a single rounding.
 *
 * # Safety
 * `out` must be valid.
 */
enum TpStatus tp_fp_fma(enum TpFormat fmt, uint32_t a, uint32_t b, uint32_t c, uint32_t *out);

/**
 * Convert an encoding of `src` to `dst`, rounding to nearest even.
 *
 * # Safety
 * `out` must be valid.
 */
enum TpStatus tp_fp_convert(enum TpFormat src, uint32_t a, enum TpFormat dst, uint32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TPCLUSTER_H */
