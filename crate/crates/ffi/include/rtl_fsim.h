#ifndef RTL_FSIM_H
#define RTL_FSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FsimStatus {
  FSIM_STATUS_OK = 0,
  FSIM_STATUS_NULL_ARGUMENT = 1,
  FSIM_STATUS_INVALID_UTF8 = 2,
  FSIM_STATUS_PARSE = 3,
  FSIM_STATUS_CONFIG = 4,
  FSIM_STATUS_INVARIANT = 5,
  FSIM_STATUS_OUT_OF_RANGE = 6,
  FSIM_STATUS_PANIC = 7,
} FsimStatus;

typedef enum FsimMode {
  FSIM_MODE_SERIAL = 0,
  FSIM_MODE_STRUCTURAL = 1,
  FSIM_MODE_STRUCTURAL_FAULT = 2,
  FSIM_MODE_FULL = 3,
} FsimMode;

/**
 * Elaborated circuit.
 */
typedef struct FsimNetlist FsimNetlist;

/**
 * Finished simulation.
 */
typedef struct FsimReport FsimReport;

typedef struct FsimConfig {
  uint32_t workers;
  enum FsimMode mode;
  double threshold;
  /**
   * 0 selects the worker count.
   */
  uint32_t slaves;
  uint32_t max_expansions_per_cycle;
  bool drop_on_detect;
  bool audit;
} FsimConfig;

typedef struct FsimFaultResult {
  uint32_t fid;
  bool detected;
  /**
   * Meaningful only when `detected`.
   */
  uint32_t detect_cycle;
} FsimFaultResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * Valid until the next call on the same thread.
 */
const char *fsim_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fsim_version(void);

/**
 * Fill `out` with the engine defaults (full mode, one worker).
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum FsimStatus fsim_config_default(struct FsimConfig *out);

/**
 * Parse and elaborate netlist text.
 *
 * # Safety
 * `text` must be null or a NUL-terminated string; `out` must be null or
 * valid for writes. Release the result with [`fsim_netlist_free`].
 */
enum FsimStatus fsim_netlist_load(const char *text_ptr, struct FsimNetlist **out);

/**
 * # Safety
 * `netlist` must be null or a pointer from [`fsim_netlist_load`] not yet freed.
 */
void fsim_netlist_free(struct FsimNetlist *netlist);

/**
 * Counts of nodes, inputs, outputs and registers.
 *
 * # Safety
 * `netlist` must be null or live; each out pointer null or valid for writes.
 */
enum FsimStatus fsim_netlist_counts(const struct FsimNetlist *netlist,
                                    size_t *nodes,
                                    size_t *inputs,
                                    size_t *outputs,
                                    size_t *regs);

/**
 * Simulate `stimulus` on `netlist`. Faults come from `faults_csv` when it
 * is non-null, otherwise from enumerating `fault_kinds` (e.g. "sa0,sa1").
 *
 * # Safety
 * Strings must be null or NUL-terminated; `netlist` live; `config` null
 * (defaults) or readable; `out` valid for writes. Release the result
 * with [`fsim_report_free`].
 */
enum FsimStatus fsim_run(const struct FsimNetlist *netlist,
                         const char *stimulus,
                         const char *faults_csv,
                         const char *fault_kinds,
                         const struct FsimConfig *config,
                         struct FsimReport **out);

/**
 * # Safety
 * `report` must be null or a pointer from [`fsim_run`] not yet freed.
 */
void fsim_report_free(struct FsimReport *report);

/**
 * Fault count, detected count and simulated cycles.
 *
 * # Safety
 * `report` must be null or live; out pointers null or valid for writes.
 */
enum FsimStatus fsim_report_summary(const struct FsimReport *report,
                                    size_t *faults,
                                    size_t *detected,
                                    uint32_t *cycles);

/**
 * # Safety
 * `report` must be null or live; `out` valid for writes.
 */
enum FsimStatus fsim_report_coverage(const struct FsimReport *report, double *out);

/**
 * Result for the `index`-th fault in report order.
 *
 * # Safety
 * `report` must be null or live; `out` valid for writes.
 */
enum FsimStatus fsim_report_fault(const struct FsimReport *report,
                                  size_t index,
                                  struct FsimFaultResult *out);

/**
 * Report as CSV text. Release with [`fsim_string_free`].
 *
 * # Safety
 * `report` must be null or live; `out` valid for writes.
 */
enum FsimStatus fsim_report_csv(const struct FsimReport *report, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void fsim_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RTL_FSIM_H */
