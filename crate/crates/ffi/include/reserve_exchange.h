#ifndef RESERVE_EXCHANGE_H
#define RESERVE_EXCHANGE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum RxStatus {
  RX_STATUS_OK = 0,
  RX_STATUS_NULL_POINTER = 1,
  RX_STATUS_INVALID_UTF8 = 2,
  RX_STATUS_IO = 3,
  RX_STATUS_PARSE = 4,
  RX_STATUS_INVALID_SCENARIO = 5,
  RX_STATUS_INVALID_ARGUMENT = 6,
  RX_STATUS_BUFFER_TOO_SMALL = 7,
  RX_STATUS_ENGINE = 8,
  /**
   * `casestudy` ran but a reference check failed; the report is still
   * returned.
   */
  RX_STATUS_REFERENCE_MISMATCH = 9,
  RX_STATUS_PANIC = 10,
} RxStatus;

typedef enum RxMechanism {
  RX_MECHANISM_VCG = 0,
  RX_MECHANISM_MLC = 1,
} RxMechanism;

/**
 * Opaque scenario handle.
 */
typedef struct RxScenario RxScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *rx_version(void);

/**
 * Message of the last failed call on this thread, empty after a success.
 * Valid until the next call on the same thread.
 */
const char *rx_last_error(void);

/**
 * Parses and validates a scenario document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RxStatus rx_scenario_from_json(const char *json, struct RxScenario **out);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RxStatus rx_scenario_load(const char *path, struct RxScenario **out);

/**
 * The bundled case-study scenario.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RxStatus rx_scenario_casestudy(struct RxScenario **out);

/**
 * Releases a scenario. Null is ignored.
 *
 * # Safety
 * `s` must come from an `rx_scenario_*` constructor and not be used after.
 */
void rx_scenario_free(struct RxScenario *s);

/**
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum RxStatus rx_scenario_area_count(const struct RxScenario *s, size_t *out);

/**
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum RxStatus rx_scenario_link_count(const struct RxScenario *s, size_t *out);

/**
 * SHA-256 hex digest of the scenario document, caller-owned.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum RxStatus rx_scenario_digest(const struct RxScenario *s, char **out);

/**
 * Efficient allocation, in link declaration order, and market value.
 *
 * # Safety
 * `allocation` must point to `len` writable doubles, `value` to one.
 */
enum RxStatus rx_clear_market(const struct RxScenario *s,
                              double *allocation,
                              size_t len,
                              double *value);

/**
 * Payments and revealed utilities, in area declaration order.
 *
 * # Safety
 * `payments` and `utilities` must each point to `len` writable doubles.
 */
enum RxStatus rx_payments(const struct RxScenario *s,
                          enum RxMechanism mechanism,
                          double *payments,
                          double *utilities,
                          size_t len);

/**
 * Least-core value epsilon* of the bid profile.
 *
 * # Safety
 * `epsilon_star` must point to a writable double.
 */
enum RxStatus rx_least_core(const struct RxScenario *s, double *epsilon_star);

/**
 * Runs a command by name and returns the JSON report.
 *
 * `s` may be null for `certify-groves` and `casestudy`. `flags_json` may be
 * null or a JSON object with any of `seed`, `samples`, `scale`,
 * `coalition`, `tol`, `tie_break`. On `RX_STATUS_OK` and
 * `RX_STATUS_REFERENCE_MISMATCH`, `*report_json` receives a caller-owned
 * string.
 *
 * # Safety
 * String arguments must be NUL-terminated or null as documented;
 * `report_json` must be a valid pointer.
 */
enum RxStatus rx_run(const char *command,
                     const struct RxScenario *s,
                     const char *flags_json,
                     char **report_json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `p` must come from this library and not be used after.
 */
void rx_string_free(char *p);

/**
 * Whether `status` denotes success.
 */
int rx_status_ok(enum RxStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RESERVE_EXCHANGE_H */
