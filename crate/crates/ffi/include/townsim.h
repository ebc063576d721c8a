#ifndef TOWNSIM_H
#define TOWNSIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Run modes for [`townsim_run`]. Plain integers so an out-of-range value
 * from C is an error rather than undefined behaviour.
 */
#define TOWNSIM_MODE_DETERMINISTIC 0

#define TOWNSIM_MODE_PARALLEL 1

typedef enum TownsimStatus {
  TOWNSIM_STATUS_OK = 0,
  TOWNSIM_STATUS_NULL_ARGUMENT = 1,
  TOWNSIM_STATUS_INVALID_UTF8 = 2,
  TOWNSIM_STATUS_INVALID_SCENARIO = 3,
  TOWNSIM_STATUS_INVALID_ARGUMENT = 4,
  TOWNSIM_STATUS_BACKEND = 5,
  TOWNSIM_STATUS_IO = 6,
  TOWNSIM_STATUS_PANIC = 7,
} TownsimStatus;

/**
 * The result of one completed run.
 */
typedef struct TownsimOutcome TownsimOutcome;

/**
 * A validated scenario.
 */
typedef struct TownsimScenario TownsimScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into the library from this thread.
 */
const char *townsim_last_error(void);

/**
 * Library version as a static string.
 */
const char *townsim_version(void);

/**
 * Loads and validates a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TownsimStatus townsim_scenario_load(const char *path, struct TownsimScenario **out);

/**
 * Parses and validates a scenario from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum TownsimStatus townsim_scenario_from_json(const char *json, struct TownsimScenario **out);

/**
 * Overrides the seed.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum TownsimStatus townsim_scenario_set_seed(struct TownsimScenario *scenario, uint64_t seed);

/**
 * Overrides the number of simulated days.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum TownsimStatus townsim_scenario_set_days(struct TownsimScenario *scenario, uint32_t days);

/**
 * # Safety
 * `scenario` must be null or a handle not yet freed.
 */
void townsim_scenario_free(struct TownsimScenario *scenario);

/**
 * Runs the scenario with the scripted oracle. `mode` is one of the
 * `TOWNSIM_MODE_*` constants.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum TownsimStatus townsim_run(const struct TownsimScenario *scenario,
                               uint32_t mode,
                               struct TownsimOutcome **out);

/**
 * Number of events in the run's log, or 0 for a null handle.
 *
 * # Safety
 * `outcome` must be null or a live handle.
 */
uint64_t townsim_outcome_event_count(const struct TownsimOutcome *outcome);

/**
 * Total spent at shops over the run, in cents.
 *
 * # Safety
 * `outcome` must be a live handle; `cents` must be writable.
 */
enum TownsimStatus townsim_outcome_revenue_cents(const struct TownsimOutcome *outcome,
                                                 int64_t *cents);

/**
 * The event log as JSON Lines. Free the result with [`townsim_string_free`].
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum TownsimStatus townsim_outcome_events_jsonl(const struct TownsimOutcome *outcome, char **out);

/**
 * The analytics summary as JSON. Free the result with [`townsim_string_free`].
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum TownsimStatus townsim_outcome_summary_json(const struct TownsimOutcome *outcome, char **out);

/**
 * Writes the log, memory dump and reports into `dir`, as the CLI does.
 *
 * # Safety
 * `outcome` must be a live handle; `dir` a NUL-terminated string.
 */
enum TownsimStatus townsim_outcome_write(const struct TownsimOutcome *outcome, const char *dir);

/**
 * # Safety
 * `outcome` must be null or a handle not yet freed.
 */
void townsim_outcome_free(struct TownsimOutcome *outcome);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void townsim_string_free(char *s);

/**
 * Price after a discount given in parts per million, rounded half up.
 *
 * # Safety
 * `out` must be writable.
 */
enum TownsimStatus townsim_final_price_cents(int64_t base_cents,
                                             uint32_t discount_ppm,
                                             int64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOWNSIM_H */
