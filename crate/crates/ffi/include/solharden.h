#ifndef SOLHARDEN_H
#define SOLHARDEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SolhardenStatus {
  SOLHARDEN_STATUS_OK = 0,
  SOLHARDEN_STATUS_NULL_ARGUMENT = 1,
  SOLHARDEN_STATUS_INVALID_UTF8 = 2,
  /**
   * The source failed to parse; the message carries file and line.
   */
  SOLHARDEN_STATUS_SYNTAX = 3,
  /**
   * Unknown strategy name or other bad option.
   */
  SOLHARDEN_STATUS_CONFIG = 4,
  /**
   * Graph construction, hardening or the time budget failed.
   */
  SOLHARDEN_STATUS_PIPELINE = 5,
  /**
   * The scenario is malformed or could not be replayed.
   */
  SOLHARDEN_STATUS_SCENARIO = 6,
  /**
   * The diff classified a benign transaction as BROKEN; results are still available.
   */
  SOLHARDEN_STATUS_BROKEN = 7,
  /**
   * An internal panic was caught.
   */
  SOLHARDEN_STATUS_INTERNAL = 8,
} SolhardenStatus;

/**
 * Opaque session handle.
 */
typedef struct SolhardenSession SolhardenSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a session with both strategies enabled. Free it with [`solharden_session_free`].
 */
struct SolhardenSession *solharden_session_new(void);

/**
 * Frees a session. Passing null is a no-op.
 *
 * # Safety
 * `session` must come from [`solharden_session_new`] and not be used afterwards.
 */
void solharden_session_free(struct SolhardenSession *session);

/**
 * Selects strategies from a comma-separated list such as `"reentrancy,integer"`.
 *
 * # Safety
 * `session` must be a live handle and `strategies` a NUL-terminated string.
 */
enum SolhardenStatus solharden_set_strategies(struct SolhardenSession *session,
                                              const char *strategies);

/**
 * Toggles the HCC marker comment on synthesized statements.
 *
 * # Safety
 * `session` must be a live handle.
 */
enum SolhardenStatus solharden_set_mark_patches(struct SolhardenSession *session, bool enabled);

/**
 * Hardens `source`; `name` is used in diagnostics and reports.
 *
 * # Safety
 * `session` must be a live handle; `source` and `name` NUL-terminated strings.
 */
enum SolhardenStatus solharden_harden(struct SolhardenSession *session,
                                      const char *source,
                                      const char *name);

/**
 * Detects without producing hardened output.
 *
 * # Safety
 * Same as [`solharden_harden`].
 */
enum SolhardenStatus solharden_analyze(struct SolhardenSession *session,
                                       const char *source,
                                       const char *name);

/**
 * Hardens `source` and replays the TOML `scenario` on both versions.
 *
 * # Safety
 * Same as [`solharden_harden`]; `scenario` must also be a NUL-terminated string.
 */
enum SolhardenStatus solharden_diff(struct SolhardenSession *session,
                                    const char *source,
                                    const char *name,
                                    const char *scenario);

/**
 * Hardened source from the last run, or null after analysis or failure.
 *
 * # Safety
 * `session` must be a live handle. The string is owned by the session.
 */
const char *solharden_hardened_source(const struct SolhardenSession *session);

/**
 * Text report from the last successful run, or null.
 *
 * # Safety
 * As for [`solharden_hardened_source`].
 */
const char *solharden_report_text(const struct SolhardenSession *session);

/**
 * JSON report (an array with one file entry) from the last successful run, or null.
 *
 * # Safety
 * As for [`solharden_hardened_source`].
 */
const char *solharden_report_json(const struct SolhardenSession *session);

/**
 * Message for the last failed call, or null if it succeeded.
 *
 * # Safety
 * As for [`solharden_hardened_source`].
 */
const char *solharden_last_error(const struct SolhardenSession *session);

/**
 * Library version as a static string.
 */
const char *solharden_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOLHARDEN_H */
