#ifndef TAMP_H
#define TAMP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum TampStatus {
  TAMP_STATUS_OK = 0,
  TAMP_STATUS_NULL_ARGUMENT = 1,
  TAMP_STATUS_INVALID_UTF8 = 2,
  TAMP_STATUS_PARSE_ERROR = 3,
  TAMP_STATUS_INADMISSIBLE_STRUCTURE = 4,
  TAMP_STATUS_INVALID_SCENARIO = 5,
  TAMP_STATUS_PROTOCOL_ERROR = 6,
  TAMP_STATUS_PANIC = 7,
} TampStatus;

typedef enum TampReportFormat {
  TAMP_REPORT_FORMAT_TEXT = 0,
  TAMP_REPORT_FORMAT_STRUCTURED = 1,
} TampReportFormat;

/**
 * An adversary structure.
 */
typedef struct TampStructure TampStructure;

/**
 * The outcome of a scenario run.
 */
typedef struct TampTranscript TampTranscript;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *tamp_last_error(void);

/**
 * Parses `threshold(n,t)`, `sets(n; ...)` or `access(n; ...)`.
 *
 * # Safety
 * `literal` must be a nul-terminated string and `out` a writable pointer.
 */
enum TampStatus tamp_structure_parse(const char *literal, struct TampStructure **out);

/**
 * # Safety
 * `s` must come from [`tamp_structure_parse`] or be null.
 */
void tamp_structure_free(struct TampStructure *s);

/**
 * Number of players, or 0 for a null handle.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
uint32_t tamp_structure_players(const struct TampStructure *s);

/**
 * Writes whether the partial and the robust cover conditions hold.
 *
 * # Safety
 * `s` must be a live handle; the flags must be writable.
 */
enum TampStatus tamp_structure_admissibility(const struct TampStructure *s,
                                             bool *partial,
                                             bool *robust);

/**
 * Canonical literal for the structure; free with [`tamp_string_free`].
 *
 * # Safety
 * `s` must be a live handle or null.
 */
char *tamp_structure_literal(const struct TampStructure *s);

/**
 * Loads and runs scenario text.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` a writable pointer.
 */
enum TampStatus tamp_scenario_run(const char *text, struct TampTranscript **out);

/**
 * Loads and runs a scenario file; circuit paths resolve against its
 * directory.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a writable pointer.
 */
enum TampStatus tamp_scenario_run_file(const char *path, struct TampTranscript **out);

/**
 * True when every trial verdict and every aggregate check passed.
 *
 * # Safety
 * `t` must be a live handle or null.
 */
bool tamp_transcript_all_pass(const struct TampTranscript *t);

/**
 * Number of trials in the transcript.
 *
 * # Safety
 * `t` must be a live handle or null.
 */
uint64_t tamp_transcript_trials(const struct TampTranscript *t);

/**
 * Renders a report; free the string with [`tamp_string_free`].
 *
 * # Safety
 * `t` must be a live handle and `out` a writable pointer.
 */
enum TampStatus tamp_transcript_report(const struct TampTranscript *t,
                                       enum TampReportFormat format,
                                       char **out);

/**
 * # Safety
 * `t` must come from a `tamp_scenario_run*` call or be null.
 */
void tamp_transcript_free(struct TampTranscript *t);

/**
 * Runs the purification attack on a toy protocol (`entangling`,
 * `revealing` or `measure-then-flip`). `flip_fidelity` receives NaN when no
 * flip exists. `report` may be null; otherwise it receives the rendered
 * report.
 *
 * # Safety
 * `toy` must be a nul-terminated string; output pointers must be writable
 * (`report` may be null).
 */
enum TampStatus tamp_attack_demo(const char *toy,
                                 double *trace_distance,
                                 double *flip_fidelity,
                                 bool *distinguishable,
                                 char **report);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void tamp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAMP_H */
