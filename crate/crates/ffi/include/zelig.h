#ifndef ZELIG_H
#define ZELIG_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  ZELIG_STATUS_OK = 0,
  ZELIG_STATUS_NULL_ARGUMENT = 1,
  ZELIG_STATUS_INVALID_UTF8 = 2,
  ZELIG_STATUS_INVALID_ARGUMENT = 3,
  ZELIG_STATUS_IO = 4,
  ZELIG_STATUS_PARSE = 5,
  ZELIG_STATUS_INVALID_SCRIPT = 6,
  ZELIG_STATUS_MALFORMED_EVENT = 7,
  ZELIG_STATUS_STALE_EVENT = 8,
  ZELIG_STATUS_SESSION_ENDED = 9,
  ZELIG_STATUS_RUNTIME = 10,
  ZELIG_STATUS_PANIC = 11,
} ZeligStatus;

/**
 * A parsed script with its imports merged in.
 */
typedef struct ZeligScript ZeligScript;

/**
 * A running session. Not safe to share between threads without locking.
 */
typedef struct ZeligSession ZeligSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a
 * successful one. Valid until the next call into the library.
 */
const char *zelig_last_error(void);

/**
 * Static version string.
 */
const char *zelig_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void zelig_string_free(char *s);

/**
 * Parses script source. Imports are not resolved; use
 * [`zelig_script_load`] for files that import others.
 *
 * # Safety
 * `source` must be a valid C string and `out` writable.
 */
ZeligStatus zelig_script_parse(const char *source, ZeligScript **out);

/**
 * Reads a script file and merges its imports.
 *
 * # Safety
 * `path` must be a valid C string and `out` writable.
 */
ZeligStatus zelig_script_load(const char *path, ZeligScript **out);

/**
 * # Safety
 * `s` must be NULL or a handle from this library, freed once.
 */
void zelig_script_free(ZeligScript *s);

/**
 * Validates a script. Writes one tab-separated record per finding
 * (severity, code, line, message) to `records`, which may be NULL.
 * Returns `ZELIG_STATUS_INVALID_SCRIPT` when any finding is an error.
 *
 * # Safety
 * `s` must be a live script handle; `records` NULL or writable.
 */
ZeligStatus zelig_script_validate(const ZeligScript *s, char **records);

/**
 * Scores an utterance against the script's intent lexicon. Writes a JSON
 * array of `{intent_id, degree, best_phrase}` sorted by degree.
 *
 * # Safety
 * `s` must be a live script handle, `utterance` a valid C string and `out`
 * writable.
 */
ZeligStatus zelig_match_intent(const ZeligScript *s, const char *utterance, char **out);

/**
 * Starts a session. `config_json` is NULL for defaults or a JSON object with
 * any of `theta_fire`, `tau_notp`, `max_ticks`, `intent_threshold`,
 * `agent_idle`, `agents`.
 *
 * # Safety
 * `s` must be a live script handle, `config_json` NULL or a valid C string,
 * `out` writable. The session does not borrow the script.
 */
ZeligStatus zelig_session_start(const ZeligScript *s,
                                const char *config_json,
                                uint64_t seed,
                                ZeligSession **out);

/**
 * # Safety
 * `s` must be NULL or a handle from this library, freed once.
 */
void zelig_session_free(ZeligSession *s);

/**
 * Feeds one event, e.g. `{"kind":"utterance","payload":"hello"}`. Without a
 * `t` a tick is stamped one past the clock and anything else at the clock.
 * On success `update` (may be NULL) receives the wire update carrying the
 * new log entries. A rejected event leaves the session unchanged.
 *
 * # Safety
 * `s` must be a live session handle, `event_json` a valid C string and
 * `update` NULL or writable.
 */
ZeligStatus zelig_session_handle_event(ZeligSession *s, const char *event_json, char **update);

/**
 * Writes a wire update holding the whole log so far.
 *
 * # Safety
 * `s` must be a live session handle and `out` writable.
 */
ZeligStatus zelig_session_snapshot(ZeligSession *s, char **out);

/**
 * Writes the session's action log as JSON Lines, header first.
 *
 * # Safety
 * `s` must be a live session handle and `out` writable.
 */
ZeligStatus zelig_session_log(ZeligSession *s, char **out);

/**
 * Current clock, or 0 for a NULL handle.
 *
 * # Safety
 * `s` must be NULL or a live session handle.
 */
uint64_t zelig_session_clock(const ZeligSession *s);

/**
 * True once the session has reached END. NULL counts as ended.
 *
 * # Safety
 * `s` must be NULL or a live session handle.
 */
bool zelig_session_ended(const ZeligSession *s);

/**
 * Runs a JSON Lines trace from a fresh session and writes the resulting
 * log, exactly as `zelig run` prints it.
 *
 * # Safety
 * `s` must be a live script handle, `trace_jsonl` a valid C string,
 * `config_json` NULL or a valid C string, `log_out` writable.
 */
ZeligStatus zelig_run_trace(const ZeligScript *s,
                            const char *trace_jsonl,
                            const char *config_json,
                            uint64_t seed,
                            char **log_out);

/**
 * 1 − max(degrees). NaN if `degrees` is NULL while `len` is not 0.
 *
 * # Safety
 * `degrees` must point to `len` doubles, or be NULL with `len` 0.
 */
double zelig_notp_degree(const double *degrees, size_t len);

/**
 * Necessity of a proposition from the possibility of its negation.
 */
double zelig_necessity(double pos_of_negation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZELIG_H */
