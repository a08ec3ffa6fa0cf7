#ifndef STEPWISE_H
#define STEPWISE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StepwiseStatus {
  STEPWISE_STATUS_OK = 0,
  // A required pointer argument was null.
  STEPWISE_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  STEPWISE_STATUS_INVALID_UTF8 = 2,
  // Theory source or proof step text did not parse.
  STEPWISE_STATUS_PARSE = 3,
  // The theorem or session does not exist.
  STEPWISE_STATUS_NOT_FOUND = 4,
  // The step ran and was rejected; the session is unchanged.
  STEPWISE_STATUS_STEP_FAILED = 5,
  // Any other prover or search error.
  STEPWISE_STATUS_BACKEND = 6,
  // A panic was caught at the boundary.
  STEPWISE_STATUS_PANIC = 7,
} StepwiseStatus;

// An in-process prover. Not thread-safe; use one per thread.
typedef struct StepwiseProver StepwiseProver;

// An open proof session on one theorem.
typedef struct StepwiseSession StepwiseSession;

// A theory loaded into a prover.
typedef struct StepwiseTheory StepwiseTheory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread. Valid until the next
// failing call on the same thread. Never null.
const char *stepwise_last_error(void);

struct StepwiseProver *stepwise_prover_new(void);

// # Safety
// `prover` is null or came from [`stepwise_prover_new`] and is not used afterwards.
void stepwise_prover_free(struct StepwiseProver *prover);

// Parses and registers a theory.
//
// # Safety
// Pointers are valid; `source` is a NUL-terminated string.
enum StepwiseStatus stepwise_load_theory(struct StepwiseProver *prover,
                                         const char *source,
                                         struct StepwiseTheory **out_theory);

// # Safety
// `theory` is null or came from [`stepwise_load_theory`].
void stepwise_theory_free(struct StepwiseTheory *theory);

// Opens a session on `theorem`.
//
// # Safety
// Pointers are valid; `theory` was loaded into `prover`.
enum StepwiseStatus stepwise_start(struct StepwiseProver *prover,
                                   const struct StepwiseTheory *theory,
                                   const char *theorem,
                                   struct StepwiseSession **out_session);

// Applies one step such as `apply [f1]`. On success `*out_complete` says
// whether the proof is finished. A rejected step returns
// `STEPWISE_STATUS_STEP_FAILED` and leaves the session as it was.
//
// # Safety
// Pointers are valid; `session` belongs to `prover`.
enum StepwiseStatus stepwise_apply(struct StepwiseProver *prover,
                                   const struct StepwiseSession *session,
                                   const char *step,
                                   uint64_t timeout_ms,
                                   bool *out_complete);

// Renders the session's current goals. Free the result with
// [`stepwise_string_free`].
//
// # Safety
// Pointers are valid; `session` belongs to `prover`.
enum StepwiseStatus stepwise_state(struct StepwiseProver *prover,
                                   const struct StepwiseSession *session,
                                   char **out_text);

// Closes the session inside the prover and frees the handle. Either
// pointer may be null.
//
// # Safety
// `session` is null or came from [`stepwise_start`] on `prover`.
void stepwise_session_free(struct StepwiseProver *prover, struct StepwiseSession *session);

// Runs the full search with the built-in mock generator and default
// settings. Writes the theorem report as JSON; a failed search is still
// `STEPWISE_STATUS_OK` with `"outcome": "failed"` in the report.
//
// # Safety
// Pointers are valid; `theory` was loaded into `prover`.
enum StepwiseStatus stepwise_prove(struct StepwiseProver *prover,
                                   const struct StepwiseTheory *theory,
                                   const char *theorem,
                                   uint64_t seed,
                                   char **out_json);

// # Safety
// `text` is null or a string returned by this library.
void stepwise_string_free(char *text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEPWISE_H */
