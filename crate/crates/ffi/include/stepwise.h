#ifndef STEPWISE_H
#define STEPWISE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StepwiseStatus {
  STEPWISE_STATUS_OK = 0,
  STEPWISE_STATUS_NULL_ARGUMENT = 1,
  STEPWISE_STATUS_INVALID_UTF8 = 2,
  STEPWISE_STATUS_INVALID_ARGUMENT = 3,
  STEPWISE_STATUS_INVALID_FIXTURE = 4,
  STEPWISE_STATUS_MODEL = 5,
  STEPWISE_STATUS_NOT_ACCEPTING = 6,
  STEPWISE_STATUS_ENGINE = 7,
  STEPWISE_STATUS_PANIC = 8,
} StepwiseStatus;

typedef enum StepwiseFormat {
  STEPWISE_FORMAT_MARKDOWN = 0,
  STEPWISE_FORMAT_JSON = 1,
} StepwiseFormat;

// Opaque scripted model backend.
typedef struct StepwiseBackend StepwiseBackend;

// Opaque session.
typedef struct StepwiseSession StepwiseSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Describes the last failure on this thread, or NULL. The pointer stays
// valid until the next call into this library from the same thread.
const char *stepwise_last_error(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void stepwise_string_free(char *s);

// Builds a scripted backend from a JSON script (`model` plus `entries`).
//
// # Safety
// `fixture_json` must be a NUL-terminated string; `out` must be writable.
enum StepwiseStatus stepwise_backend_from_script(const char *fixture_json,
                                                 struct StepwiseBackend **out);

// # Safety
// `backend` must come from `stepwise_backend_from_script` and not be freed
// twice. NULL is ignored.
void stepwise_backend_free(struct StepwiseBackend *backend);

// Starts a session and drafts the first chain. `config_json` may be NULL
// for defaults. `out_messages`, if not NULL, receives a JSON array of the
// messages to show the user.
//
// # Safety
// Pointers must be valid; strings NUL-terminated.
enum StepwiseStatus stepwise_session_start(const struct StepwiseBackend *backend,
                                           const char *session_id,
                                           const char *query,
                                           const char *config_json,
                                           struct StepwiseSession **out_session,
                                           char **out_messages);

// Restores a session from its persisted JSON envelope.
//
// # Safety
// Pointers must be valid; `envelope_json` NUL-terminated.
enum StepwiseStatus stepwise_session_from_json(const char *envelope_json,
                                               struct StepwiseSession **out_session);

// Feeds one user utterance. On success the session is updated in place;
// on failure it is left exactly as it was.
//
// # Safety
// Pointers must be valid; `utterance` NUL-terminated.
enum StepwiseStatus stepwise_session_handle(const struct StepwiseBackend *backend,
                                            struct StepwiseSession *session,
                                            const char *utterance,
                                            char **out_messages);

// Writes the lifecycle state name, e.g. "AwaitingReview".
//
// # Safety
// Pointers must be valid.
enum StepwiseStatus stepwise_session_state(const struct StepwiseSession *session, char **out);

// Writes the current chain in its canonical `[Step N] text` form.
//
// # Safety
// Pointers must be valid.
enum StepwiseStatus stepwise_session_chain(const struct StepwiseSession *session, char **out);

// Writes the session as Markdown or as its JSON envelope.
//
// # Safety
// Pointers must be valid.
enum StepwiseStatus stepwise_session_export(const struct StepwiseSession *session,
                                            enum StepwiseFormat format,
                                            char **out);

// # Safety
// `session` must come from this library and not be freed twice. NULL is
// ignored.
void stepwise_session_free(struct StepwiseSession *session);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEPWISE_H */
