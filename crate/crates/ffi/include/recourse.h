#ifndef RECOURSE_H
#define RECOURSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define RC_OK 0

// A required pointer argument was null.
#define RC_NULL_ARGUMENT 1

// A string argument was not valid UTF-8.
#define RC_INVALID_UTF8 2

// The request was malformed or named unknown features.
#define RC_BAD_REQUEST 3

// The request was well-formed but no feasible candidate exists.
#define RC_UNPROCESSABLE 4

// Reading artifacts from disk failed.
#define RC_IO 5

// Artifacts were present but unusable (corrupt, mismatched schema).
#define RC_INVALID_ARTIFACT 6

#define RC_INTERNAL 7

// A Rust panic was caught at the boundary.
#define RC_PANIC 8

// Loaded artifacts. Opaque to C; safe to share between threads for
// concurrent [`rc_recourse_json`] calls.
typedef struct RcSnapshot RcSnapshot;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string. Do not free.
const char *rc_version(void);

// Message for the last failed call on this thread, or null after a
// successful call. Valid until the next library call on this thread.
const char *rc_last_error(void);

// Loads a run directory written by the `recourse` CLI.
//
// # Safety
// `dir` must be a NUL-terminated string and `out` a writable pointer.
int32_t rc_snapshot_load_dir(const char *dir, struct RcSnapshot **out);

// # Safety
// `snap` must come from [`rc_snapshot_load_dir`] and not be used again.
// Null is ignored.
void rc_snapshot_free(struct RcSnapshot *snap);

// Feature schema as JSON, identical to the HTTP `/v1/schema` body.
//
// # Safety
// `snap` must be a live snapshot and `out` a writable pointer.
int32_t rc_schema_json(const struct RcSnapshot *snap, char **out);

// Samples recourse for one instance. `request` is the JSON body accepted
// by `/v1/recourse`; the response JSON is written to `out`.
//
// # Safety
// `snap` must be a live snapshot, `request` a NUL-terminated string and
// `out` a writable pointer.
int32_t rc_recourse_json(const struct RcSnapshot *snap, const char *request, char **out);

// # Safety
// `s` must come from this library and not be used again. Null is ignored.
void rc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RECOURSE_H */
