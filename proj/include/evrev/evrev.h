/* Copyright 2026 The evrev Authors
 * SPDX-License-Identifier: Apache-2.0
 */

/* C interface to the evrev review engine.
 *
 * Every function returns an evrev_status. On failure a message for the
 * calling thread is available from evrev_last_error() until the next call.
 * Strings returned through `char** out` parameters are owned by the caller
 * and must be released with evrev_string_free(). Structured results are
 * JSON documents.
 */

#ifndef EVREV_EVREV_H_
#define EVREV_EVREV_H_

#include <stddef.h>

#if defined(_WIN32)
#define EVREV_API __declspec(dllexport)
#elif defined(__GNUC__)
#define EVREV_API __attribute__((visibility("default")))
#else
#define EVREV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum evrev_status {
  EVREV_OK = 0,
  EVREV_INPUT_ERROR = 1,
  EVREV_IO_ERROR = 2,
  EVREV_PARSE_ERROR = 3,
  EVREV_NOT_AN_ARRAY = 10,
  EVREV_UNRECOGNIZED_SHAPE = 11,
  EVREV_DEGENERATE_BOX = 12,
  EVREV_MISSING_IMAGE_SIZE = 13,
  EVREV_NEGATIVE_ORIGIN = 14,
  EVREV_ADAPTATION_FAILED = 15,
  EVREV_BACKEND_TIMEOUT = 20,
  EVREV_BACKEND_MALFORMED_REPLY = 21,
  EVREV_BACKEND_UNAVAILABLE = 22,
  EVREV_ALL_REGIONS_DEGENERATE = 23,
  EVREV_NO_QA_GENERATED = 24,
  EVREV_UNKNOWN_QA = 30,
  EVREV_INVALID_RECORD = 31,
  EVREV_ALREADY_PROPOSED = 32,
  EVREV_INVALID_TARGET = 33,
  EVREV_ILLEGAL_IN_STATE = 34,
  EVREV_GEOMETRY_ERROR = 35,
  EVREV_CORRUPT_LOG = 36,
  EVREV_NOT_REVIEWED = 37,
  EVREV_UNVERIFIED_QA = 38,
  EVREV_MISMATCHED_INSTANCES = 40,
  EVREV_EMPTY_LABEL_SET = 41,
  EVREV_DUPLICATE_LABEL = 42,
  EVREV_NOT_FINALIZED = 50,
  EVREV_NOT_FOUND = 60,
  EVREV_CONFLICT = 61,
  EVREV_PORT_IN_USE = 62,
  EVREV_BAD_CONFIG = 63,
  EVREV_INTERNAL = 99
} evrev_status;

typedef struct evrev_workspace evrev_workspace;
typedef struct evrev_server evrev_server;

EVREV_API const char* evrev_version(void);

/* Name of a status value, e.g. "UnknownQA". */
EVREV_API const char* evrev_status_name(int status);

/* Message for the last failed call on this thread; "" when none. */
EVREV_API const char* evrev_last_error(void);

EVREV_API void evrev_string_free(char* s);

/* Opens (creating if needed) the data directory. `config_json` may be NULL
 * or an object with any of: backend ("mock" | "http"), backend_url,
 * backend_token, prompt_file, backend_timeout_ms, backend_retries,
 * backend_concurrency, mock_seed, retain_iou. */
EVREV_API evrev_status evrev_workspace_open(const char* data_dir, const char* config_json,
                                            evrev_workspace** out);
EVREV_API void evrev_workspace_close(evrev_workspace* ws);

/* Checks a dataset file without storing anything. `out` receives
 * [{"index", "image_uid", "adapter", "violations": [...]}]. */
EVREV_API evrev_status evrev_validate_file(const char* dataset_path, char** out);

/* Ingests a dataset file. `out` receives {"stored": [uids...]}. */
EVREV_API evrev_status evrev_ingest(evrev_workspace* ws, const char* dataset_path, char** out);

EVREV_API evrev_status evrev_list_records(evrev_workspace* ws, char** out);
EVREV_API evrev_status evrev_get_record(evrev_workspace* ws, const char* image_uid, char** out);

/* Session operations. `qa_id` may be "q_0" for records without QA items.
 * Each writes the session document (or the applied edit) to `out`, which
 * may be NULL. */
EVREV_API evrev_status evrev_propose(evrev_workspace* ws, const char* image_uid,
                                     const char* qa_id, char** out);
EVREV_API evrev_status evrev_apply_edit(evrev_workspace* ws, const char* image_uid,
                                        const char* qa_id, const char* edit_json, char** out);
EVREV_API evrev_status evrev_finalize(evrev_workspace* ws, const char* image_uid,
                                      const char* qa_id, char** out);
EVREV_API evrev_status evrev_get_session(evrev_workspace* ws, const char* image_uid,
                                         const char* qa_id, char** out);

/* Writes every finalized session to out_dir. `out` receives the written
 * paths as a JSON array. */
EVREV_API evrev_status evrev_export(evrev_workspace* ws, const char* out_dir, int overlay,
                                    char** out);

/* Utility table over a directory of session files. format: "text", "csv"
 * or "json". */
EVREV_API evrev_status evrev_evaluate(const char* sessions_dir, const char* format, char** out);

/* Agreement table over one or more label CSV files. format as above. */
EVREV_API evrev_status evrev_iaa(const char* const* label_files, size_t count,
                                 const char* format, char** out);

/* HTTP service. `options_json` may be NULL or an object with host, port,
 * ui_dir, labels (array of paths). evrev_server_start binds and serves on a
 * background thread; evrev_server_wait blocks until it stops. */
EVREV_API evrev_status evrev_server_start(evrev_workspace* ws, const char* options_json,
                                          evrev_server** out);
EVREV_API int evrev_server_port(const evrev_server* server);
EVREV_API evrev_status evrev_server_wait(evrev_server* server);
EVREV_API void evrev_server_stop(evrev_server* server);

#ifdef __cplusplus
}
#endif

#endif /* EVREV_EVREV_H_ */
