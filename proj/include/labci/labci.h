// Copyright 2026 The labci Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LABCI_LABCI_H
#define LABCI_LABCI_H

#include <stddef.h>
#include <stdint.h>

#if defined(LABCI_BUILDING)
#define LABCI_API __attribute__((visibility("default")))
#else
#define LABCI_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every function returning labci_status sets a thread-local
 * error message (labci_last_error) when it returns anything but LABCI_OK. */
typedef enum labci_status {
  LABCI_OK = 0,
  LABCI_INVALID_ARGUMENT = 1,
  LABCI_SYNTAX = 2,
  LABCI_VALIDATION = 3,
  LABCI_NOT_FOUND = 4,
  LABCI_ILLEGAL_TRANSITION = 5,
  LABCI_AUTH = 6,
  LABCI_OUT_OF_ORDER_CHUNK = 7,
  LABCI_JOB_NOT_RUNNING = 8,
  LABCI_PATH_ESCAPES_WORKSPACE = 9,
  LABCI_PATH_REJECTED = 10,
  LABCI_DIGEST_MISMATCH = 11,
  LABCI_CORRUPT_BLOB = 12,
  LABCI_DUPLICATE_JOB = 13,
  LABCI_NOT_TERMINAL = 14,
  LABCI_MATRIX_SHAPE_MISMATCH = 15,
  LABCI_CROSS_COMMIT = 16,
  LABCI_EMPTY_STAGE_PLAN = 17,
  LABCI_UNKNOWN_COMMIT = 18,
  LABCI_SNAPSHOT_NOT_FOUND = 19,
  LABCI_STORAGE = 20,
  LABCI_BACKEND_UNAVAILABLE = 21,
  LABCI_WORKSPACE_MISSING = 22,
  LABCI_SUBMISSION_REFUSED = 23,
  LABCI_BATCH_LOST = 24,
  LABCI_FETCH_FAILURE = 25,
  LABCI_NETWORK = 26,
  LABCI_ADDRESS_IN_USE = 27,
  LABCI_INTERNAL = 28
} labci_status;

typedef struct labci_server labci_server;
typedef struct labci_client labci_client;
typedef struct labci_runner labci_runner;

LABCI_API const char* labci_version(void);
/* Snake-case name of a status, e.g. "digest_mismatch". Never NULL. */
LABCI_API const char* labci_status_name(labci_status status);
/* Message for the last failed call on this thread; "" if none. */
LABCI_API const char* labci_last_error(void);
/* 1-based config line of the last error, or 0. */
LABCI_API int labci_last_error_line(void);
/* Releases any buffer returned through an out-parameter. NULL is ignored. */
LABCI_API void labci_free(void* buffer);

/* ---- config and snapshots ---- */

/* Parses a pipeline config file. On success *report_json receives
 * {"warnings":[{code,message,line}], "jobs":[{matrix_index, stages:[...]}]}.
 * Syntax and schema errors return LABCI_SYNTAX / LABCI_VALIDATION. */
LABCI_API labci_status labci_validate_file(const char* path, char** report_json);
LABCI_API labci_status labci_validate_text(const char* text, size_t len, char** report_json);

/* Hex commit id of a directory tree. */
LABCI_API labci_status labci_snapshot_digest(const char* dir, char** commit_hex);

/* ---- single-process run ---- */

/* options_json (may be NULL): {"data_dir", "only": [stage...], "backend":
 * "local"|"batch_bridge", "timeout_unit_ms", "repo_id", "scheduler": {...}}.
 * *build_json receives the finished build with per-job results. */
LABCI_API labci_status labci_run_local(const char* source_dir, const char* options_json, char** build_json);

/* ---- server ---- */

LABCI_API labci_status labci_server_open(const char* data_dir, int parallel_cap, int heartbeat_ms,
                                         labci_server** out);
/* Serves HTTP on "host:port" in background threads. Port 0 picks a free
 * port, returned in *bound_port (may be NULL). */
LABCI_API labci_status labci_server_listen(labci_server* server, const char* addr, int* bound_port);
/* Stops serving and closes the data dir. NULL is ignored. */
LABCI_API void labci_server_close(labci_server* server);
LABCI_API labci_status labci_server_push(labci_server* server, const char* repo_id, const char* commit_id,
                                         const char* snapshot_ref, const char* event_id, char** build_json);
LABCI_API labci_status labci_server_get_build(labci_server* server, int64_t build_id, char** build_json);
LABCI_API labci_status labci_server_get_log(labci_server* server, int64_t job_id, char** bytes, size_t* len);
LABCI_API labci_status labci_server_ledger(labci_server* server, const char* repo_id, const char* commit_id,
                                           char** entries_json);

/* ---- HTTP client ---- */

/* base_url like "127.0.0.1:8975" or "http://host:port". token may be NULL. */
LABCI_API labci_status labci_client_open(const char* base_url, const char* token, labci_client** out);
LABCI_API void labci_client_close(labci_client* client);

/* Packs a directory and uploads it; *commit_hex receives its commit id. */
LABCI_API labci_status labci_client_upload_dir(labci_client* client, const char* dir, char** commit_hex);
LABCI_API labci_status labci_client_push(labci_client* client, const char* repo_id, const char* commit_id,
                                         const char* snapshot_ref, const char* event_id, char** build_json);
/* only_csv: comma-separated stage names, or NULL for the whole plan. */
LABCI_API labci_status labci_client_trigger(labci_client* client, const char* repo_id, const char* commit_id,
                                            const char* only_csv, char** build_json);
LABCI_API labci_status labci_client_cancel(labci_client* client, int64_t build_id, char** build_json);
LABCI_API labci_status labci_client_build(labci_client* client, int64_t build_id, char** build_json);
LABCI_API labci_status labci_client_builds(labci_client* client, const char* repo_id, char** builds_json);
LABCI_API labci_status labci_client_job(labci_client* client, int64_t job_id, char** job_json);
/* Committed log bytes from offset; *state receives the job state. */
LABCI_API labci_status labci_client_log(labci_client* client, int64_t job_id, uint64_t offset, char** bytes,
                                        size_t* len, char** state);
LABCI_API labci_status labci_client_artifacts(labci_client* client, int64_t job_id, char** manifest_json);
LABCI_API labci_status labci_client_artifact(labci_client* client, int64_t job_id, const char* path, char** bytes,
                                             size_t* len);
LABCI_API labci_status labci_client_fingerprint(labci_client* client, int64_t job_id, char** fingerprint_json);
LABCI_API labci_status labci_client_ledger(labci_client* client, const char* repo_id, const char* commit_id,
                                           char** entries_json);
/* *report_json receives the report; *text (may be NULL) a readable rendering. */
LABCI_API labci_status labci_client_compare(labci_client* client, int64_t build_a, int64_t build_b, int cross_commit,
                                            char** report_json, char** text);
LABCI_API labci_status labci_client_scheduler(labci_client* client, char** scheduler_json);

/* ---- runner ---- */

/* config_json: {"server", "token", "backend": "local"|"batch_bridge",
 * "workspace", "poll_ms", "heartbeat_ms", "kind": "cloud"|"selfhosted",
 * "os", "tags", "scheduler_config" (path), "timeout_unit_ms"}.
 * Without a token the runner registers itself on first use. */
LABCI_API labci_status labci_runner_create(const char* config_json, labci_runner** out);
/* Blocks serving jobs until labci_runner_stop. With until_idle != 0, returns
 * once nothing is claimable. *jobs_run (may be NULL) counts finished jobs. */
LABCI_API labci_status labci_runner_run(labci_runner* runner, int until_idle, int* jobs_run);
/* Safe to call from any thread. */
LABCI_API void labci_runner_stop(labci_runner* runner);
LABCI_API void labci_runner_destroy(labci_runner* runner);

#ifdef __cplusplus
}
#endif

#endif /* LABCI_LABCI_H */
