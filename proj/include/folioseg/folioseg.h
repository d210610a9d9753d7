#ifndef FOLIOSEG_H
#define FOLIOSEG_H

/*
 * C interface to the folioseg annotation core.
 *
 * Handles are opaque and owned by the caller; free each with its matching
 * *_free function. Every fallible call returns an fs_status; on failure
 * fs_last_error_message() describes the error for the calling thread.
 * Structured results are returned as UTF-8 JSON strings allocated by the
 * library and released with fs_string_free().
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define FS_API __declspec(dllexport)
#else
#define FS_API __attribute__((visibility("default")))
#endif

typedef enum fs_status {
  FS_OK = 0,
  FS_ERR_INVALID_ARGUMENT = 1,
  FS_ERR_DIMENSION_MISMATCH = 2,
  FS_ERR_NOT_FOUND = 3,
  FS_ERR_ILLEGAL_TRANSITION = 4,
  FS_ERR_VERSION_MISMATCH = 5,
  FS_ERR_INTEGRITY = 6,
  FS_ERR_IO = 7,
  FS_ERR_PARSE = 8,
  FS_ERR_PROVIDER_UNAVAILABLE = 9,
  FS_ERR_PROVIDER_TIMEOUT = 10,
  FS_ERR_PROVIDER_ERROR = 11,
  FS_ERR_CAPABILITY_MISSING = 12,
  FS_ERR_CONFLICT = 13,
  FS_ERR_INTERNAL = 14
} fs_status;

typedef enum fs_import_kind { FS_IMPORT_TAGS = 0, FS_IMPORT_BOXES = 1 } fs_import_kind;
typedef enum fs_export_scope { FS_EXPORT_VALIDATED_ONLY = 0, FS_EXPORT_ALL_INSTANCES = 1 } fs_export_scope;

typedef struct fs_project fs_project;
typedef struct fs_provider fs_provider;
typedef struct fs_service fs_service;
typedef struct fs_provider_server fs_provider_server;

FS_API const char* fs_version(void);
/* snake_case name of a status, e.g. "not_found". */
FS_API const char* fs_status_name(fs_status status);
/* Message of the last failed call on this thread; "" after a success. */
FS_API const char* fs_last_error_message(void);
FS_API void fs_string_free(char* s);

/* Projects */

FS_API fs_status fs_project_create(const char* name, fs_project** out);
FS_API fs_status fs_project_load(const char* path, fs_project** out);
/* Atomic write: a crash leaves either the old or the new file. */
FS_API fs_status fs_project_save(const fs_project* project, const char* path);
FS_API void fs_project_free(fs_project* project);
/* Directory for remote images fetched on behalf of this project. */
FS_API fs_status fs_project_set_cache_dir(fs_project* project, const char* dir);

/* Registers an image (path or http(s) URL). A NULL id derives one from the
 * file name. shelfmark and folio_ref may be NULL. */
FS_API fs_status fs_project_add_folio(fs_project* project, const char* id, const char* image_uri,
                                      const char* shelfmark, const char* folio_ref, const char* actor);
/* label_json: {"id"?, "lemma", "gloss"?, "language"?, "aliases"?, "parent"?}. */
FS_API fs_status fs_project_add_label(fs_project* project, const char* label_json, const char* actor);

/* Legacy catalogue import from a .csv or .json file. The report lists
 * created ids, rejected records (with line numbers) and warnings; a
 * partial import still returns FS_OK with "partial": true. */
FS_API fs_status fs_project_import(fs_project* project, const char* path, fs_import_kind kind, const char* actor,
                                   char** report_json);

FS_API fs_status fs_project_stats(const fs_project* project, char** stats_json);
/* The whole project document as saved on disk. */
FS_API fs_status fs_project_json(const fs_project* project, char** project_json);
FS_API fs_status fs_project_export_coco(const fs_project* project, fs_export_scope scope, char** document_json,
                                        char** report_json);

/* Providers */

/* "mock:<fixture dir>" (or "mock") for the built-in deterministic provider,
 * otherwise the base URL of a model sidecar. */
FS_API fs_status fs_provider_open(const char* url, int64_t timeout_ms, fs_provider** out);
FS_API void fs_provider_free(fs_provider* provider);
FS_API fs_status fs_provider_describe(fs_provider* provider, char** descriptor_json);

/* Filters whole-image proposals and stores them as unlabeled drafts.
 * config_json may be NULL or a partial {"min_quality", "min_area",
 * "nms_iou", "max_proposals"} over the project's defaults. */
FS_API fs_status fs_automask(fs_project* project, fs_provider* provider, const char* folio_id,
                             const char* config_json, const char* actor, char** result_json);
/* phrases_json: array of strings. Stores one labeled draft per detection. */
FS_API fs_status fs_ground(fs_project* project, fs_provider* provider, const char* folio_id, const char* phrases_json,
                           const char* actor, char** result_json);

/* HTTP service */

/* config_json uses the service config file format; relative paths resolve
 * against base_dir (may be NULL). */
FS_API fs_status fs_service_start(const char* config_json, const char* base_dir, fs_service** out);
FS_API int fs_service_port(const fs_service* service);
/* Blocks until another thread calls fs_service_stop. */
FS_API fs_status fs_service_wait(fs_service* service);
/* Drains in-flight requests and jobs; every accepted write is on disk on return. */
FS_API fs_status fs_service_stop(fs_service* service);
FS_API void fs_service_free(fs_service* service);

/* Serves a provider over the sidecar protocol (port 0 picks a free one). */
FS_API fs_status fs_provider_server_start(fs_provider* provider, const char* host, int port, fs_provider_server** out);
FS_API int fs_provider_server_port(const fs_provider_server* server);
FS_API fs_status fs_provider_server_wait(fs_provider_server* server);
FS_API fs_status fs_provider_server_stop(fs_provider_server* server);
FS_API void fs_provider_server_free(fs_provider_server* server);

#ifdef __cplusplus
}
#endif

#endif
