#ifndef CGROUND_CGROUND_H
#define CGROUND_CGROUND_H

/*
 * C interface to the common-ground conversational QA library.
 *
 * Every function returns a cg_status. On failure a thread-local message is
 * available from cg_last_error() until the next call on the same thread.
 * Strings returned through char** out-parameters are heap allocated and must
 * be released with cg_string_free(). Structured results are JSON documents.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CG_API __declspec(dllexport)
#else
#define CG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cg_status {
    CG_OK = 0,
    CG_ERR_INVALID_ARGUMENT = 1,
    CG_ERR_PARSE = 2,
    CG_ERR_INTEGRITY = 3,
    CG_ERR_IO = 4,
    CG_ERR_NOT_FOUND = 5,
    CG_ERR_CONFIG = 6,
    CG_ERR_BACKEND = 7,
    CG_ERR_TIMEOUT = 8,
    CG_ERR_INTERNAL = 9
} cg_status;

typedef struct cg_index cg_index;
typedef struct cg_service cg_service;

CG_API const char* cg_version(void);
CG_API const char* cg_status_string(cg_status status);
CG_API const char* cg_last_error(void);
CG_API void cg_string_free(char* s);

/* Dataset construction ---------------------------------------------------- */

/* Adds gold_cg to every turn (and doc when doc_source is given).
 * backends_json may be NULL; it selects the annotator. */
CG_API cg_status cg_build_gold_cg(const char* in_path, const char* doc_source_path, const char* out_path,
                                  const char* backends_json, char** report_json);

CG_API cg_status cg_build_selector_data(const char* in_path, const char* out_path, char** report_json);

CG_API cg_status cg_split(const char* in_path, double fraction, uint64_t seed, const char* train_out,
                          const char* validation_out, char** report_json);

/* BM25 index -------------------------------------------------------------- */

/* options_json may be NULL: {"stem": false, "remove_stopwords": false}. */
CG_API cg_status cg_index_build(const char* collection_path, const char* options_json, cg_index** out);
CG_API cg_status cg_index_load(const char* path, cg_index** out);
CG_API cg_status cg_index_save(const cg_index* index, const char* path);
CG_API cg_status cg_index_stats(const cg_index* index, char** stats_json);
/* params_json may be NULL: {"k1": 0.82, "b": 0.68, "top_n": 20}. */
CG_API cg_status cg_index_search(const cg_index* index, const char* query, const char* params_json,
                                 char** results_json);
CG_API void cg_index_free(cg_index* index);

/* Evaluation -------------------------------------------------------------- */

/* request: {"dataset", "index", "setups"?, "mu"?, "mu_file"?, "default_mu"?,
 *           "backends"?, "bm25"?, "max_reader_tokens"?, "fusion_raw"?,
 *           "history"?: "gold"|"system", "threads"?, "emit_records"?}
 * report:  {"results": {setup: metrics}, "table": text} */
CG_API cg_status cg_bench(const char* request_json, char** report_json);

/* request: {"setup", "validation", "index", "grid"?, "mu_file"?, ...bench keys}
 * result:  {"setup", "mu", "f1_by_mu"} ; merges the value into mu_file when given. */
CG_API cg_status cg_tune_mu(const char* request_json, char** result_json);

/* Live sessions ----------------------------------------------------------- */

/* config_json holds the service config; index may be NULL, in which case
 * the config's "index" path is loaded. The index is shared, not copied. */
CG_API cg_status cg_service_create(const char* config_json, const cg_index* index, cg_service** out);
/* body_json may be NULL: {"doc_title"?, "doc_first_sentence"?} */
CG_API cg_status cg_service_open_session(cg_service* service, const char* body_json, char** session_id);
CG_API cg_status cg_service_ask(cg_service* service, const char* session_id, const char* question,
                                char** response_json);
CG_API cg_status cg_service_get_session(cg_service* service, const char* session_id, char** transcript_json);
CG_API cg_status cg_service_close_session(cg_service* service, const char* session_id);
CG_API cg_status cg_service_expire_idle(cg_service* service, size_t* expired);
/* Blocks serving HTTP until cg_service_stop(). host NULL / port < 0 use the config. */
CG_API cg_status cg_service_serve(cg_service* service, const char* host, int port);
CG_API cg_status cg_service_stop(cg_service* service);
CG_API void cg_service_free(cg_service* service);

/* Model adapters ---------------------------------------------------------- */

/* One request over the endpoint described by endpoint_json
 * ({"command"|"url"|"echo_fixtures", "timeout_ms"?}). Adapter-level failures
 * come back as error responses with CG_OK. */
CG_API cg_status cg_adapter_call(const char* endpoint_json, const char* request_line, char** response_line);

/* Serves the stdio protocol from a fixture file until stdin closes. */
CG_API cg_status cg_adapter_echo_serve_stdio(const char* fixtures_path);

#ifdef __cplusplus
}
#endif

#endif
