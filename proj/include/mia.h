/*
 * mia - signature-conditioned retrieval over long documents.
 *
 * C interface to the shared library. All functions return a mia_status;
 * MIA_OK means success. On failure, mia_errmsg() returns a description of
 * the most recent error on the calling thread. Strings returned through
 * `char**` out-parameters are heap-allocated and must be released with
 * mia_string_free().
 *
 * Handles are opaque. An engine owns the configured embedding and LLM
 * providers plus the prompt templates; an index is an immutable loaded
 * document index and may be shared across threads. Engine calls are
 * internally rate-limited per provider.
 */

#ifndef MIA_H
#define MIA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MIA_API __declspec(dllexport)
#else
#define MIA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mia_status {
  MIA_OK = 0,
  MIA_ERR_INVALID_ARG = 1,
  MIA_ERR_IO = 2,
  MIA_ERR_CONFIG = 3,
  MIA_ERR_CORRUPT_INDEX = 4,
  MIA_ERR_VERSION_MISMATCH = 5,
  MIA_ERR_EMPTY_INPUT = 6,      /* empty document / pool / index / gold */
  MIA_ERR_PROVIDER = 7,         /* provider failure or timeout */
  MIA_ERR_PARSE = 8,            /* unparseable model output or data file */
  MIA_ERR_OUT_OF_RANGE = 9,
  MIA_ERR_INTERNAL = 10
} mia_status;

typedef struct mia_engine mia_engine;
typedef struct mia_index mia_index;

/* Message for the most recent failure on this thread; never NULL. */
MIA_API const char* mia_errmsg(void);

MIA_API void mia_string_free(char* s);

/* 0=debug 1=info 2=warn 3=error 4=off */
MIA_API void mia_set_log_level(int level);

/* ------------------------------------------------------------------ */
/* Engine                                                              */
/* ------------------------------------------------------------------ */

/*
 * Creates an engine from a YAML config file (providers and template
 * directory). Passing NULL or "" yields the offline defaults: hash
 * embeddings plus deterministic offline LLM responders.
 */
MIA_API mia_status mia_engine_create(const char* config_path, mia_engine** out);
MIA_API void mia_engine_destroy(mia_engine* engine);

/* ------------------------------------------------------------------ */
/* Index                                                               */
/* ------------------------------------------------------------------ */

/*
 * Builds an index from a corpus (directory of .txt books or a JSONL file)
 * and writes it to out_path. Multiple books merge in order into one long
 * document. cache_dir may be NULL to disable the summary cache.
 * info_json_out (optional) receives the built index description.
 */
MIA_API mia_status mia_index_build(mia_engine* engine, const char* corpus_path,
                                   const char* out_path, uint32_t window_size,
                                   uint32_t chunk_words, const char* cache_dir,
                                   char** info_json_out);

MIA_API mia_status mia_index_open(const char* path, mia_index** out);
MIA_API void mia_index_close(mia_index* index);
MIA_API mia_status mia_index_info(const mia_index* index, char** json_out);

/* ------------------------------------------------------------------ */
/* Signature construction and retrieval                                */
/* ------------------------------------------------------------------ */

/*
 * Builds the step-0 signature for a query. mode is "coverage" or
 * "first-k"; weights_csv is "0.3,0.4,0.3" or NULL for the defaults.
 * Returns {"selected": [...], "values": {...}, "rendered_text": "..."}.
 */
MIA_API mia_status mia_signature_init(mia_engine* engine, const mia_index* index,
                                      const char* query, uint32_t k,
                                      const char* mode, const char* weights_csv,
                                      char** json_out);

/*
 * Dual-signal retrieval. signature_text NULL or "" falls back to
 * query-only ranking. Returns {"entries": [{"chunk_id", "score"}, ...]}.
 */
MIA_API mia_status mia_retrieve(mia_engine* engine, const mia_index* index,
                                const char* query, const char* signature_text,
                                uint32_t k, double alpha, char** json_out);

/* ------------------------------------------------------------------ */
/* Agent loop                                                          */
/* ------------------------------------------------------------------ */

/*
 * Runs the iterative agent. params_json may be NULL or a JSON object with
 * any of: "options" (array of strings), "steps", "alpha", "k",
 * "init_candidates", "signature_budget", "variant", "rewrite" (bool),
 * "task" ("detective"|"open_qa"|"claim"), "init_mode".
 * Returns {"answer", "parsed", "trace"}.
 */
MIA_API mia_status mia_agent_run(mia_engine* engine, const mia_index* index,
                                 const char* question, const char* params_json,
                                 char** result_json_out);

/* ------------------------------------------------------------------ */
/* Evaluation harness                                                  */
/* ------------------------------------------------------------------ */

/*
 * Runs the benchmark described by the YAML config (engine + eval sections)
 * and writes a JSONL report. summary_json_out (optional) receives the
 * aggregate record.
 */
MIA_API mia_status mia_eval_run(const char* config_path, const char* report_path,
                                char** summary_json_out);

/* Renders the table-shaped summary of a report produced by mia_eval_run. */
MIA_API mia_status mia_eval_table(const char* report_path, const char* task_kind,
                                  char** text_out);

#ifdef __cplusplus
}
#endif

#endif /* MIA_H */
