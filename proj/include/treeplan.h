/*
 * treeplan C API: tree-search data collection and preference-based policy
 * training over deterministic text household tasks.
 *
 * All functions return a treeplan_status; 0 is success. Handles are opaque
 * and single-threaded. Strings returned through char** out-parameters are
 * owned by the library and must be released with treeplan_string_free().
 * Error details for the most recent failing call on a handle come from
 * treeplan_run_last_error / treeplan_env_last_error; handle-creation
 * failures from treeplan_last_error().
 */
#ifndef TREEPLAN_H
#define TREEPLAN_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined _WIN32 || defined __CYGWIN__
#define TREEPLAN_API __declspec(dllexport)
#else
#define TREEPLAN_API __attribute__((visibility("default")))
#endif

typedef enum treeplan_status {
    TREEPLAN_OK = 0,
    TREEPLAN_ERR_VALIDATION = 2, /* bad config, bad arguments */
    TREEPLAN_ERR_DATA = 3,       /* malformed or inconsistent data files */
    TREEPLAN_ERR_RUNTIME = 4,    /* engine failure */
    TREEPLAN_ERR_PROTOCOL = 5    /* wire protocol or session misuse */
} treeplan_status;

typedef struct treeplan_run treeplan_run;
typedef struct treeplan_env treeplan_env;

TREEPLAN_API const char* treeplan_version(void);

/* Error message from the most recent failed handle-creation call
 * (thread-local; empty string when none). */
TREEPLAN_API const char* treeplan_last_error(void);

TREEPLAN_API void treeplan_string_free(char* s);

/* ---- orchestration: one handle per run configuration ---- */

/* config_path may be NULL for defaults. override_json (optional) is a JSON
 * merge patch applied after the file and the TREEPLAN_OVERRIDE env var. */
TREEPLAN_API treeplan_status treeplan_run_open(const char* config_path,
                                               const char* override_json, treeplan_run** out);
TREEPLAN_API void treeplan_run_close(treeplan_run* run);
TREEPLAN_API const char* treeplan_run_last_error(const treeplan_run* run);

/* Every command returns a JSON summary through out_json. */
TREEPLAN_API treeplan_status treeplan_run_dump_config(treeplan_run* run, char** out_json);
/* task_ref: index into the train suite or "family/layout/seed". */
TREEPLAN_API treeplan_status treeplan_run_search(treeplan_run* run, const char* task_ref,
                                                 char** out_json);
TREEPLAN_API treeplan_status treeplan_run_collect(treeplan_run* run, char** out_json);
/* expert_ref: path to an expert JSONL file or "oracle:N". */
TREEPLAN_API treeplan_status treeplan_run_warmup(treeplan_run* run, const char* expert_ref,
                                                 char** out_json);
/* phase: "sft" or "dpo". */
TREEPLAN_API treeplan_status treeplan_run_train(treeplan_run* run, const char* phase,
                                                char** out_json);
TREEPLAN_API treeplan_status treeplan_run_loop(treeplan_run* run, int iterations,
                                               char** out_json);
/* checkpoint_path may be NULL for the run's latest checkpoint. */
TREEPLAN_API treeplan_status treeplan_run_eval(treeplan_run* run, const char* checkpoint_path,
                                               char** out_json);

/* ---- direct environment sessions ---- */

/* layout_registry_path may be NULL for the builtin registry. */
TREEPLAN_API treeplan_status treeplan_env_open(const char* layout_registry_path, int episode_cap,
                                               treeplan_env** out);
TREEPLAN_API void treeplan_env_close(treeplan_env* env);
TREEPLAN_API const char* treeplan_env_last_error(const treeplan_env* env);

/* task_json: {"family":...,"instruction":...,"layout":...,"seed":...}.
 * Result JSON matches the wire protocol's result message. */
TREEPLAN_API treeplan_status treeplan_env_reset(treeplan_env* env, const char* task_json,
                                                char** out_json);
TREEPLAN_API treeplan_status treeplan_env_step(treeplan_env* env, const char* action_text,
                                               char** out_json);

/* Serve GridHouse sessions over the env wire protocol on 127.0.0.1:port
 * (port 0 picks one; the chosen port is printed to stdout). Blocks forever;
 * intended for the CLI's serve-env command. */
TREEPLAN_API treeplan_status treeplan_env_serve(const char* layout_registry_path,
                                                int episode_cap, int port);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* TREEPLAN_H */
