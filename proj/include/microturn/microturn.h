/* microturn — multi-turn RL microworld trainer, C API.
 *
 * The core is a C++ library; this header is the stable boundary. Objects are
 * opaque handles, every call returns a status code, and string outputs are
 * heap-allocated by the library (release them with mt_string_free).
 * mt_last_error() describes the most recent failure on the calling thread.
 */
#ifndef MICROTURN_H_
#define MICROTURN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MT_API __declspec(dllexport)
#else
#define MT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mt_status {
    MT_OK = 0,
    MT_ERR_INVALID_ARGUMENT = 1, /* bad spec/config/command arguments */
    MT_ERR_BAD_STATE = 2,        /* usage error, e.g. stepping a finished episode */
    MT_ERR_IO = 3,               /* file read/write failure */
    MT_ERR_FORMAT = 4,           /* unparseable config/checkpoint/data file */
    MT_ERR_RUN_FAILED = 5,       /* plan finished with failed runs */
    MT_ERR_INTERNAL = 6
} mt_status;

MT_API const char* mt_version(void);

/* Thread-local message for the last failing call. */
MT_API const char* mt_last_error(void);

MT_API void mt_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Environment: step/reset over one generated task instance.           */
/* ------------------------------------------------------------------ */

typedef struct mt_env mt_env;

/* spec: either "w2-o3-q4" or the full compact form
 * "w2-o3-q4;seed=7;scheme=sparse;steps=8;family=mixed". */
MT_API mt_status mt_env_create(const char* spec, mt_env** out);
MT_API void mt_env_destroy(mt_env* env);

/* Initial observation: quest objective plus the room description. */
MT_API mt_status mt_env_reset(mt_env* env, char** observation);

typedef struct mt_step_info {
    double reward;
    int done;
    int milestone_hit;
    int invalid_command;
} mt_step_info;

MT_API mt_status mt_env_step(mt_env* env, const char* command, char** observation,
                             mt_step_info* info);

/* Gold solution, tab-separated. */
MT_API mt_status mt_env_gold(mt_env* env, char** commands);

/* Newline-separated admissible commands (test oracle; not agent-visible). */
MT_API mt_status mt_env_admissible(mt_env* env, char** commands);

/* ------------------------------------------------------------------ */
/* Harness entry points. Configuration travels as JSON text with key   */
/* groups env/train/eval/plan; unknown keys are rejected.              */
/* ------------------------------------------------------------------ */

/* Merge (optional) config file, (optional) override JSON and the
 * MICROTURN_SEED environment variable into a resolved config. */
MT_API mt_status mt_config_resolve(const char* config_path_or_null,
                                   const char* overrides_json_or_null,
                                   char** resolved_json);

/* kind: "rl" | "sft" | "eval". Writes the dataset file into out_dir and
 * returns its path. */
MT_API mt_status mt_gen(const char* config_json, const char* kind, int count,
                        uint64_t seed_base, const char* out_dir, char** out_path);

/* One training run; writes config.json, metrics.jsonl, timing.log,
 * summary.csv, vocab.txt and checkpoint.ckpt into out_dir. */
MT_API mt_status mt_train(const char* config_json, const char* out_dir);

/* Evaluates a checkpoint on the config's eval block; returns JSON. */
MT_API mt_status mt_eval(const char* config_json, const char* checkpoint_path,
                         char** result_json);

/* Executes the plan section; one directory per run plus plan_summary.csv.
 * Returns MT_ERR_RUN_FAILED if any run failed (the plan still completes). */
MT_API mt_status mt_run_plan(const char* config_json, const char* out_dir);

/* Rebuilds summary CSVs from metrics files under a run or plan directory. */
MT_API mt_status mt_report(const char* dir, int with_charts);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MICROTURN_H_ */
