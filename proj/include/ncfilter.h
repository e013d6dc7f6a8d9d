#ifndef NCFILTER_H
#define NCFILTER_H

/* C interface to the ncfilter library.
 *
 * All objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every fallible call returns an ncf_status; the
 * message of the most recent failure on the calling thread is available from
 * ncf_last_error(). */

#include <stddef.h>
#include <stdint.h>

#if defined(NCF_BUILDING_LIBRARY)
#define NCF_API __attribute__((visibility("default")))
#else
#define NCF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  NCF_OK = 0,
  NCF_ERR_INVALID_ARGUMENT = 1,
  NCF_ERR_CONFIG = 2,
  NCF_ERR_NUMERIC = 3,
  NCF_ERR_IO = 4,
  NCF_ERR_VERIFY_FAILED = 5,
  NCF_ERR_INTERNAL = 6
} ncf_status;

typedef struct ncf_config ncf_config;
typedef struct ncf_table ncf_table;
typedef struct ncf_report ncf_report;

NCF_API const char* ncf_version(void);
/* Message of the last failed call on this thread ("" if none). */
NCF_API const char* ncf_last_error(void);

/* ---- configuration ---- */
NCF_API ncf_status ncf_config_parse(const char* json_text, ncf_config** out);
NCF_API ncf_status ncf_config_preset(const char* name, ncf_config** out);
/* Preset name or path to a config file. */
NCF_API ncf_status ncf_config_load(const char* preset_or_path, ncf_config** out);
/* Values <= 0 leave the corresponding field unchanged. */
NCF_API ncf_status ncf_config_set_grid(ncf_config* cfg, double dt, double T);
NCF_API ncf_status ncf_config_set_ensemble_size(ncf_config* cfg, int64_t M);
NCF_API ncf_status ncf_config_set_seed(ncf_config* cfg, uint64_t master_seed);
/* NULL leaves the corresponding field unchanged. format: "csv" or "json". */
NCF_API ncf_status ncf_config_set_output(ncf_config* cfg, const char* path,
                                         const char* format);
NCF_API const char* ncf_config_name(const ncf_config* cfg);
/* Canonical JSON; release with ncf_string_free. */
NCF_API ncf_status ncf_config_to_json(const ncf_config* cfg, char** out);
NCF_API ncf_status ncf_config_hash(const ncf_config* cfg, uint64_t* out);
NCF_API void ncf_config_free(ncf_config* cfg);
NCF_API void ncf_string_free(char* s);

/* ---- runs ---- */
/* Deterministic scenario run. */
NCF_API ncf_status ncf_run(const ncf_config* cfg, ncf_table** out);
/* Ensemble of trajectories; threads <= 0 uses NCFILTER_THREADS / all cores. */
NCF_API ncf_status ncf_trajectories(const ncf_config* cfg, int threads,
                                    ncf_table** out);

NCF_API size_t ncf_table_rows(const ncf_table* t);
NCF_API size_t ncf_table_columns(const ncf_table* t);
NCF_API const char* ncf_table_column_name(const ncf_table* t, size_t col);
/* Pointer to ncf_table_rows() values of the column, or NULL. */
NCF_API const double* ncf_table_column(const ncf_table* t, size_t col);
NCF_API size_t ncf_table_warning_count(const ncf_table* t);
NCF_API const char* ncf_table_warning(const ncf_table* t, size_t i);
/* Writes the data file and its .meta.json sidecar. *written_path (optional)
 * receives the data file path; release with ncf_string_free. */
NCF_API ncf_status ncf_write_outputs(const ncf_config* cfg, const ncf_table* t,
                                     char** written_path);
NCF_API void ncf_table_free(ncf_table* t);

/* ---- oracle comparison ---- */
/* Returns NCF_OK when the comparison ran; check ncf_report_passed. */
NCF_API ncf_status ncf_verify(const ncf_config* cfg, int seeds,
                              ncf_report** out);
NCF_API int ncf_report_passed(const ncf_report* r);
NCF_API const char* ncf_report_text(const ncf_report* r);
NCF_API void ncf_report_free(ncf_report* r);

#ifdef __cplusplus
}
#endif

#endif /* NCFILTER_H */
