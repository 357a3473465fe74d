/* C interface to the tensormc library: sparse MTTKRP kernels with
 * external-memory access instrumentation, an analytical traffic model, a
 * trace-driven memory-controller simulator, and a design-space explorer.
 *
 * All functions return tmc_status; on failure tmc_last_error() describes the
 * problem for the calling thread. Objects are opaque handles released with
 * their matching *_free function; returned strings are released with
 * tmc_string_free.
 */
#ifndef TENSORMC_H
#define TENSORMC_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define TMC_API __declspec(dllexport)
#else
#define TMC_API __attribute__((visibility("default")))
#endif

typedef enum tmc_status {
  TMC_OK = 0,
  TMC_ERR_USAGE = 1,       /* bad arguments (null handle, unknown name) */
  TMC_ERR_PARSE = 2,       /* malformed input text */
  TMC_ERR_VALIDATION = 3,  /* well-formed input violating a contract */
  TMC_ERR_RECONCILE = 4,   /* measured counters disagree with the model */
  TMC_ERR_INFEASIBLE = 5,  /* no configuration fits the resource budget */
  TMC_ERR_IO = 6,          /* file could not be read or written */
  TMC_ERR_INTERNAL = 7
} tmc_status;

typedef struct tmc_tensor_s tmc_tensor;
typedef struct tmc_trace_s tmc_trace;
typedef struct tmc_result_s tmc_result;

TMC_API const char* tmc_version(void);
TMC_API const char* tmc_status_name(tmc_status status);
/* Message from the calling thread's most recent failing call; empty string
 * when none. The pointer is valid until the thread's next tensormc call. */
TMC_API const char* tmc_last_error(void);
TMC_API void tmc_string_free(char* text);

/* ---- tensors ---------------------------------------------------------- */

/* Whitespace-separated "coord ... coord value" lines, 1-based coordinates,
 * '#' comments. merge_duplicates 0 rejects duplicate coordinates, nonzero
 * sums them. */
TMC_API tmc_status tmc_tensor_parse_file(const char* path, int merge_duplicates,
                                         tmc_tensor** out);
TMC_API tmc_status tmc_tensor_parse_text(const char* text, int merge_duplicates,
                                         tmc_tensor** out);
TMC_API void tmc_tensor_free(tmc_tensor* tensor);

TMC_API int32_t tmc_tensor_num_modes(const tmc_tensor* tensor);
TMC_API int64_t tmc_tensor_nnz(const tmc_tensor* tensor);
TMC_API int64_t tmc_tensor_mode_length(const tmc_tensor* tensor, int32_t mode);

/* Flat JSON object: modes, dims, nnz, density, tensor_bytes, factor_bytes. */
TMC_API tmc_status tmc_tensor_stats_json(const tmc_tensor* tensor, int32_t rank, char** json);

/* ---- MTTKRP kernels --------------------------------------------------- */

/* approach is one of "coo", "a1", "a2", "remap". Factor matrices are seeded
 * random. config_json may be NULL or an experiment document; its controller
 * section supplies element widths and the remap pointer-table size. */
TMC_API tmc_status tmc_mttkrp(const tmc_tensor* tensor, const char* approach, int32_t mode,
                              int32_t rank, uint64_t seed, const char* config_json,
                              tmc_result** out);
TMC_API void tmc_result_free(tmc_result* result);

TMC_API tmc_status tmc_result_matrix_text(const tmc_result* result, char** text);
/* Counters, analytical prediction, and the measured-vs-predicted
 * reconciliation (instrumented variants only). */
TMC_API tmc_status tmc_result_report_json(const tmc_result* result, char** json);
/* 1 when the run reconciled exactly against the model (coo: always 1). */
TMC_API int32_t tmc_result_reconciled(const tmc_result* result);
TMC_API tmc_status tmc_result_trace(const tmc_result* result, tmc_trace** out);

/* Runs every approach at one seed and reports pairwise deviations plus the
 * dense-oracle deviation when the dense shape is tractable. */
TMC_API tmc_status tmc_mttkrp_crosscheck_json(const tmc_tensor* tensor, int32_t mode,
                                              int32_t rank, uint64_t seed,
                                              const char* config_json, char** json);

/* Alternating least squares decomposition report: lambda, fit history,
 * iteration count, warning flags. */
TMC_API tmc_status tmc_cp_als_json(const tmc_tensor* tensor, int32_t rank, int32_t max_iters,
                                   double fit_tolerance, uint64_t seed, char** json);

/* ---- access traces ---------------------------------------------------- */

TMC_API tmc_status tmc_trace_read_text(const char* path, tmc_trace** out);
TMC_API tmc_status tmc_trace_read_binary(const char* path, tmc_trace** out);
TMC_API tmc_status tmc_trace_write_text(const tmc_trace* trace, const char* path);
TMC_API tmc_status tmc_trace_write_binary(const tmc_trace* trace, const char* path);
TMC_API int64_t tmc_trace_num_events(const tmc_trace* trace);
TMC_API void tmc_trace_free(tmc_trace* trace);

/* ---- simulator and explorer ------------------------------------------ */

/* config_json may be NULL (defaults) or an experiment document; controller
 * and dram sections are honored. Returns the simulation report with the
 * effective configuration echoed. */
TMC_API tmc_status tmc_simulate_json(const tmc_trace* trace, const char* config_json,
                                     char** report_json);

/* Exhaustive (modular = 0) or module-by-module (modular != 0) sweep of the
 * config's grid section over the dataset traces. threads caps concurrent
 * evaluations (0 = sequential). ranking_csv may be NULL. */
TMC_API tmc_status tmc_explore_json(const tmc_trace* const* traces, int32_t num_traces,
                                    const char* config_json, int32_t threads, int32_t modular,
                                    char** report_json, char** ranking_csv);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* TENSORMC_H */
