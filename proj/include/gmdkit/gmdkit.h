#ifndef GMDKIT_GMDKIT_H
#define GMDKIT_GMDKIT_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(GMDKIT_BUILDING_LIBRARY)
#define GMDK_API __attribute__((visibility("default")))
#else
#define GMDK_API
#endif

typedef enum gmdk_status {
    GMDK_OK = 0,
    GMDK_INVALID_ARGUMENT = 1,
    GMDK_DIMENSION_MISMATCH = 2,
    GMDK_NOT_POSITIVE_DEFINITE = 3,
    GMDK_NUMERICAL = 4,
    GMDK_CONVERGENCE = 5,
    GMDK_IO = 6,
    GMDK_INTERNAL = 7
} gmdk_status;

typedef struct gmdk_dataset gmdk_dataset;
typedef struct gmdk_result gmdk_result;

GMDK_API const char* gmdk_version(void);

/* Message of the last failure on the calling thread ("" if none). */
GMDK_API const char* gmdk_last_error(void);
GMDK_API const char* gmdk_status_name(gmdk_status status);

/* Worker cap for all later calls; 0 restores the default (GMDKIT_THREADS,
   else all logical cores). */
GMDK_API gmdk_status gmdk_set_threads(int threads);

/* CSV paths; h, q and y may be NULL (identity kernels, no response). A
   sidecar "<path>.json" descriptor is enforced when present. */
GMDK_API gmdk_status gmdk_dataset_load(const char* x_path, const char* h_path, const char* q_path,
                                       const char* y_path, gmdk_dataset** out);
/* JSON manifest {"X": path, "H": path, "Q": path, "y": path}. */
GMDK_API gmdk_status gmdk_dataset_load_manifest(const char* manifest_path, gmdk_dataset** out);
/* Row-major arrays; h (n*n), q (p*p) and y (n) may be NULL. Data is copied. */
GMDK_API gmdk_status gmdk_dataset_from_arrays(int n, int p, const double* x, const double* h, const double* q,
                                              const double* y, gmdk_dataset** out);
GMDK_API gmdk_status gmdk_dataset_shape(const gmdk_dataset* data, int* n, int* p);
GMDK_API void gmdk_dataset_free(gmdk_dataset* data);

/* Every operation takes an optional JSON object of options (NULL or "{}" for
   defaults; unknown keys are rejected) and returns a result whose JSON report
   echoes the fully resolved options under "config". */
GMDK_API gmdk_status gmdk_decompose(const gmdk_dataset* data, const char* options_json, gmdk_result** out);
/* method: "gmdr" or "kpr". */
GMDK_API gmdk_status gmdk_fit(const gmdk_dataset* data, const char* method, const char* options_json,
                              gmdk_result** out);
GMDK_API gmdk_status gmdk_infer(const gmdk_dataset* data, const char* options_json, gmdk_result** out);
/* test: "krv-q" (X^T X vs Q), "krv-h" (X X^T vs H) or "mirkat" (y vs H). */
GMDK_API gmdk_status gmdk_structtest(const gmdk_dataset* data, const char* test, const char* options_json,
                                     gmdk_result** out);
GMDK_API gmdk_status gmdk_robust_tau(const gmdk_dataset* data, const char* options_json, gmdk_result** out);
GMDK_API gmdk_status gmdk_simulate(const char* options_json, gmdk_result** out);

/* Report as JSON text; owned by the result. */
GMDK_API const char* gmdk_result_json(const gmdk_result* result, int indent);
/* Per-replicate CSV for simulation results, NULL otherwise. */
GMDK_API const char* gmdk_result_csv(const gmdk_result* result);
/* Numeric vector from the report: "sigma", "beta", "p_value", "q_value",
   "beta_corrected", ... NULL when absent. */
GMDK_API const double* gmdk_result_vector(const gmdk_result* result, const char* name, int* length);
GMDK_API void gmdk_result_free(gmdk_result* result);

#ifdef __cplusplus
}
#endif

#endif
