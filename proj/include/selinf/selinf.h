#ifndef SELINF_H
#define SELINF_H

/* C interface to the selinf library. Handles are opaque; every call returns a
 * status code and leaves a message retrievable via selinf_last_error() on failure.
 * Strings returned through char** are owned by the caller (selinf_string_free). */

#include <stddef.h>
#include <stdint.h>

#if defined(SELINF_BUILDING_LIBRARY)
#define SELINF_API __attribute__((visibility("default")))
#else
#define SELINF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum selinf_status {
    SELINF_OK = 0,
    SELINF_E_VALIDATION = 2, /* bad input, bad arguments, unreadable file */
    SELINF_E_NUMERICAL = 3,  /* solver, root-finding or sampling failure */
    SELINF_E_INTERNAL = 4
} selinf_status;

typedef struct selinf_dataset selinf_dataset;
typedef struct selinf_fit selinf_fit;

SELINF_API const char* selinf_version(void);
/* Message of the last failed call on this thread ("" if none). */
SELINF_API const char* selinf_last_error(void);
/* Symbolic name of the last error kind, e.g. "NonConvergence". */
SELINF_API const char* selinf_last_error_kind(void);
SELINF_API void selinf_string_free(char* s);

/* X is column-major n x p. names may be NULL. */
SELINF_API selinf_status selinf_dataset_from_arrays(const double* y, const double* X, int64_t n, int64_t p,
                                                    const char* const* names, int normalize, selinf_dataset** out);
SELINF_API selinf_status selinf_dataset_from_csv(const char* path, const char* response, int normalize,
                                                 selinf_dataset** out);
SELINF_API void selinf_dataset_free(selinf_dataset* ds);
SELINF_API int64_t selinf_dataset_n(const selinf_dataset* ds);
SELINF_API int64_t selinf_dataset_p(const selinf_dataset* ds);

/* lambda = kappa * E(||X^T e||_inf / ||e||). Result as a number and as JSON (either may be NULL). */
SELINF_API selinf_status selinf_choose_lambda(const selinf_dataset* ds, double kappa, int draws, uint64_t seed,
                                              int threads, double* lambda_out, char** json_out);

typedef struct selinf_fit_options {
    double lambda; /* > 0 overrides the kappa rule */
    double kappa;
    int mc_draws;
    uint64_t seed;
    int threads;
    double tol;
    int max_sweeps;
} selinf_fit_options;

SELINF_API void selinf_fit_options_default(selinf_fit_options* opts);
SELINF_API selinf_status selinf_fit_create(const selinf_dataset* ds, const selinf_fit_options* opts, selinf_fit** out);
SELINF_API void selinf_fit_free(selinf_fit* fit);
SELINF_API double selinf_fit_lambda(const selinf_fit* fit);
SELINF_API size_t selinf_fit_active_size(const selinf_fit* fit);
/* Copies up to cap entries of E (0-based) and z_E. */
SELINF_API size_t selinf_fit_active(const selinf_fit* fit, int64_t* active, int* signs, size_t cap);
SELINF_API selinf_status selinf_fit_to_json(const selinf_fit* fit, const selinf_dataset* ds, char** json_out);

typedef enum selinf_sigma_kind {
    SELINF_SIGMA_PLR = 0,
    SELINF_SIGMA_PL = 1,
    SELINF_SIGMA_OLS = 2,
    SELINF_SIGMA_FIXED = 3
} selinf_sigma_kind;

typedef struct selinf_infer_options {
    double level;
    selinf_sigma_kind sigma;
    double sigma2_value; /* SELINF_SIGMA_FIXED only */
    int exact_ci;
} selinf_infer_options;

SELINF_API void selinf_infer_options_default(selinf_infer_options* opts);
/* Report JSON plus an optional human-readable table (table_out may be NULL). */
SELINF_API selinf_status selinf_infer(const selinf_dataset* ds, const selinf_fit* fit,
                                      const selinf_infer_options* opts, char** json_out, char** table_out);
SELINF_API selinf_status selinf_estimate_sigma(const selinf_dataset* ds, const selinf_fit* fit, char** json_out);
SELINF_API selinf_status selinf_event_json(const selinf_dataset* ds, const selinf_fit* fit, char** json_out);
/* group: comma-separated column names. */
SELINF_API selinf_status selinf_diagnose(const selinf_dataset* ds, const selinf_fit* fit, const char* group,
                                         int draws, uint64_t seed, char** json_out);

typedef struct selinf_sim_options {
    const char* preset;      /* named scenario or NULL */
    const char* config_text; /* key = value lines applied on top of preset, or NULL */
    int override_seed;
    uint64_t seed;
    int threads; /* > 0 overrides */
    int replicates; /* > 0 overrides */
    const char* records_path; /* JSON-lines output, or NULL */
} selinf_sim_options;

SELINF_API void selinf_sim_options_default(selinf_sim_options* opts);
SELINF_API selinf_status selinf_simulate(const selinf_sim_options* opts, char** summary_json, char** summary_csv);
/* Newline-separated list of scenario names. */
SELINF_API selinf_status selinf_scenario_names(char** out);

#ifdef __cplusplus
}
#endif

#endif
