/* C interface to the meanfield library.
 *
 * Every fallible call returns an mf_status; on failure mf_last_error()
 * describes the problem (thread-local, valid until the next call on the same
 * thread). Handles are opaque and owned by the caller, who releases them with
 * the matching *_destroy function. Destroy functions accept NULL.
 */
#ifndef MEANFIELD_H
#define MEANFIELD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(MF_BUILDING_LIBRARY)
#define MF_API __attribute__((visibility("default")))
#else
#define MF_API
#endif

typedef enum mf_status {
  MF_OK = 0,
  MF_ERR_INVALID_ARGUMENT = 1,
  MF_ERR_DOMAIN = 2,
  MF_ERR_CONFIG = 3,
  MF_ERR_NUMERICAL = 4,
  MF_ERR_IO = 5,
  MF_ERR_INTERNAL = 6
} mf_status;

typedef enum mf_expressivity {
  MF_EXPRESSIVITY_STRICT = 0,
  MF_EXPRESSIVITY_BOUNDARY = 1,
  MF_EXPRESSIVITY_VIOLATES = 2
} mf_expressivity;

typedef struct mf_model mf_model;
typedef struct mf_ensemble mf_ensemble;
typedef struct mf_network mf_network;
typedef struct mf_dataset mf_dataset;
typedef struct mf_config mf_config;
typedef struct mf_manifest mf_manifest;

MF_API const char* mf_version(void);
MF_API const char* mf_last_error(void);
MF_API const char* mf_status_string(mf_status status);

/* Legendre polynomials on S^{d-1}, degrees 0..8. */
MF_API mf_status mf_legendre_eval(int k, int d, double t, double* out);
MF_API mf_status mf_legendre_normalized(int k, int d, double t, double* out);
MF_API mf_status mf_harmonic_dim(int k, int d, uint64_t* out);
MF_API mf_status mf_relu_coefficient(int k, int d, double* out);

/* Model: sigma_hat and h_hat hold degrees 0..4. q* = e_1. */
MF_API mf_status mf_model_create(int d, const double sigma_hat[5], const double h_hat[5],
                                 mf_model** out);
MF_API mf_status mf_model_from_gammas(int d, double sigma2, double sigma4, double gamma2,
                                      double gamma4, mf_model** out);
MF_API void mf_model_destroy(mf_model* model);
MF_API mf_status mf_model_gammas(const mf_model* model, double* gamma2, double* gamma4);
/* Writes up to n_clauses per-clause results (1 pass, 0 fail) and the clause
 * count into *count. */
MF_API mf_status mf_model_validate(const mf_model* model, double c1, double c2, int* all_passed,
                                   int* clause_passed, size_t n_clauses, size_t* count);
MF_API mf_status mf_expressivity_check(double gamma2, double gamma4, double tol,
                                       mf_expressivity* out);
MF_API mf_status mf_target_moments(const mf_model* model, double* beta2, double* beta4);
/* w and p must hold 2 entries; *n_atoms receives 1 or 2. */
MF_API mf_status mf_fitting_measure(double beta2, double beta4, double* w, double* p,
                                    size_t* n_atoms);

/* One-dimensional population dynamics. */
MF_API mf_status mf_ensemble_create(int d, int particles, int sampled, uint64_t seed,
                                    mf_ensemble** out);
MF_API void mf_ensemble_destroy(mf_ensemble* e);
MF_API mf_status mf_ensemble_size(const mf_ensemble* e, size_t* out);
MF_API mf_status mf_ensemble_get(const mf_ensemble* e, double* w, double* mass, size_t n);
MF_API mf_status mf_ensemble_D(const mf_ensemble* e, const mf_model* model, double* D2,
                               double* D4);
MF_API mf_status mf_ensemble_loss(const mf_ensemble* e, const mf_model* model, double* out);
/* *accepted is 0 when the step moved a particle too far; the ensemble is
 * unchanged in that case. */
MF_API mf_status mf_ensemble_step(mf_ensemble* e, const mf_model* model, double dt, int* accepted);

/* Times are NaN when the event never happened. T2_case: 0 none, 1, 2. */
typedef struct mf_flow_summary {
  double T1;
  double T2;
  double T_star;
  int T2_case;
  int converged;
  int phase1_empty;
  double final_loss;
  uint64_t accepted_steps;
} mf_flow_summary;

/* Integrates in place until the loss threshold for eps or t_max. */
MF_API mf_status mf_run_flow(mf_ensemble* e, const mf_model* model, double eps, double t_max,
                             mf_flow_summary* out);

/* Finite-width networks. Weight buffers are row-major m x d. */
MF_API mf_status mf_network_create(int d, int m, uint64_t seed, mf_network** out);
MF_API mf_status mf_network_from_weights(int d, int m, const double* U, mf_network** out);
MF_API void mf_network_destroy(mf_network* net);
MF_API mf_status mf_network_weights(const mf_network* net, double* U, size_t len);
MF_API mf_status mf_dataset_create(const mf_model* model, int n, uint64_t seed, mf_dataset** out);
MF_API void mf_dataset_destroy(mf_dataset* data);
MF_API mf_status mf_network_forward(const mf_network* net, const mf_model* model, const double* x,
                                    double* out);
MF_API mf_status mf_network_exact_loss(const mf_network* net, const mf_model* model, double* out);
MF_API mf_status mf_network_empirical_loss(const mf_network* net, const mf_model* model,
                                           const mf_dataset* data, double* out);
MF_API mf_status mf_network_gd_step(mf_network* net, const mf_model* model, const mf_dataset* data,
                                    double eta);
/* data == NULL selects the population gradient. */
MF_API mf_status mf_network_flow_step(mf_network* net, const mf_model* model,
                                      const mf_dataset* data, double dt, int* accepted);

/* Kernel ridge fit on the dataset; *loss receives E (f - y)^2. */
MF_API mf_status mf_kernel_fit_loss(const mf_model* model, const mf_dataset* data,
                                    const double c[5], double ridge, double* loss);

/* Experiment configuration and runs. */
MF_API mf_status mf_config_load(const char* path, mf_config** out);
MF_API mf_status mf_config_parse(const char* text, mf_config** out);
MF_API void mf_config_destroy(mf_config* cfg);
MF_API mf_status mf_config_set(mf_config* cfg, const char* key, const char* value);
/* buf receives 16 hex digits and a terminating NUL (17 bytes). */
MF_API mf_status mf_config_hash(const mf_config* cfg, char* buf, size_t len);
MF_API mf_status mf_run(const mf_config* cfg, mf_manifest** out);
MF_API void mf_manifest_destroy(mf_manifest* m);
MF_API const char* mf_manifest_json(const mf_manifest* m);
MF_API size_t mf_manifest_file_count(const mf_manifest* m);
MF_API const char* mf_manifest_file(const mf_manifest* m, size_t i);

#ifdef __cplusplus
}
#endif

#endif /* MEANFIELD_H */
