#ifndef NMS_H
#define NMS_H

/* C API for the metriplectic learning library.  All functions return a
 * status code; on failure nms_last_error() describes the problem (the
 * message is thread-local and valid until the next failing call).  Handles
 * are opaque and freed with the matching *_free function. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    NMS_OK = 0,
    NMS_ERR_VALIDATION = 1, /* bad arguments, config, or model structure */
    NMS_ERR_SOLVER = 2,     /* integration failure: stiffness, blow-up, domain exit */
    NMS_ERR_IO = 3,         /* file missing, unreadable, or malformed */
    NMS_ERR_INTERNAL = 4
} nms_status;

const char* nms_last_error(void);
void nms_string_free(char* s);

typedef struct nms_dataset nms_dataset;
typedef struct nms_model nms_model;
typedef struct nms_trajectory nms_trajectory;

/* ------------------------------------------------------------------ data */

typedef struct nms_split_options {
    int by_trajectory; /* 0: temporal split of one long trajectory */
    double t_train, t_val, t_test;
    double train_frac, val_frac;
} nms_split_options;
void nms_split_options_init(nms_split_options* opt);

/* ics: n_ics rows of length dim, row-major.  NULL ics uses the system's
 * default initial condition, or n_ics sampled ones where the system
 * defines a sampling box (tdp). */
nms_status nms_dataset_generate(const char* system, int rod_points,
                                const double* ics, int n_ics, int dim,
                                double dt, long steps,
                                const nms_split_options* split, uint64_t seed,
                                nms_dataset** out);
nms_status nms_dataset_load(const char* path, nms_dataset** out);
nms_status nms_dataset_save(const nms_dataset* d, const char* path);
nms_status nms_dataset_set_observed(nms_dataset* d, const uint8_t* mask, int dim);
nms_status nms_dataset_fill_unobserved(nms_dataset* d);
int nms_dataset_dim(const nms_dataset* d);
long nms_dataset_rows(const nms_dataset* d);
void nms_dataset_free(nms_dataset* d);

/* ---------------------------------------------------------------- models */

typedef struct nms_model_options {
    int n, r;
    int r_inner;     /* <= 0: Cholesky parameterization of D */
    int hamiltonian; /* 1: drop the dissipative part (M = 0) */
    int hidden_width, hidden_depth;
} nms_model_options;
void nms_model_options_init(nms_model_options* opt);

nms_status nms_model_create(const nms_model_options* opt, uint64_t seed,
                            nms_model** out);
nms_status nms_model_create_node(int dim, int hidden_width, int hidden_depth,
                                 uint64_t seed, nms_model** out);
nms_status nms_model_load(const char* path, nms_model** out);
nms_status nms_model_save(const nms_model* m, const char* path);
int nms_model_dim(const nms_model* m);
long nms_model_param_total(const nms_model* m);
const char* nms_model_kind(const nms_model* m); /* "nms" or "node" */
nms_status nms_model_rhs(const nms_model* m, const double* x, int dim, double* out);
/* Learned scalar potentials; NMS_ERR_VALIDATION for an unstructured model. */
nms_status nms_model_energy_entropy(const nms_model* m, const double* x, int dim,
                                    double* energy, double* entropy);
void nms_model_free(nms_model* m);

/* -------------------------------------------------------------- training */

typedef struct nms_solver_options {
    int use_rk4; /* 0: adaptive dopri5 */
    double dt, rtol, atol;
    long max_steps;
} nms_solver_options;
void nms_solver_options_init(nms_solver_options* opt);

typedef struct nms_train_options {
    int origin_mode; /* 0: windowed snapshot batches */
    long n_steps;
    int batch, rollout, max_offset;
    double lr;
    uint64_t seed;
    long val_cadence;
    int use_mae; /* 0: mse */
    int verbose;
    nms_solver_options solver;
} nms_train_options;
void nms_train_options_init(nms_train_options* opt);

/* Optimizes in place and leaves the model holding the best-validation
 * parameters.  loss_csv_path may be NULL. */
nms_status nms_train_run(nms_model* m, const nms_dataset* d,
                         const nms_train_options* opt, const char* loss_csv_path,
                         double* best_val);

/* ------------------------------------------------------------- rollouts */

nms_status nms_model_rollout(const nms_model* m, const double* ic, int dim,
                             const double* t_eval, long n_t,
                             const nms_solver_options* opt, nms_trajectory** out);
long nms_trajectory_rows(const nms_trajectory* t);
int nms_trajectory_dim(const nms_trajectory* t);
const double* nms_trajectory_times(const nms_trajectory* t);
const double* nms_trajectory_states(const nms_trajectory* t); /* row-major */
nms_status nms_trajectory_save(const nms_trajectory* t, const char* path);
void nms_trajectory_free(nms_trajectory* t);

/* ------------------------------------------------------------ diagnostics */

typedef struct nms_check_result {
    double max_skew;       /* max entry of |L + L^T| */
    double max_asym;       /* max entry of |M - M^T| */
    double min_eigenvalue; /* lowest eigenvalue of M, relative to its norm */
    double max_degeneracy; /* max relative |L grad S| and |M grad E| */
    double max_jacobi;     /* worst Jacobi cyclic residual (diagnostic only) */
    int states_checked;
} nms_check_result;
nms_status nms_model_check(const nms_model* m, int n_states, uint64_t seed,
                           nms_check_result* out);

/* Writes a JSON report and, when csv_dir is non-NULL, tidy per-coordinate
 * truth-vs-prediction CSVs plus energy/entropy-production series.  Either
 * output path may be NULL.  The exact-system variant compares the dataset
 * against a fresh integration of the named ground-truth system. */
nms_status nms_eval_report(const nms_model* m, const nms_dataset* d,
                           const nms_solver_options* opt, const char* json_path,
                           const char* csv_dir);
nms_status nms_eval_exact(const char* system, int rod_points, const nms_dataset* d,
                          const nms_solver_options* opt, const char* json_path,
                          const char* csv_dir);

/* ---------------------------------------------------------------- tables */

nms_status nms_param_count(const char* architecture, int n, int r, long* out);
/* CSV text (caller frees with nms_string_free). */
nms_status nms_scaling_csv(const int* n_list, int count, int r, int trials,
                           uint64_t seed, char** csv_out);

#ifdef __cplusplus
}
#endif

#endif /* NMS_H */
