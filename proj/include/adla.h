/* SPDX-License-Identifier: Apache-2.0 */
/*
 * adla: adjoint differentiation with symbolic dense linear algebra.
 *
 * C interface to the adla core. All objects are opaque handles created and
 * destroyed through this API; every fallible function returns an
 * adla_status, with results written through out-parameters. A human-readable
 * description of the most recent failure on the calling thread is available
 * via adla_last_error().
 *
 * Handles are not thread-safe: a tape and everything bound to it (matrices,
 * solvers) must be used from one thread at a time. Distinct tapes are
 * independent.
 */
#ifndef ADLA_H
#define ADLA_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Sentinel index for passive (constant) variables. */
#define ADLA_PASSIVE_REF UINT64_MAX

typedef enum adla_status {
  ADLA_OK = 0,
  ADLA_ERR_INVALID_ARGUMENT = 1,
  ADLA_ERR_DIMENSION_MISMATCH = 2,
  ADLA_ERR_SINGULAR_MATRIX = 3,
  ADLA_ERR_NOT_POSITIVE_DEFINITE = 4,
  ADLA_ERR_TAPE_STATE = 5,
  ADLA_ERR_OUT_OF_RANGE = 6,
  ADLA_ERR_NO_MEMORY = 7,
  ADLA_ERR_IO = 8,
  ADLA_ERR_UNKNOWN = 9
} adla_status;

/* Static name of a status code, e.g. "singular matrix". */
const char* adla_status_name(adla_status status);

/* Message of the most recent failure on this thread ("" if none). The
 * pointer stays valid until the next failing adla call on the thread. */
const char* adla_last_error(void);

typedef struct adla_tape adla_tape;
typedef struct adla_mat adla_mat;
typedef struct adla_solver adla_solver;
typedef struct adla_rng adla_rng;

typedef struct adla_stats {
  uint64_t num_entries;
  uint64_t num_edges;
  uint64_t num_callback_payload_scalars;
  uint64_t estimated_bytes; /* 16 B/entry + 16 B/edge + 8 B/payload scalar */
} adla_stats;

/* ------------------------------------------------------------------ tape */

adla_status adla_tape_new(adla_tape** out_tape);
void adla_tape_free(adla_tape* tape);

adla_status adla_tape_reset(adla_tape* tape);
adla_status adla_tape_position(const adla_tape* tape, uint64_t* out_position);
adla_status adla_tape_rewind_to(adla_tape* tape, uint64_t position);
adla_status adla_tape_stats(const adla_tape* tape, adla_stats* out_stats);

/* Records one entry whose edges are the non-passive deps (parallel arrays
 * of length num_deps). Returns the new entry's index. */
adla_status adla_tape_record(adla_tape* tape, const uint64_t* dep_refs,
                             const double* dep_weights, size_t num_deps,
                             uint64_t* out_ref);

adla_status adla_tape_set_adjoint(adla_tape* tape, uint64_t ref, double value);
adla_status adla_tape_get_adjoint(const adla_tape* tape, uint64_t ref,
                                  double* out_value);

/* Reverse sweep. Interpreting twice without reset/rewind is an error. */
adla_status adla_tape_interpret_reverse(adla_tape* tape);

/* -------------------------------------------------------------- matrices */

/* symbolic: matrix-level adjoint rules recorded as callbacks (quadratic
 * tape growth); algorithmic: plain overloading of every scalar operation
 * (cubic tape growth). */
typedef enum adla_mode {
  ADLA_MODE_SYMBOLIC = 0,
  ADLA_MODE_ALGORITHMIC = 1
} adla_mode;

typedef enum adla_solver_kind {
  ADLA_SOLVER_LU = 0,
  ADLA_SOLVER_QR_COL_PIV = 1,
  ADLA_SOLVER_QR_FULL_PIV = 2,
  ADLA_SOLVER_CHOLESKY = 3
} adla_solver_kind;

/* Registers rows*cols independent variables on the tape (row-major). */
adla_status adla_mat_new_active(adla_tape* tape, size_t rows, size_t cols,
                                const double* row_major, adla_mat** out_mat);

/* A constant matrix: participates in operations, receives no adjoints. */
adla_status adla_mat_new_passive(size_t rows, size_t cols,
                                 const double* row_major, adla_mat** out_mat);

void adla_mat_free(adla_mat* mat);

adla_status adla_mat_dims(const adla_mat* mat, size_t* out_rows,
                          size_t* out_cols);
adla_status adla_mat_values(const adla_mat* mat, double* out_row_major);

/* Sets the adjoint of every element (row-major seeds). */
adla_status adla_mat_seed_adjoints(adla_mat* mat, const double* seeds);

/* Reads element adjoints; passive elements read as 0. */
adla_status adla_mat_adjoints(const adla_mat* mat, double* out_row_major);

/* C = A B. */
adla_status adla_matmul(adla_mode mode, const adla_mat* a, const adla_mat* b,
                        adla_mat** out_c);

/* Factorizes a square matrix; the decomposition is retained by the solver
 * handle (and reused by the adjoint run in symbolic mode). */
adla_status adla_solver_new(adla_mode mode, adla_solver_kind kind,
                            const adla_mat* a, adla_solver** out_solver);
void adla_solver_free(adla_solver* solver);

/* x = A^{-1} b for an n x 1 right-hand side. */
adla_status adla_solve(const adla_solver* solver, const adla_mat* b,
                       adla_mat** out_x);

/* C = A^{-1}; requires an LU solver. */
adla_status adla_inverse(const adla_solver* solver, adla_mat** out_c);

/* x = log|det A|; requires a QR or LU solver. Returns the scalar's value
 * and its tape ref (seed it with adla_tape_set_adjoint). */
adla_status adla_log_abs_det(const adla_solver* solver, double* out_value,
                             uint64_t* out_ref);

/* ------------------------------------------------------------------- rng */

/* xoshiro256++ seeded via splitmix64; uniform draws lie in [-1,1). */
adla_status adla_rng_new(uint64_t seed, adla_rng** out_rng);
void adla_rng_free(adla_rng* rng);
adla_status adla_rng_fill_uniform(adla_rng* rng, double* out, size_t count);
/* M^T M + n I, always symmetric positive definite. */
adla_status adla_rng_fill_spd(adla_rng* rng, size_t n, double* out_row_major);
/* Uniform square draw filtered on the LU pivot ratio. */
adla_status adla_rng_fill_well_conditioned(adla_rng* rng, size_t n,
                                           double* out_row_major);

/* ------------------------------------------------------------ benchmarks */

typedef enum adla_bench_op {
  ADLA_BENCH_MATMUL = 0,
  ADLA_BENCH_SOLVE_LU = 1,
  ADLA_BENCH_SOLVE_QR_COLPIV = 2,
  ADLA_BENCH_SOLVE_QR_FULLPIV = 3,
  ADLA_BENCH_SOLVE_LLT = 4,
  ADLA_BENCH_INVERSE = 5,
  ADLA_BENCH_LOGABSDET = 6
} adla_bench_op;

typedef enum adla_bench_mode {
  ADLA_BENCH_SYMBOLIC = 0,
  ADLA_BENCH_ALGORITHMIC = 1,
  ADLA_BENCH_PRIMAL = 2
} adla_bench_mode;

typedef struct adla_bench_config {
  adla_bench_op op;
  adla_bench_mode mode;
  const uint64_t* sizes; /* ascending, non-empty */
  size_t num_sizes;
  uint64_t seed;
  uint32_t repeats; /* >= 1; timings are medians */
} adla_bench_config;

typedef struct adla_bench_record {
  char op[24];
  char mode[16];
  uint64_t n;
  uint64_t tape_entries;
  uint64_t tape_edges;
  uint64_t tape_payload_scalars;
  uint64_t tape_bytes;
  double t_primal_s;
  double t_adjoint_s;
  double t_total_s;
} adla_bench_record;

const char* adla_bench_op_name(adla_bench_op op);
const char* adla_bench_mode_name(adla_bench_mode mode);
adla_status adla_bench_op_from_name(const char* name, adla_bench_op* out_op);
adla_status adla_bench_mode_from_name(const char* name,
                                      adla_bench_mode* out_mode);

/* Runs one op/mode over the configured sizes; writes one record per size
 * into out_records (capacity must be >= config->num_sizes). */
adla_status adla_bench_run(const adla_bench_config* config,
                           adla_bench_record* out_records,
                           size_t* out_num_records);

/* CSV I/O with the fixed header
 * op,mode,n,tape_entries,tape_edges,tape_payload_scalars,tape_bytes,
 * t_primal_s,t_adjoint_s,t_total_s. */
adla_status adla_bench_write_csv(const char* path,
                                 const adla_bench_record* records,
                                 size_t num_records);
adla_status adla_bench_read_csv(const char* path, adla_bench_record* out_records,
                                size_t capacity, size_t* out_num_records);

/* Least-squares slope of log(field) vs log(n) over the largest half of the
 * sizes. field is a CSV column name such as "tape_bytes" or "t_adjoint_s". */
adla_status adla_bench_fit_slope(const adla_bench_record* records,
                                 size_t num_records, const char* field,
                                 double* out_slope);

/* Run-time factors t_total(symbolic)/t_total(primal) per matching n. Sizes
 * with primal medians below the timer-reliability floor are skipped. */
adla_status adla_bench_runtime_factors(const adla_bench_record* symbolic,
                                       size_t num_symbolic,
                                       const adla_bench_record* primal,
                                       size_t num_primal, uint64_t* out_n,
                                       double* out_factor, size_t capacity,
                                       size_t* out_count);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ADLA_H */
