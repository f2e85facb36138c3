// SPDX-License-Identifier: Apache-2.0
#include "adla.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "active_matrix.hpp"
#include "algorithmic.hpp"
#include "bench.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "tape.hpp"

// Handle definitions. Each C handle wraps one core object; solver handles
// carry either a retained symbolic solver or an algorithmic one.
struct adla_tape {
  adla::Tape tape;
};

struct adla_mat {
  adla::ActiveMatrix mat;
};

struct adla_solver {
  adla_mode mode = ADLA_MODE_SYMBOLIC;
  adla::SymbolicSolver symbolic;
  adla::AlgorithmicSolver algorithmic;
  adla::Tape* tape = nullptr;
};

struct adla_rng {
  adla::Rng rng;
};

namespace {

thread_local std::string t_last_error;

void set_last_error(const char* message) { t_last_error = message; }

adla_status fail(adla_status status, const char* message) {
  set_last_error(message);
  return status;
}

// Maps core exceptions onto status codes.
adla_status translate_current_exception() {
  try {
    throw;
  } catch (const adla::DimensionMismatchError& e) {
    return fail(ADLA_ERR_DIMENSION_MISMATCH, e.what());
  } catch (const adla::SingularMatrixError& e) {
    return fail(ADLA_ERR_SINGULAR_MATRIX, e.what());
  } catch (const adla::NotPositiveDefiniteError& e) {
    return fail(ADLA_ERR_NOT_POSITIVE_DEFINITE, e.what());
  } catch (const adla::TapeStateError& e) {
    return fail(ADLA_ERR_TAPE_STATE, e.what());
  } catch (const std::out_of_range& e) {
    return fail(ADLA_ERR_OUT_OF_RANGE, e.what());
  } catch (const std::length_error& e) {
    return fail(ADLA_ERR_NO_MEMORY, e.what());
  } catch (const std::bad_alloc& e) {
    return fail(ADLA_ERR_NO_MEMORY, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(ADLA_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(ADLA_ERR_UNKNOWN, e.what());
  } catch (...) {
    return fail(ADLA_ERR_UNKNOWN, "unknown error");
  }
}

template <class Fn>
adla_status guarded(Fn&& fn) {
  try {
    fn();
    return ADLA_OK;
  } catch (...) {
    return translate_current_exception();
  }
}

adla_status require(bool ok, const char* message) {
  return ok ? ADLA_OK : fail(ADLA_ERR_INVALID_ARGUMENT, message);
}

adla::VariableRef ref_from_u64(uint64_t ref) {
  return ref == ADLA_PASSIVE_REF ? adla::VariableRef::passive()
                                 : adla::VariableRef{ref};
}

adla::SolverKind kind_from_c(adla_solver_kind kind) {
  switch (kind) {
    case ADLA_SOLVER_LU: return adla::SolverKind::lu;
    case ADLA_SOLVER_QR_COL_PIV: return adla::SolverKind::qr_col_piv;
    case ADLA_SOLVER_QR_FULL_PIV: return adla::SolverKind::qr_full_piv;
    case ADLA_SOLVER_CHOLESKY: return adla::SolverKind::cholesky;
  }
  return adla::SolverKind::lu;
}

void copy_name(char* dst, std::size_t cap, const std::string& src) {
  const std::size_t len = std::min(src.size(), cap - 1);
  std::memcpy(dst, src.data(), len);
  dst[len] = '\0';
}

adla_bench_record to_c_record(const adla::BenchRecord& r) {
  adla_bench_record out{};
  copy_name(out.op, sizeof(out.op), r.op);
  copy_name(out.mode, sizeof(out.mode), r.mode);
  out.n = r.n;
  out.tape_entries = r.tape_entries;
  out.tape_edges = r.tape_edges;
  out.tape_payload_scalars = r.tape_payload_scalars;
  out.tape_bytes = r.tape_bytes;
  out.t_primal_s = r.t_primal_s;
  out.t_adjoint_s = r.t_adjoint_s;
  out.t_total_s = r.t_total_s;
  return out;
}

adla::BenchRecord from_c_record(const adla_bench_record& r) {
  adla::BenchRecord out;
  out.op = r.op;
  out.mode = r.mode;
  out.n = r.n;
  out.tape_entries = r.tape_entries;
  out.tape_edges = r.tape_edges;
  out.tape_payload_scalars = r.tape_payload_scalars;
  out.tape_bytes = r.tape_bytes;
  out.t_primal_s = r.t_primal_s;
  out.t_adjoint_s = r.t_adjoint_s;
  out.t_total_s = r.t_total_s;
  return out;
}

}  // namespace

extern "C" {

const char* adla_status_name(adla_status status) {
  switch (status) {
    case ADLA_OK: return "ok";
    case ADLA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case ADLA_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case ADLA_ERR_SINGULAR_MATRIX: return "singular matrix";
    case ADLA_ERR_NOT_POSITIVE_DEFINITE: return "not positive definite";
    case ADLA_ERR_TAPE_STATE: return "tape state error";
    case ADLA_ERR_OUT_OF_RANGE: return "out of range";
    case ADLA_ERR_NO_MEMORY: return "out of memory";
    case ADLA_ERR_IO: return "i/o error";
    case ADLA_ERR_UNKNOWN: return "unknown error";
  }
  return "?";
}

const char* adla_last_error(void) { return t_last_error.c_str(); }

/* ------------------------------------------------------------------ tape */

adla_status adla_tape_new(adla_tape** out_tape) {
  if (adla_status s = require(out_tape != nullptr, "out_tape is null"); s) return s;
  return guarded([&] { *out_tape = new adla_tape(); });
}

void adla_tape_free(adla_tape* tape) { delete tape; }

adla_status adla_tape_reset(adla_tape* tape) {
  if (adla_status s = require(tape != nullptr, "tape is null"); s) return s;
  return guarded([&] { tape->tape.reset(); });
}

adla_status adla_tape_position(const adla_tape* tape, uint64_t* out_position) {
  if (adla_status s = require(tape && out_position, "null argument"); s) return s;
  *out_position = tape->tape.position();
  return ADLA_OK;
}

adla_status adla_tape_rewind_to(adla_tape* tape, uint64_t position) {
  if (adla_status s = require(tape != nullptr, "tape is null"); s) return s;
  return guarded([&] { tape->tape.rewind_to(position); });
}

adla_status adla_tape_stats(const adla_tape* tape, adla_stats* out_stats) {
  if (adla_status s = require(tape && out_stats, "null argument"); s) return s;
  const adla::TapeStats stats = tape->tape.stats();
  out_stats->num_entries = stats.num_entries;
  out_stats->num_edges = stats.num_edges;
  out_stats->num_callback_payload_scalars = stats.num_callback_payload_scalars;
  out_stats->estimated_bytes = stats.estimated_bytes;
  return ADLA_OK;
}

adla_status adla_tape_record(adla_tape* tape, const uint64_t* dep_refs,
                             const double* dep_weights, size_t num_deps,
                             uint64_t* out_ref) {
  if (adla_status s = require(tape && out_ref, "null argument"); s) return s;
  if (adla_status s = require(num_deps == 0 || (dep_refs && dep_weights),
                              "dep arrays are null");
      s) {
    return s;
  }
  return guarded([&] {
    std::vector<adla::Dep> deps(num_deps);
    for (size_t i = 0; i < num_deps; ++i) {
      deps[i] = {ref_from_u64(dep_refs[i]), dep_weights[i]};
    }
    *out_ref = tape->tape.record(deps).index;
  });
}

adla_status adla_tape_set_adjoint(adla_tape* tape, uint64_t ref, double value) {
  if (adla_status s = require(tape != nullptr, "tape is null"); s) return s;
  return guarded([&] { tape->tape.set_adjoint(ref_from_u64(ref), value); });
}

adla_status adla_tape_get_adjoint(const adla_tape* tape, uint64_t ref,
                                  double* out_value) {
  if (adla_status s = require(tape && out_value, "null argument"); s) return s;
  return guarded([&] { *out_value = tape->tape.adjoint(ref_from_u64(ref)); });
}

adla_status adla_tape_interpret_reverse(adla_tape* tape) {
  if (adla_status s = require(tape != nullptr, "tape is null"); s) return s;
  return guarded([&] { tape->tape.interpret_reverse(); });
}

/* -------------------------------------------------------------- matrices */

adla_status adla_mat_new_active(adla_tape* tape, size_t rows, size_t cols,
                                const double* row_major, adla_mat** out_mat) {
  if (adla_status s = require(tape && row_major && out_mat, "null argument"); s)
    return s;
  return guarded([&] {
    adla::Matrix values(rows, cols,
                        std::vector<double>(row_major, row_major + rows * cols));
    *out_mat = new adla_mat{adla::ActiveMatrix::input(tape->tape, values)};
  });
}

adla_status adla_mat_new_passive(size_t rows, size_t cols,
                                 const double* row_major, adla_mat** out_mat) {
  if (adla_status s = require(row_major && out_mat, "null argument"); s) return s;
  return guarded([&] {
    adla::Matrix values(rows, cols,
                        std::vector<double>(row_major, row_major + rows * cols));
    *out_mat = new adla_mat{adla::ActiveMatrix::passive(values)};
  });
}

void adla_mat_free(adla_mat* mat) { delete mat; }

adla_status adla_mat_dims(const adla_mat* mat, size_t* out_rows,
                          size_t* out_cols) {
  if (adla_status s = require(mat && out_rows && out_cols, "null argument"); s)
    return s;
  *out_rows = mat->mat.rows();
  *out_cols = mat->mat.cols();
  return ADLA_OK;
}

adla_status adla_mat_values(const adla_mat* mat, double* out_row_major) {
  if (adla_status s = require(mat && out_row_major, "null argument"); s) return s;
  const auto data = mat->mat.values().data();
  std::memcpy(out_row_major, data.data(), data.size() * sizeof(double));
  return ADLA_OK;
}

adla_status adla_mat_seed_adjoints(adla_mat* mat, const double* seeds) {
  if (adla_status s = require(mat && seeds, "null argument"); s) return s;
  return guarded([&] {
    adla::Matrix m(mat->mat.rows(), mat->mat.cols(),
                   std::vector<double>(seeds, seeds + mat->mat.rows() *
                                                          mat->mat.cols()));
    mat->mat.seed_adjoints(m);
  });
}

adla_status adla_mat_adjoints(const adla_mat* mat, double* out_row_major) {
  if (adla_status s = require(mat && out_row_major, "null argument"); s) return s;
  return guarded([&] {
    const adla::Matrix adj = mat->mat.adjoints();
    std::memcpy(out_row_major, adj.data().data(),
                adj.size() * sizeof(double));
  });
}

adla_status adla_matmul(adla_mode mode, const adla_mat* a, const adla_mat* b,
                        adla_mat** out_c) {
  if (adla_status s = require(a && b && out_c, "null argument"); s) return s;
  return guarded([&] {
    *out_c = new adla_mat{mode == ADLA_MODE_SYMBOLIC
                              ? adla::matmul_symbolic(a->mat, b->mat)
                              : adla::matmul_algorithmic(a->mat, b->mat)};
  });
}

adla_status adla_solver_new(adla_mode mode, adla_solver_kind kind,
                            const adla_mat* a, adla_solver** out_solver) {
  if (adla_status s = require(a && out_solver, "null argument"); s) return s;
  return guarded([&] {
    auto solver = std::make_unique<adla_solver>();
    solver->mode = mode;
    solver->tape = a->mat.tape();
    if (mode == ADLA_MODE_SYMBOLIC) {
      solver->symbolic = adla::make_solver(a->mat, kind_from_c(kind));
    } else {
      solver->algorithmic =
          adla::make_solver_algorithmic(a->mat, kind_from_c(kind));
    }
    *out_solver = solver.release();
  });
}

void adla_solver_free(adla_solver* solver) { delete solver; }

adla_status adla_solve(const adla_solver* solver, const adla_mat* b,
                       adla_mat** out_x) {
  if (adla_status s = require(solver && b && out_x, "null argument"); s) return s;
  return guarded([&] {
    *out_x = new adla_mat{solver->mode == ADLA_MODE_SYMBOLIC
                              ? adla::solve_symbolic(solver->symbolic, b->mat)
                              : adla::solve_algorithmic(solver->algorithmic,
                                                        b->mat)};
  });
}

adla_status adla_inverse(const adla_solver* solver, adla_mat** out_c) {
  if (adla_status s = require(solver && out_c, "null argument"); s) return s;
  return guarded([&] {
    *out_c = new adla_mat{solver->mode == ADLA_MODE_SYMBOLIC
                              ? adla::inverse_symbolic(solver->symbolic)
                              : adla::inverse_algorithmic(solver->algorithmic)};
  });
}

adla_status adla_log_abs_det(const adla_solver* solver, double* out_value,
                             uint64_t* out_ref) {
  if (adla_status s = require(solver && out_value && out_ref, "null argument");
      s) {
    return s;
  }
  return guarded([&] {
    const adla::AdjointScalar x =
        solver->mode == ADLA_MODE_SYMBOLIC
            ? adla::log_abs_det_symbolic(solver->symbolic)
            : adla::log_abs_det_algorithmic(solver->algorithmic);
    *out_value = x.value();
    *out_ref = x.ref().index;
  });
}

/* ------------------------------------------------------------------- rng */

adla_status adla_rng_new(uint64_t seed, adla_rng** out_rng) {
  if (adla_status s = require(out_rng != nullptr, "out_rng is null"); s) return s;
  return guarded([&] { *out_rng = new adla_rng{adla::Rng(seed)}; });
}

void adla_rng_free(adla_rng* rng) { delete rng; }

adla_status adla_rng_fill_uniform(adla_rng* rng, double* out, size_t count) {
  if (adla_status s = require(rng && (out || count == 0), "null argument"); s)
    return s;
  rng->rng.fill_uniform({out, count});
  return ADLA_OK;
}

adla_status adla_rng_fill_spd(adla_rng* rng, size_t n, double* out_row_major) {
  if (adla_status s = require(rng && out_row_major, "null argument"); s) return s;
  return guarded([&] {
    const adla::Matrix m = adla::random_spd_matrix(rng->rng, n);
    std::memcpy(out_row_major, m.data().data(), m.size() * sizeof(double));
  });
}

adla_status adla_rng_fill_well_conditioned(adla_rng* rng, size_t n,
                                           double* out_row_major) {
  if (adla_status s = require(rng && out_row_major, "null argument"); s) return s;
  return guarded([&] {
    const adla::Matrix m = adla::random_well_conditioned_matrix(rng->rng, n);
    std::memcpy(out_row_major, m.data().data(), m.size() * sizeof(double));
  });
}

/* ------------------------------------------------------------ benchmarks */

const char* adla_bench_op_name(adla_bench_op op) {
  return adla::to_string(static_cast<adla::BenchOp>(op));
}

const char* adla_bench_mode_name(adla_bench_mode mode) {
  return adla::to_string(static_cast<adla::BenchMode>(mode));
}

adla_status adla_bench_op_from_name(const char* name, adla_bench_op* out_op) {
  if (adla_status s = require(name && out_op, "null argument"); s) return s;
  const auto op = adla::parse_bench_op(name);
  if (!op) return fail(ADLA_ERR_INVALID_ARGUMENT, "unknown bench op name");
  *out_op = static_cast<adla_bench_op>(*op);
  return ADLA_OK;
}

adla_status adla_bench_mode_from_name(const char* name,
                                      adla_bench_mode* out_mode) {
  if (adla_status s = require(name && out_mode, "null argument"); s) return s;
  const auto mode = adla::parse_bench_mode(name);
  if (!mode) return fail(ADLA_ERR_INVALID_ARGUMENT, "unknown bench mode name");
  *out_mode = static_cast<adla_bench_mode>(*mode);
  return ADLA_OK;
}

adla_status adla_bench_run(const adla_bench_config* config,
                           adla_bench_record* out_records,
                           size_t* out_num_records) {
  if (adla_status s =
          require(config && out_records && out_num_records, "null argument");
      s) {
    return s;
  }
  if (adla_status s = require(config->sizes && config->num_sizes > 0,
                              "size list must not be empty");
      s) {
    return s;
  }
  return guarded([&] {
    adla::BenchConfig cfg;
    cfg.op = static_cast<adla::BenchOp>(config->op);
    cfg.mode = static_cast<adla::BenchMode>(config->mode);
    cfg.sizes.assign(config->sizes, config->sizes + config->num_sizes);
    cfg.seed = config->seed;
    cfg.repeats = config->repeats;
    const std::vector<adla::BenchRecord> records = adla::run_bench(cfg);
    for (size_t i = 0; i < records.size(); ++i) {
      out_records[i] = to_c_record(records[i]);
    }
    *out_num_records = records.size();
  });
}

adla_status adla_bench_write_csv(const char* path,
                                 const adla_bench_record* records,
                                 size_t num_records) {
  if (adla_status s = require(path && (records || num_records == 0),
                              "null argument");
      s) {
    return s;
  }
  std::vector<adla::BenchRecord> rs;
  rs.reserve(num_records);
  for (size_t i = 0; i < num_records; ++i) rs.push_back(from_c_record(records[i]));
  std::ofstream out(path);
  if (!out) return fail(ADLA_ERR_IO, "cannot open csv file for writing");
  adla::write_csv(out, rs);
  out.flush();
  if (!out) return fail(ADLA_ERR_IO, "csv write failed");
  return ADLA_OK;
}

adla_status adla_bench_read_csv(const char* path,
                                adla_bench_record* out_records, size_t capacity,
                                size_t* out_num_records) {
  if (adla_status s = require(path && out_num_records, "null argument"); s)
    return s;
  std::ifstream in(path);
  if (!in) return fail(ADLA_ERR_IO, "cannot open csv file for reading");
  return guarded([&] {
    const std::vector<adla::BenchRecord> records = adla::read_csv(in);
    if (records.size() > capacity) {
      throw std::invalid_argument("csv: record capacity too small");
    }
    for (size_t i = 0; i < records.size(); ++i) {
      out_records[i] = to_c_record(records[i]);
    }
    *out_num_records = records.size();
  });
}

adla_status adla_bench_fit_slope(const adla_bench_record* records,
                                 size_t num_records, const char* field,
                                 double* out_slope) {
  if (adla_status s =
          require(records && field && out_slope, "null argument");
      s) {
    return s;
  }
  const auto f = adla::parse_bench_field(field);
  if (!f) return fail(ADLA_ERR_INVALID_ARGUMENT, "unknown bench field name");
  return guarded([&] {
    std::vector<adla::BenchRecord> rs;
    rs.reserve(num_records);
    for (size_t i = 0; i < num_records; ++i) {
      rs.push_back(from_c_record(records[i]));
    }
    *out_slope = adla::fit_loglog_slope(rs, *f);
  });
}

adla_status adla_bench_runtime_factors(const adla_bench_record* symbolic,
                                       size_t num_symbolic,
                                       const adla_bench_record* primal,
                                       size_t num_primal, uint64_t* out_n,
                                       double* out_factor, size_t capacity,
                                       size_t* out_count) {
  if (adla_status s = require(symbolic && primal && out_n && out_factor &&
                                  out_count,
                              "null argument");
      s) {
    return s;
  }
  return guarded([&] {
    std::vector<adla::BenchRecord> s, p;
    for (size_t i = 0; i < num_symbolic; ++i)
      s.push_back(from_c_record(symbolic[i]));
    for (size_t i = 0; i < num_primal; ++i)
      p.push_back(from_c_record(primal[i]));
    const std::vector<adla::FactorPoint> factors =
        adla::runtime_factors(s, p);
    if (factors.size() > capacity) {
      throw std::invalid_argument("runtime_factors: capacity too small");
    }
    for (size_t i = 0; i < factors.size(); ++i) {
      out_n[i] = factors[i].n;
      out_factor[i] = factors[i].factor;
    }
    *out_count = factors.size();
  });
}

} /* extern "C" */
