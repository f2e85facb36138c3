// SPDX-License-Identifier: Apache-2.0
//
// Command-line benchmark and verification harness. Talks to the core
// exclusively through the C API in adla.h.
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "adla.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailure = 1;
constexpr int kExitUsage = 2;

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void print_records_csv(const std::vector<adla_bench_record>& records) {
  std::printf(
      "op,mode,n,tape_entries,tape_edges,tape_payload_scalars,tape_bytes,"
      "t_primal_s,t_adjoint_s,t_total_s\n");
  for (const adla_bench_record& r : records) {
    std::printf("%s,%s,%llu,%llu,%llu,%llu,%llu,%s,%s,%s\n", r.op, r.mode,
                static_cast<unsigned long long>(r.n),
                static_cast<unsigned long long>(r.tape_entries),
                static_cast<unsigned long long>(r.tape_edges),
                static_cast<unsigned long long>(r.tape_payload_scalars),
                static_cast<unsigned long long>(r.tape_bytes),
                format_double(r.t_primal_s).c_str(),
                format_double(r.t_adjoint_s).c_str(),
                format_double(r.t_total_s).c_str());
  }
}

bool run_records(adla_bench_op op, adla_bench_mode mode,
                 const std::vector<uint64_t>& sizes, uint64_t seed,
                 uint32_t repeats, std::vector<adla_bench_record>& out) {
  adla_bench_config cfg{};
  cfg.op = op;
  cfg.mode = mode;
  cfg.sizes = sizes.data();
  cfg.num_sizes = sizes.size();
  cfg.seed = seed;
  cfg.repeats = repeats;
  out.resize(sizes.size());
  size_t count = 0;
  const adla_status s = adla_bench_run(&cfg, out.data(), &count);
  if (s != ADLA_OK) {
    std::fprintf(stderr, "bench failed: %s (%s)\n", adla_status_name(s),
                 adla_last_error());
    return false;
  }
  out.resize(count);
  return true;
}

int run_bench_command(const std::string& op_name, const std::string& mode_name,
                      std::vector<uint64_t> sizes, uint64_t seed,
                      uint32_t repeats, const std::string& out_path) {
  adla_bench_op op;
  if (adla_bench_op_from_name(op_name.c_str(), &op) != ADLA_OK) {
    std::fprintf(stderr, "unknown op '%s'\n", op_name.c_str());
    return kExitUsage;
  }
  adla_bench_mode mode;
  if (adla_bench_mode_from_name(mode_name.c_str(), &mode) != ADLA_OK) {
    std::fprintf(stderr, "unknown mode '%s'\n", mode_name.c_str());
    return kExitUsage;
  }
  adla_bench_config cfg{};
  cfg.op = op;
  cfg.mode = mode;
  cfg.sizes = sizes.data();
  cfg.num_sizes = sizes.size();
  cfg.seed = seed;
  cfg.repeats = repeats;
  std::vector<adla_bench_record> records(sizes.size());
  size_t count = 0;
  const adla_status status = adla_bench_run(&cfg, records.data(), &count);
  if (status == ADLA_ERR_INVALID_ARGUMENT) {
    std::fprintf(stderr, "bad bench config: %s\n", adla_last_error());
    return kExitUsage;
  }
  if (status != ADLA_OK) {
    std::fprintf(stderr, "bench failed: %s (%s)\n", adla_status_name(status),
                 adla_last_error());
    return kExitVerificationFailure;
  }
  records.resize(count);
  if (out_path.empty()) {
    print_records_csv(records);
  } else {
    const adla_status s =
        adla_bench_write_csv(out_path.c_str(), records.data(), records.size());
    if (s != ADLA_OK) {
      std::fprintf(stderr, "csv write failed: %s (%s)\n", adla_status_name(s),
                   adla_last_error());
      return kExitVerificationFailure;
    }
    std::fprintf(stderr, "wrote %zu records to %s\n", records.size(),
                 out_path.c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------- //
// check: oracle-equivalence suite                                         //
// ---------------------------------------------------------------------- //

struct CheckReport {
  int failures = 0;

  void line(bool ok, const std::string& what) {
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", what.c_str());
    if (!ok) ++failures;
  }
};

double max_abs_diff(const std::vector<double>& a,
                    const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// (M + M^T)/2 applied in place for an n x n row-major buffer.
void symmetrize(std::vector<double>& m, size_t n) {
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (m[i * n + j] + m[j * n + i]);
      m[i * n + j] = avg;
      m[j * n + i] = avg;
    }
}

struct OracleCase {
  adla_bench_op op;
  adla_solver_kind kind;
  bool has_rhs;
  bool scalar_output;
};

// Runs one op in one mode and returns the input adjoints.
bool run_oracle_mode(const OracleCase& oc, adla_mode mode, size_t n,
                     const std::vector<double>& a, const std::vector<double>& b,
                     const std::vector<double>& seed,
                     std::vector<double>& a_adj, std::vector<double>& b_adj) {
  adla_tape* tape = nullptr;
  if (adla_tape_new(&tape) != ADLA_OK) return false;
  adla_mat* ma = nullptr;
  adla_mat* mb = nullptr;
  adla_mat* mout = nullptr;
  adla_solver* solver = nullptr;
  bool ok = adla_mat_new_active(tape, n, n, a.data(), &ma) == ADLA_OK;
  if (ok && oc.has_rhs) {
    const size_t rhs_cols = oc.op == ADLA_BENCH_MATMUL ? n : 1;
    ok = adla_mat_new_active(tape, n, rhs_cols, b.data(), &mb) == ADLA_OK;
  }
  if (ok) {
    if (oc.op == ADLA_BENCH_MATMUL) {
      ok = adla_matmul(mode, ma, mb, &mout) == ADLA_OK;
      if (ok) ok = adla_mat_seed_adjoints(mout, seed.data()) == ADLA_OK;
    } else {
      ok = adla_solver_new(mode, oc.kind, ma, &solver) == ADLA_OK;
      if (ok && oc.op == ADLA_BENCH_INVERSE) {
        ok = adla_inverse(solver, &mout) == ADLA_OK;
        if (ok) ok = adla_mat_seed_adjoints(mout, seed.data()) == ADLA_OK;
      } else if (ok && oc.op == ADLA_BENCH_LOGABSDET) {
        double value = 0.0;
        uint64_t ref = 0;
        ok = adla_log_abs_det(solver, &value, &ref) == ADLA_OK;
        if (ok) ok = adla_tape_set_adjoint(tape, ref, seed[0]) == ADLA_OK;
      } else if (ok) {
        ok = adla_solve(solver, mb, &mout) == ADLA_OK;
        if (ok) ok = adla_mat_seed_adjoints(mout, seed.data()) == ADLA_OK;
      }
    }
  }
  if (ok) ok = adla_tape_interpret_reverse(tape) == ADLA_OK;
  if (ok) {
    a_adj.assign(n * n, 0.0);
    ok = adla_mat_adjoints(ma, a_adj.data()) == ADLA_OK;
  }
  if (ok && oc.has_rhs) {
    b_adj.assign(b.size(), 0.0);
    ok = adla_mat_adjoints(mb, b_adj.data()) == ADLA_OK;
  }
  if (!ok) {
    std::fprintf(stderr, "oracle run failed: %s\n", adla_last_error());
  }
  adla_solver_free(solver);
  adla_mat_free(mout);
  adla_mat_free(mb);
  adla_mat_free(ma);
  adla_tape_free(tape);
  return ok;
}

int run_oracle_suite(CheckReport& report, uint64_t seed) {
  const OracleCase cases[] = {
      {ADLA_BENCH_MATMUL, ADLA_SOLVER_LU, true, false},
      {ADLA_BENCH_SOLVE_LU, ADLA_SOLVER_LU, true, false},
      {ADLA_BENCH_SOLVE_QR_COLPIV, ADLA_SOLVER_QR_COL_PIV, true, false},
      {ADLA_BENCH_SOLVE_QR_FULLPIV, ADLA_SOLVER_QR_FULL_PIV, true, false},
      {ADLA_BENCH_SOLVE_LLT, ADLA_SOLVER_CHOLESKY, true, false},
      {ADLA_BENCH_INVERSE, ADLA_SOLVER_LU, false, false},
      {ADLA_BENCH_LOGABSDET, ADLA_SOLVER_QR_FULL_PIV, false, true},
  };
  const size_t sizes[] = {1, 2, 3, 5, 8};
  constexpr int kInstances = 20;
  constexpr double kTol = 1e-10;

  adla_rng* rng = nullptr;
  if (adla_rng_new(seed, &rng) != ADLA_OK) return 1;

  for (const OracleCase& oc : cases) {
    double worst = 0.0;
    bool ok = true;
    for (const size_t n : sizes) {
      for (int instance = 0; instance < kInstances && ok; ++instance) {
        std::vector<double> a(n * n);
        if (oc.op == ADLA_BENCH_MATMUL) {
          ok = adla_rng_fill_uniform(rng, a.data(), a.size()) == ADLA_OK;
        } else if (oc.op == ADLA_BENCH_SOLVE_LLT) {
          ok = adla_rng_fill_spd(rng, n, a.data()) == ADLA_OK;
        } else {
          ok = adla_rng_fill_well_conditioned(rng, n, a.data()) == ADLA_OK;
        }
        std::vector<double> b;
        if (oc.has_rhs) {
          b.resize(oc.op == ADLA_BENCH_MATMUL ? n * n : n);
          ok = ok && adla_rng_fill_uniform(rng, b.data(), b.size()) == ADLA_OK;
        }
        std::vector<double> out_seed;
        if (oc.scalar_output) {
          out_seed.resize(1);
        } else if (oc.op == ADLA_BENCH_MATMUL || oc.op == ADLA_BENCH_INVERSE) {
          out_seed.resize(n * n);
        } else {
          out_seed.resize(n);
        }
        ok = ok &&
             adla_rng_fill_uniform(rng, out_seed.data(), out_seed.size()) ==
                 ADLA_OK;

        std::vector<double> a_sym, b_sym, a_alg, b_alg;
        ok = ok && run_oracle_mode(oc, ADLA_MODE_SYMBOLIC, n, a, b, out_seed,
                                   a_sym, b_sym);
        ok = ok && run_oracle_mode(oc, ADLA_MODE_ALGORITHMIC, n, a, b,
                                   out_seed, a_alg, b_alg);
        if (!ok) break;
        if (oc.op == ADLA_BENCH_SOLVE_LLT) {
          // Lower-reading kernel vs general-matrix rule: compare on the
          // symmetric subspace.
          symmetrize(a_sym, n);
          symmetrize(a_alg, n);
        }
        worst = std::max(worst, max_abs_diff(a_sym, a_alg));
        if (oc.has_rhs) worst = std::max(worst, max_abs_diff(b_sym, b_alg));
      }
    }
    ok = ok && worst <= kTol;
    report.line(ok, std::string("oracle ") + adla_bench_op_name(oc.op) +
                        ": symbolic vs algorithmic adjoints, max |diff| = " +
                        format_double(worst) + " (tol 1e-10)");
  }
  adla_rng_free(rng);
  return 0;
}

// ---------------------------------------------------------------------- //
// check: slope suite                                                      //
// ---------------------------------------------------------------------- //

// Least-squares log-log slope over every record (the complexity checks name
// their full size sets).
double full_slope(const std::vector<adla_bench_record>& records,
                  double (*field)(const adla_bench_record&)) {
  double mean_x = 0.0, mean_y = 0.0;
  for (const adla_bench_record& r : records) {
    mean_x += std::log(static_cast<double>(r.n));
    mean_y += std::log(field(r));
  }
  mean_x /= static_cast<double>(records.size());
  mean_y /= static_cast<double>(records.size());
  double sxy = 0.0, sxx = 0.0;
  for (const adla_bench_record& r : records) {
    const double dx = std::log(static_cast<double>(r.n)) - mean_x;
    const double dy = std::log(field(r)) - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
  }
  return sxy / sxx;
}


int run_slope_suite(CheckReport& report, uint64_t seed) {
  const adla_bench_op ops[] = {
      ADLA_BENCH_MATMUL,        ADLA_BENCH_SOLVE_LU,
      ADLA_BENCH_SOLVE_QR_COLPIV, ADLA_BENCH_SOLVE_QR_FULLPIV,
      ADLA_BENCH_SOLVE_LLT,     ADLA_BENCH_INVERSE,
      ADLA_BENCH_LOGABSDET,
  };
  const std::vector<uint64_t> mem_sizes = {32, 64, 128, 256};
  for (const adla_bench_op op : ops) {
    for (const adla_bench_mode mode :
         {ADLA_BENCH_SYMBOLIC, ADLA_BENCH_ALGORITHMIC}) {
      std::vector<adla_bench_record> records;
      if (!run_records(op, mode, mem_sizes, seed, 1, records)) return 1;
      const double slope = full_slope(
          records, [](const adla_bench_record& r) {
            return static_cast<double>(r.tape_bytes);
          });
      const bool symbolic = mode == ADLA_BENCH_SYMBOLIC;
      const double lo = symbolic ? 1.8 : 2.7;
      const double hi = symbolic ? 2.2 : 3.3;
      const bool ok = slope >= lo && slope <= hi;
      report.line(ok, std::string("slope tape_bytes ") +
                          adla_bench_op_name(op) + " " +
                          adla_bench_mode_name(mode) + " = " +
                          format_double(slope) + " (band " +
                          format_double(lo) + ".." + format_double(hi) + ")");
    }
  }

  const std::vector<uint64_t> time_sizes = {64, 128, 256, 512};
  std::vector<adla_bench_record> records;
  if (!run_records(ADLA_BENCH_SOLVE_LU, ADLA_BENCH_SYMBOLIC, time_sizes, seed,
                   5, records)) {
    return 1;
  }
  const double adjoint_slope = full_slope(
      records, [](const adla_bench_record& r) { return r.t_adjoint_s; });
  const double total_slope = full_slope(
      records, [](const adla_bench_record& r) { return r.t_total_s; });
  report.line(adjoint_slope >= 1.7 && adjoint_slope <= 2.4,
              "slope t_adjoint_s solve-lu symbolic = " +
                  format_double(adjoint_slope) + " (band 1.7..2.4)");
  report.line(total_slope >= 2.6 && total_slope <= 3.4,
              "slope t_total_s solve-lu symbolic = " +
                  format_double(total_slope) + " (band 2.6..3.4)");
  return 0;
}

int run_check_command(const std::string& suite, uint64_t seed) {
#if defined(__GLIBC__)
  // Keep freed pages resident; the slope suite compares millisecond phases
  // and heap trimming would swamp them with page-fault churn.
  mallopt(M_TRIM_THRESHOLD, -1);
  mallopt(M_MMAP_MAX, 0);
#endif
  CheckReport report;
  if (suite == "oracle" || suite == "all") {
    if (run_oracle_suite(report, seed) != 0) return kExitVerificationFailure;
  }
  if (suite == "slopes" || suite == "all") {
    if (run_slope_suite(report, seed) != 0) return kExitVerificationFailure;
  }
  if (report.failures > 0) {
    std::printf("check: %d failure(s)\n", report.failures);
    return kExitVerificationFailure;
  }
  std::printf("check: all passed\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "adla: reverse-mode differentiation with matrix-level adjoints for "
      "dense linear algebra"};
  app.require_subcommand(1);

  std::string op_name = "matmul";
  std::string mode_name = "symbolic";
  std::vector<uint64_t> sizes = {16, 32, 64, 128, 256};
  uint64_t seed = 42;
  uint32_t repeats = 5;
  std::string out_path;

  CLI::App* bench = app.add_subcommand(
      "bench", "Measure tape size and run-time phases for one op and mode");
  bench->add_option("--op", op_name,
                    "matmul | solve-lu | solve-qr-colpiv | solve-qr-fullpiv | "
                    "solve-llt | inverse | logabsdet");
  bench->add_option("--mode", mode_name, "symbolic | algorithmic | primal");
  bench->add_option("--sizes", sizes, "ascending matrix sizes")
      ->delimiter(',');
  bench->add_option("--seed", seed, "input generator seed");
  bench->add_option("--repeats", repeats, "timing repeats (median)");
  bench->add_option("--out", out_path, "CSV output path (stdout if omitted)");

  std::string suite = "all";
  CLI::App* check = app.add_subcommand(
      "check", "Run the oracle-equivalence and slope suites");
  check->add_option("--suite", suite, "oracle | slopes | all")
      ->check(CLI::IsMember({"oracle", "slopes", "all"}));
  check->add_option("--seed", seed, "input generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (bench->parsed()) {
    return run_bench_command(op_name, mode_name, sizes, seed, repeats,
                             out_path);
  }
  return run_check_command(suite, seed);
}
