// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dense.hpp"
#include "rng.hpp"

namespace adla {

enum class BenchOp {
  matmul,
  solve_lu,
  solve_qr_colpiv,
  solve_qr_fullpiv,
  solve_llt,
  inverse,
  logabsdet,
};

enum class BenchMode { symbolic, algorithmic, primal };

const char* to_string(BenchOp op);
const char* to_string(BenchMode mode);
std::optional<BenchOp> parse_bench_op(std::string_view name);
std::optional<BenchMode> parse_bench_mode(std::string_view name);

struct BenchConfig {
  BenchOp op = BenchOp::matmul;
  BenchMode mode = BenchMode::symbolic;
  std::vector<std::uint64_t> sizes = {16, 32, 64, 128, 256};
  std::uint64_t seed = 42;
  std::uint32_t repeats = 5;
};

// One measurement row. Timings are medians over the configured repeats;
// tape counters are identical across repeats and all zero in primal mode.
struct BenchRecord {
  std::string op;
  std::string mode;
  std::uint64_t n = 0;
  std::uint64_t tape_entries = 0;
  std::uint64_t tape_edges = 0;
  std::uint64_t tape_payload_scalars = 0;
  std::uint64_t tape_bytes = 0;
  double t_primal_s = 0.0;
  double t_adjoint_s = 0.0;
  double t_total_s = 0.0;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

// Input generators shared by the bench runner and the verification suites.
Matrix random_uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols);
// M^T M + n I with M uniform in [-1,1).
Matrix random_spd_matrix(Rng& rng, std::size_t n);
// Uniform draw redrawn until the LU pivot ratio min|u_ii| / max|u_ii|
// stays above 0.05.
Matrix random_well_conditioned_matrix(Rng& rng, std::size_t n);

// Derives the per-run generator stream from (seed, op, n), so records
// depend only on those three values and not on the rest of the size list.
Rng bench_rng(std::uint64_t seed, BenchOp op, std::uint64_t n);

// Runs cfg.op in cfg.mode for each size: generates seeded inputs, runs the
// augmented primal (timed), seeds all output adjoints to 1, interprets
// (timed), and reports median timings plus tape counters. Singular draws
// are resampled from the same stream (bounded retries).
std::vector<BenchRecord> run_bench(const BenchConfig& cfg);

enum class BenchField { tape_entries, tape_edges, tape_payload_scalars,
                        tape_bytes, t_primal_s, t_adjoint_s, t_total_s };

std::optional<BenchField> parse_bench_field(std::string_view name);
double bench_field_value(const BenchRecord& r, BenchField field);

// Least-squares slope of log(field) against log(n), fitted over the largest
// half of the sizes (the asymptotic regime). Records with nonpositive field
// values are excluded; fewer than three remaining points is an error.
double fit_loglog_slope(std::span<const BenchRecord> records, BenchField field);

struct FactorPoint {
  std::uint64_t n = 0;
  double factor = 0.0;
};

// Ratio t_total(symbolic)/t_total(primal) per matching n. Sizes whose
// primal time falls below the timer-reliability floor are excluded.
std::vector<FactorPoint> runtime_factors(std::span<const BenchRecord> symbolic,
                                         std::span<const BenchRecord> primal);

// Runs cfg.op in symbolic and primal mode and returns the factors.
std::vector<FactorPoint> factor_report(const BenchConfig& cfg);

// CSV with a fixed header and column order; floats in shortest
// round-trip decimal form.
void write_csv(std::ostream& out, std::span<const BenchRecord> records);
std::vector<BenchRecord> read_csv(std::istream& in);

inline constexpr std::string_view kCsvHeader =
    "op,mode,n,tape_entries,tape_edges,tape_payload_scalars,tape_bytes,"
    "t_primal_s,t_adjoint_s,t_total_s";

// Below this many seconds a primal median is treated as unresolvable.
inline constexpr double kTimerReliableSeconds = 1e-7;

}  // namespace adla
