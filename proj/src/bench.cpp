// SPDX-License-Identifier: Apache-2.0
#include "bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "active_matrix.hpp"
#include "algorithmic.hpp"
#include "errors.hpp"

namespace adla {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

volatile double g_sink = 0.0;  // keeps primal results observable

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t k = xs.size();
  return k % 2 == 1 ? xs[k / 2] : 0.5 * (xs[k / 2 - 1] + xs[k / 2]);
}

Matrix ones(std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = 1.0;
  return m;
}

SolverKind solver_kind_for(BenchOp op) {
  switch (op) {
    case BenchOp::solve_lu: return SolverKind::lu;
    case BenchOp::solve_qr_colpiv: return SolverKind::qr_col_piv;
    case BenchOp::solve_qr_fullpiv: return SolverKind::qr_full_piv;
    case BenchOp::solve_llt: return SolverKind::cholesky;
    case BenchOp::inverse: return SolverKind::lu;
    case BenchOp::logabsdet: return SolverKind::qr_full_piv;
    default: return SolverKind::lu;
  }
}

bool is_solve(BenchOp op) {
  return op == BenchOp::solve_lu || op == BenchOp::solve_qr_colpiv ||
         op == BenchOp::solve_qr_fullpiv || op == BenchOp::solve_llt;
}

struct BenchInputs {
  Matrix a;
  Matrix b;  // second factor (matmul) or right-hand side (solves)
};

// Draws inputs and discards singular samples, continuing on the same
// stream.
BenchInputs generate_inputs(BenchOp op, Rng& rng, std::size_t n) {
  constexpr int kMaxAttempts = 32;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    BenchInputs in;
    if (op == BenchOp::matmul) {
      in.a = random_uniform_matrix(rng, n, n);
      in.b = random_uniform_matrix(rng, n, n);
      return in;
    }
    in.a = op == BenchOp::solve_llt ? random_spd_matrix(rng, n)
                                    : random_uniform_matrix(rng, n, n);
    if (is_solve(op)) in.b = random_uniform_matrix(rng, n, 1);
    try {
      switch (solver_kind_for(op)) {
        case SolverKind::lu:
          lu_factor(in.a);
          break;
        case SolverKind::qr_col_piv:
        case SolverKind::qr_full_piv:
          qr_factor(in.a, QrPivoting::column);
          break;
        case SolverKind::cholesky:
          cholesky_factor(in.a);
          break;
      }
      return in;
    } catch (const SingularMatrixError&) {
    } catch (const NotPositiveDefiniteError&) {
    }
  }
  throw SingularMatrixError("bench: no nonsingular sample after retries");
}

void run_primal(BenchOp op, const BenchInputs& in) {
  switch (op) {
    case BenchOp::matmul: {
      const Matrix c = matmul(in.a, in.b);
      g_sink = c(0, 0);
      return;
    }
    case BenchOp::solve_lu: {
      const Matrix x = lu_solve(lu_factor(in.a), in.b);
      g_sink = x(0, 0);
      return;
    }
    case BenchOp::solve_qr_colpiv:
    case BenchOp::solve_qr_fullpiv: {
      const Matrix x = qr_solve(qr_factor(in.a, QrPivoting::column), in.b);
      g_sink = x(0, 0);
      return;
    }
    case BenchOp::solve_llt: {
      const Matrix x = cholesky_solve(cholesky_factor(in.a), in.b);
      g_sink = x(0, 0);
      return;
    }
    case BenchOp::inverse: {
      const Matrix c = inverse(lu_factor(in.a));
      g_sink = c(0, 0);
      return;
    }
    case BenchOp::logabsdet: {
      g_sink = log_abs_det(qr_factor(in.a, QrPivoting::column));
      return;
    }
  }
}

// Runs the augmented primal for one op and returns the output seeder.
std::function<void()> run_symbolic(Tape& tape, BenchOp op,
                                   const BenchInputs& in) {
  if (op == BenchOp::matmul) {
    const ActiveMatrix a = ActiveMatrix::input(tape, in.a);
    const ActiveMatrix b = ActiveMatrix::input(tape, in.b);
    ActiveMatrix c = matmul_symbolic(a, b);
    return [c] { c.seed_adjoints(ones(c.rows(), c.cols())); };
  }
  const ActiveMatrix a = ActiveMatrix::input(tape, in.a);
  const SymbolicSolver solver = make_solver(a, solver_kind_for(op));
  if (is_solve(op)) {
    const ActiveMatrix b = ActiveMatrix::input(tape, in.b);
    ActiveMatrix x = solve_symbolic(solver, b);
    return [x] { x.seed_adjoints(ones(x.rows(), 1)); };
  }
  if (op == BenchOp::inverse) {
    ActiveMatrix c = inverse_symbolic(solver);
    return [c] { c.seed_adjoints(ones(c.rows(), c.cols())); };
  }
  AdjointScalar x = log_abs_det_symbolic(solver);
  Tape* t = &tape;
  return [t, x] { t->set_adjoint(x.ref(), 1.0); };
}

std::function<void()> run_algorithmic(Tape& tape, BenchOp op,
                                      const BenchInputs& in) {
  if (op == BenchOp::matmul) {
    const ActiveMatrix a = ActiveMatrix::input(tape, in.a);
    const ActiveMatrix b = ActiveMatrix::input(tape, in.b);
    ActiveMatrix c = matmul_algorithmic(a, b);
    return [c] { c.seed_adjoints(ones(c.rows(), c.cols())); };
  }
  const ActiveMatrix a = ActiveMatrix::input(tape, in.a);
  const AlgorithmicSolver solver =
      make_solver_algorithmic(a, solver_kind_for(op));
  if (is_solve(op)) {
    const ActiveMatrix b = ActiveMatrix::input(tape, in.b);
    ActiveMatrix x = solve_algorithmic(solver, b);
    return [x] { x.seed_adjoints(ones(x.rows(), 1)); };
  }
  if (op == BenchOp::inverse) {
    ActiveMatrix c = inverse_algorithmic(solver);
    return [c] { c.seed_adjoints(ones(c.rows(), c.cols())); };
  }
  AdjointScalar x = log_abs_det_algorithmic(solver);
  Tape* t = &tape;
  return [t, x] { t->set_adjoint(x.ref(), 1.0); };
}

struct SingleRun {
  double t_primal = 0.0;
  double t_adjoint = 0.0;
  TapeStats stats;
};

SingleRun run_once(BenchOp op, BenchMode mode, const BenchInputs& in) {
  SingleRun out;
  if (mode == BenchMode::primal) {
    const auto t0 = Clock::now();
    run_primal(op, in);
    out.t_primal = seconds_between(t0, Clock::now());
    return out;
  }
  Tape tape;
  const auto t0 = Clock::now();
  const std::function<void()> seed = mode == BenchMode::symbolic
                                         ? run_symbolic(tape, op, in)
                                         : run_algorithmic(tape, op, in);
  const auto t1 = Clock::now();
  out.t_primal = seconds_between(t0, t1);
  out.stats = tape.stats();
  seed();
  const auto t2 = Clock::now();
  tape.interpret_reverse();
  out.t_adjoint = seconds_between(t2, Clock::now());
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

const char* to_string(BenchOp op) {
  switch (op) {
    case BenchOp::matmul: return "matmul";
    case BenchOp::solve_lu: return "solve-lu";
    case BenchOp::solve_qr_colpiv: return "solve-qr-colpiv";
    case BenchOp::solve_qr_fullpiv: return "solve-qr-fullpiv";
    case BenchOp::solve_llt: return "solve-llt";
    case BenchOp::inverse: return "inverse";
    case BenchOp::logabsdet: return "logabsdet";
  }
  return "?";
}

const char* to_string(BenchMode mode) {
  switch (mode) {
    case BenchMode::symbolic: return "symbolic";
    case BenchMode::algorithmic: return "algorithmic";
    case BenchMode::primal: return "primal";
  }
  return "?";
}

std::optional<BenchOp> parse_bench_op(std::string_view name) {
  for (BenchOp op : {BenchOp::matmul, BenchOp::solve_lu,
                     BenchOp::solve_qr_colpiv, BenchOp::solve_qr_fullpiv,
                     BenchOp::solve_llt, BenchOp::inverse, BenchOp::logabsdet}) {
    if (name == to_string(op)) return op;
  }
  return std::nullopt;
}

std::optional<BenchMode> parse_bench_mode(std::string_view name) {
  for (BenchMode mode :
       {BenchMode::symbolic, BenchMode::algorithmic, BenchMode::primal}) {
    if (name == to_string(mode)) return mode;
  }
  return std::nullopt;
}

Matrix random_uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  rng.fill_uniform(m.data());
  return m;
}

Matrix random_spd_matrix(Rng& rng, std::size_t n) {
  const Matrix m = random_uniform_matrix(rng, n, n);
  Matrix spd = matmul(transpose(m), m);
  for (std::size_t i = 0; i < n; ++i) spd(i, i) += static_cast<double>(n);
  return spd;
}

Matrix random_well_conditioned_matrix(Rng& rng, std::size_t n) {
  constexpr int kMaxAttempts = 64;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Matrix a = random_uniform_matrix(rng, n, n);
    try {
      const LuFactors<double> f = lu_factor(a);
      double lo = std::abs(f.lu(0, 0));
      double hi = lo;
      for (std::size_t i = 1; i < n; ++i) {
        const double d = std::abs(f.lu(i, i));
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
      if (lo >= 0.05 * hi) return a;
    } catch (const SingularMatrixError&) {
    }
  }
  throw SingularMatrixError("no well-conditioned sample after retries");
}

Rng bench_rng(std::uint64_t seed, BenchOp op, std::uint64_t n) {
  std::uint64_t s = seed;
  const std::uint64_t base = splitmix64_next(s);
  const std::uint64_t key =
      (static_cast<std::uint64_t>(op) + 1) * 0x9e3779b97f4a7c15ull ^
      n * 0xbf58476d1ce4e5b9ull;
  return Rng(base ^ key);
}

std::vector<BenchRecord> run_bench(const BenchConfig& cfg) {
  if (cfg.sizes.empty()) {
    throw std::invalid_argument("bench: size list must not be empty");
  }
  if (!std::is_sorted(cfg.sizes.begin(), cfg.sizes.end())) {
    throw std::invalid_argument("bench: sizes must be ascending");
  }
  if (cfg.repeats < 1) {
    throw std::invalid_argument("bench: repeats must be at least 1");
  }
  std::vector<BenchRecord> records;
  records.reserve(cfg.sizes.size());
  for (const std::uint64_t n : cfg.sizes) {
    Rng rng = bench_rng(cfg.seed, cfg.op, n);
    const BenchInputs in =
        generate_inputs(cfg.op, rng, static_cast<std::size_t>(n));

    if (cfg.repeats > 1) run_once(cfg.op, cfg.mode, in);  // warmup
    std::vector<double> primal_times, adjoint_times;
    TapeStats stats;
    for (std::uint32_t r = 0; r < cfg.repeats; ++r) {
      const SingleRun run = run_once(cfg.op, cfg.mode, in);
      primal_times.push_back(run.t_primal);
      adjoint_times.push_back(run.t_adjoint);
      if (r == 0) stats = run.stats;
    }

    BenchRecord rec;
    rec.op = to_string(cfg.op);
    rec.mode = to_string(cfg.mode);
    rec.n = n;
    rec.tape_entries = stats.num_entries;
    rec.tape_edges = stats.num_edges;
    rec.tape_payload_scalars = stats.num_callback_payload_scalars;
    rec.tape_bytes = stats.estimated_bytes;
    rec.t_primal_s = median(primal_times);
    rec.t_adjoint_s = median(adjoint_times);
    rec.t_total_s = rec.t_primal_s + rec.t_adjoint_s;
    records.push_back(std::move(rec));
  }
  return records;
}

std::optional<BenchField> parse_bench_field(std::string_view name) {
  if (name == "tape_entries") return BenchField::tape_entries;
  if (name == "tape_edges") return BenchField::tape_edges;
  if (name == "tape_payload_scalars") return BenchField::tape_payload_scalars;
  if (name == "tape_bytes") return BenchField::tape_bytes;
  if (name == "t_primal_s") return BenchField::t_primal_s;
  if (name == "t_adjoint_s") return BenchField::t_adjoint_s;
  if (name == "t_total_s") return BenchField::t_total_s;
  return std::nullopt;
}

double bench_field_value(const BenchRecord& r, BenchField field) {
  switch (field) {
    case BenchField::tape_entries: return static_cast<double>(r.tape_entries);
    case BenchField::tape_edges: return static_cast<double>(r.tape_edges);
    case BenchField::tape_payload_scalars:
      return static_cast<double>(r.tape_payload_scalars);
    case BenchField::tape_bytes: return static_cast<double>(r.tape_bytes);
    case BenchField::t_primal_s: return r.t_primal_s;
    case BenchField::t_adjoint_s: return r.t_adjoint_s;
    case BenchField::t_total_s: return r.t_total_s;
  }
  return 0.0;
}

double fit_loglog_slope(std::span<const BenchRecord> records,
                        BenchField field) {
  std::vector<std::pair<double, double>> pts;
  for (const BenchRecord& r : records) {
    const double y = bench_field_value(r, field);
    if (y > 0.0 && r.n > 0) {
      pts.emplace_back(std::log(static_cast<double>(r.n)), std::log(y));
    }
  }
  if (pts.size() < 3) {
    throw std::invalid_argument(
        "fit_loglog_slope: need at least 3 sizes with positive values");
  }
  std::sort(pts.begin(), pts.end());
  const std::size_t keep = (pts.size() + 1) / 2;  // largest half
  const std::size_t first = pts.size() - keep;
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = first; i < pts.size(); ++i) {
    mean_x += pts[i].first;
    mean_y += pts[i].second;
  }
  mean_x /= static_cast<double>(keep);
  mean_y /= static_cast<double>(keep);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = first; i < pts.size(); ++i) {
    sxy += (pts[i].first - mean_x) * (pts[i].second - mean_y);
    sxx += (pts[i].first - mean_x) * (pts[i].first - mean_x);
  }
  return sxy / sxx;
}

std::vector<FactorPoint> runtime_factors(
    std::span<const BenchRecord> symbolic,
    std::span<const BenchRecord> primal) {
  std::vector<FactorPoint> out;
  for (const BenchRecord& s : symbolic) {
    for (const BenchRecord& p : primal) {
      if (p.n != s.n) continue;
      if (p.t_total_s < kTimerReliableSeconds) break;  // unreliable size
      out.push_back({s.n, s.t_total_s / p.t_total_s});
      break;
    }
  }
  std::sort(out.begin(), out.end(),
            [](const FactorPoint& a, const FactorPoint& b) { return a.n < b.n; });
  return out;
}

std::vector<FactorPoint> factor_report(const BenchConfig& cfg) {
  // Ratio estimation needs longer windows than single runs give: scheduler
  // bursts on a loaded host dwarf a few-millisecond evaluation. Each sample
  // therefore times a batch sized to kFactorWindowSeconds and the modes
  // alternate window by window, so bursts and drift land on both sides of
  // the ratio.
  constexpr double kFactorWindowSeconds = 0.25;
  constexpr std::uint32_t kFactorWindows = 5;

  std::vector<FactorPoint> out;
  for (const std::uint64_t n : cfg.sizes) {
    Rng rng = bench_rng(cfg.seed, cfg.op, n);
    const BenchInputs in =
        generate_inputs(cfg.op, rng, static_cast<std::size_t>(n));

    const auto run_window = [&](BenchMode mode, std::uint32_t inner) {
      const auto t0 = Clock::now();
      for (std::uint32_t i = 0; i < inner; ++i) run_once(cfg.op, mode, in);
      return seconds_between(t0, Clock::now()) / inner;
    };

    const double sym_single = run_window(BenchMode::symbolic, 1);  // warmup
    const double pri_single = run_window(BenchMode::primal, 1);
    const auto window_size = [&](double single) {
      return static_cast<std::uint32_t>(
          std::clamp(kFactorWindowSeconds / std::max(single, 1e-9), 1.0,
                     65536.0));
    };
    const std::uint32_t sym_inner = window_size(sym_single);
    const std::uint32_t pri_inner = window_size(pri_single);

    std::vector<double> sym_times, pri_times;
    for (std::uint32_t w = 0; w < kFactorWindows; ++w) {
      sym_times.push_back(run_window(BenchMode::symbolic, sym_inner));
      pri_times.push_back(run_window(BenchMode::primal, pri_inner));
    }
    const double pri_med = median(pri_times);
    if (pri_med < kTimerReliableSeconds) continue;
    out.push_back({n, median(sym_times) / pri_med});
  }
  return out;
}

void write_csv(std::ostream& out, std::span<const BenchRecord> records) {
  out << kCsvHeader << '\n';
  for (const BenchRecord& r : records) {
    out << r.op << ',' << r.mode << ',' << r.n << ',' << r.tape_entries << ','
        << r.tape_edges << ',' << r.tape_payload_scalars << ',' << r.tape_bytes
        << ',' << format_double(r.t_primal_s) << ','
        << format_double(r.t_adjoint_s) << ',' << format_double(r.t_total_s)
        << '\n';
  }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("csv: malformed integer field");
  }
  return v;
}

double parse_f64(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("csv: malformed float field");
  }
  return v;
}

}  // namespace

std::vector<BenchRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::invalid_argument("csv: missing or unexpected header row");
  }
  std::vector<BenchRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 10) {
      throw std::invalid_argument("csv: expected 10 fields per row");
    }
    BenchRecord r;
    r.op = std::string(fields[0]);
    r.mode = std::string(fields[1]);
    r.n = parse_u64(fields[2]);
    r.tape_entries = parse_u64(fields[3]);
    r.tape_edges = parse_u64(fields[4]);
    r.tape_payload_scalars = parse_u64(fields[5]);
    r.tape_bytes = parse_u64(fields[6]);
    r.t_primal_s = parse_f64(fields[7]);
    r.t_adjoint_s = parse_f64(fields[8]);
    r.t_total_s = parse_f64(fields[9]);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace adla
