// SPDX-License-Identifier: Apache-2.0
#include "active_matrix.hpp"

#include <utility>

#include "errors.hpp"

namespace adla {

namespace {

Tape* resolve_tape(Tape* a, Tape* b, const char* what) {
  if (a && b && a != b) throw TapeStateError(what);
  return a ? a : b;
}

DenseMatrix<VariableRef> passive_refs(std::size_t rows, std::size_t cols) {
  return DenseMatrix<VariableRef>(rows, cols);
}

DenseMatrix<VariableRef> fresh_entries(Tape& tape, std::size_t rows,
                                       std::size_t cols) {
  DenseMatrix<VariableRef> refs(rows, cols);
  const VariableRef first = tape.record_block(rows * cols);
  std::uint64_t index = first.index;
  for (VariableRef& r : refs.data()) r = VariableRef{index++};
  return refs;
}

std::vector<VariableRef> concat_refs(const DenseMatrix<VariableRef>& a,
                                     const DenseMatrix<VariableRef>& b) {
  std::vector<VariableRef> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  return out;
}

std::vector<VariableRef> flat_refs(const DenseMatrix<VariableRef>& a) {
  return {a.data().begin(), a.data().end()};
}

}  // namespace

ActiveMatrix ActiveMatrix::input(Tape& tape, const Matrix& values) {
  ActiveMatrix m;
  m.values_ = values;
  m.refs_ = fresh_entries(tape, values.rows(), values.cols());
  m.tape_ = &tape;
  return m;
}

ActiveMatrix ActiveMatrix::passive(const Matrix& values) {
  ActiveMatrix m;
  m.values_ = values;
  m.refs_ = passive_refs(values.rows(), values.cols());
  return m;
}

ActiveMatrix ActiveMatrix::from_parts(Tape* tape, Matrix values,
                                      DenseMatrix<VariableRef> refs) {
  if (values.rows() != refs.rows() || values.cols() != refs.cols()) {
    throw DimensionMismatchError("ActiveMatrix: value/ref shapes differ");
  }
  ActiveMatrix m;
  m.values_ = std::move(values);
  m.refs_ = std::move(refs);
  m.tape_ = tape;
  return m;
}

ActiveMatrix ActiveMatrix::from_scalars(
    const DenseMatrix<AdjointScalar>& elements) {
  Matrix values(elements.rows(), elements.cols());
  DenseMatrix<VariableRef> refs(elements.rows(), elements.cols());
  Tape* tape = nullptr;
  for (std::size_t i = 0; i < elements.rows(); ++i) {
    for (std::size_t j = 0; j < elements.cols(); ++j) {
      const AdjointScalar& s = elements(i, j);
      values(i, j) = s.value();
      refs(i, j) = s.ref();
      tape = resolve_tape(tape, s.tape(),
                          "ActiveMatrix: elements bound to different tapes");
    }
  }
  return from_parts(tape, std::move(values), std::move(refs));
}

AdjointScalar ActiveMatrix::scalar_at(std::size_t i, std::size_t j) const {
  const VariableRef ref = refs_(i, j);
  if (ref.is_passive() || tape_ == nullptr) {
    return AdjointScalar(values_(i, j));
  }
  return AdjointScalar::bound(*tape_, values_(i, j), ref);
}

void ActiveMatrix::seed_adjoints(const Matrix& seeds) const {
  if (seeds.rows() != rows() || seeds.cols() != cols()) {
    throw DimensionMismatchError("seed_adjoints: shape mismatch");
  }
  if (tape_ == nullptr) {
    throw TapeStateError("seed_adjoints: passive matrix has no adjoints");
  }
  for (std::size_t i = 0; i < rows(); ++i)
    for (std::size_t j = 0; j < cols(); ++j)
      tape_->set_adjoint(refs_(i, j), seeds(i, j));
}

Matrix ActiveMatrix::adjoints() const {
  Matrix out(rows(), cols());
  if (tape_ == nullptr) return out;
  for (std::size_t i = 0; i < rows(); ++i)
    for (std::size_t j = 0; j < cols(); ++j) {
      const VariableRef ref = refs_(i, j);
      out(i, j) = ref.is_passive() ? 0.0 : tape_->adjoint(ref);
    }
  return out;
}

const char* to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::lu: return "lu";
    case SolverKind::qr_col_piv: return "qr-colpiv";
    case SolverKind::qr_full_piv: return "qr-fullpiv";
    case SolverKind::cholesky: return "cholesky";
  }
  return "?";
}

namespace detail {

Matrix gather_adjoints(const Tape& tape, std::span<const VariableRef> refs,
                       std::size_t rows, std::size_t cols) {
  const std::span<const double> slots = tape.adjoint_slots();
  Matrix out(rows, cols);
  auto it = out.data().begin();
  for (VariableRef ref : refs) {
    *it++ = ref.is_passive() ? 0.0 : slots[ref.index];
  }
  return out;
}

void scatter_add_adjoints(Tape& tape, std::span<const VariableRef> refs,
                          const Matrix& increments) {
  const std::span<double> slots = tape.adjoint_slots();
  auto it = increments.data().begin();
  for (VariableRef ref : refs) {
    const double inc = *it++;
    if (!ref.is_passive()) slots[ref.index] += inc;
  }
}

RefRun analyze_refs(std::span<const VariableRef> refs) {
  RefRun run;
  if (refs.empty() || refs.front().is_passive()) return run;
  const std::uint64_t base = refs.front().index;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].index != base + i) return run;
  }
  run.contiguous = true;
  run.base = base;
  return run;
}

namespace {

// increments may be scaled; passive refs are skipped on the generic path.
void scaled_scatter(Tape& tape, std::span<const VariableRef> refs,
                    const RefRun& run, const double* increments,
                    std::size_t count, double scale) {
  const std::span<double> slots = tape.adjoint_slots();
  if (run.contiguous) {
    double* base_slot = slots.data() + run.base;
    for (std::size_t i = 0; i < count; ++i) base_slot[i] += scale * increments[i];
    return;
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!refs[i].is_passive()) slots[refs[i].index] += scale * increments[i];
  }
}

}  // namespace

std::size_t SolverFactors::n() const {
  return std::visit(
      [](const auto& f) -> std::size_t {
        if constexpr (requires { f.lu; }) return f.lu.rows();
        else if constexpr (requires { f.qr; }) return f.qr.rows();
        else return f.l.rows();
      },
      factors);
}

Matrix SolverFactors::solve(const Matrix& b) const {
  return std::visit(
      [&](const auto& f) -> Matrix {
        if constexpr (requires { f.lu; }) return lu_solve(f, b);
        else if constexpr (requires { f.qr; }) return qr_solve(f, b);
        else return cholesky_solve(f, b);
      },
      factors);
}

Matrix SolverFactors::solve_transposed(const Matrix& b) const {
  return std::visit(
      [&](const auto& f) -> Matrix {
        if constexpr (requires { f.lu; }) return lu_solve_transposed(f, b);
        else if constexpr (requires { f.qr; }) return qr_solve_transposed(f, b);
        else return cholesky_solve_transposed(f, b);
      },
      factors);
}

}  // namespace detail

ActiveMatrix matmul_symbolic(const ActiveMatrix& a, const ActiveMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatchError("matmul_symbolic: inner dimensions differ");
  }
  Tape* tape = resolve_tape(a.tape(), b.tape(),
                            "matmul_symbolic: operands on different tapes");
  Matrix c_values = matmul(a.values(), b.values());
  if (tape == nullptr) return ActiveMatrix::passive(c_values);

  ActiveMatrix c = ActiveMatrix::from_parts(
      tape, std::move(c_values), fresh_entries(*tape, a.rows(), b.cols()));

  struct Payload {
    Matrix a;
    Matrix b;
    detail::RefRun a_run;
    detail::RefRun b_run;
  };
  const std::size_t a_size = a.rows() * a.cols();

  CallbackRecord cb;
  cb.inputs = concat_refs(a.refs(), b.refs());
  cb.outputs = flat_refs(c.refs());
  cb.payload_scalars = a.values().size() + b.values().size();
  cb.payload = std::make_shared<const Payload>(Payload{
      a.values(), b.values(),
      detail::analyze_refs(std::span<const VariableRef>(cb.inputs).first(a_size)),
      detail::analyze_refs(
          std::span<const VariableRef>(cb.inputs).subspan(a_size))});
  cb.propagate = [a_size](const std::shared_ptr<const void>& p,
                          std::span<const VariableRef> inputs,
                          std::span<const VariableRef> outputs, Tape& t) {
    const auto& pay = *static_cast<const Payload*>(p.get());
    const Matrix c_adj = detail::gather_adjoints(t, outputs, pay.a.rows(),
                                                 pay.b.cols());
    const Matrix a_adj = matmul(c_adj, transpose(pay.b));
    const Matrix b_adj = matmul(transpose(pay.a), c_adj);
    detail::scaled_scatter(t, inputs.first(a_size), pay.a_run,
                           a_adj.data().data(), a_adj.size(), 1.0);
    detail::scaled_scatter(t, inputs.subspan(a_size), pay.b_run,
                           b_adj.data().data(), b_adj.size(), 1.0);
  };
  tape->register_callback(std::move(cb));
  return c;
}

SymbolicSolver make_solver(const ActiveMatrix& a, SolverKind kind) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatchError("make_solver: matrix must be square");
  }
  const std::size_t n = a.rows();
  detail::SolverFactors factors;
  std::uint64_t payload = 0;
  switch (kind) {
    case SolverKind::lu:
      factors.factors = lu_factor(a.values());
      payload = static_cast<std::uint64_t>(n * n + n);
      break;
    case SolverKind::qr_col_piv:
    case SolverKind::qr_full_piv:
      factors.factors = qr_factor(a.values(), QrPivoting::column);
      payload = static_cast<std::uint64_t>(n * n + 2 * n);
      break;
    case SolverKind::cholesky:
      factors.factors = cholesky_factor(a.values());
      payload = static_cast<std::uint64_t>(n * n);
      break;
  }
  SymbolicSolver solver;
  solver.kind_ = kind;
  solver.factors_ =
      std::make_shared<const detail::SolverFactors>(std::move(factors));
  solver.a_refs_ = a.refs();
  solver.tape_ = a.tape();
  if (solver.tape_ != nullptr) solver.tape_->add_payload_scalars(payload);
  return solver;
}

ActiveMatrix solve_symbolic(const SymbolicSolver& solver,
                            const ActiveMatrix& b) {
  const std::size_t n = solver.n();
  if (b.rows() != n || b.cols() != 1) {
    throw DimensionMismatchError("solve_symbolic: rhs must be n x 1");
  }
  Tape* tape = resolve_tape(solver.tape(), b.tape(),
                            "solve_symbolic: operands on different tapes");
  Matrix x_values = solver.factors().solve(b.values());
  if (tape == nullptr) return ActiveMatrix::passive(x_values);

  struct Payload {
    std::shared_ptr<const detail::SolverFactors> factors;
    Matrix x;
    detail::RefRun a_run;
  };
  auto payload = std::make_shared<const Payload>(Payload{
      solver.factors_, x_values,
      detail::analyze_refs(solver.a_refs_.data())});

  ActiveMatrix x = ActiveMatrix::from_parts(tape, std::move(x_values),
                                            fresh_entries(*tape, n, 1));
  const std::size_t a_size = n * n;

  CallbackRecord cb;
  cb.payload = payload;
  cb.inputs = concat_refs(solver.a_refs_, b.refs());
  cb.outputs = flat_refs(x.refs());
  cb.payload_scalars = static_cast<std::uint64_t>(n);
  cb.propagate = [a_size](const std::shared_ptr<const void>& p,
                          std::span<const VariableRef> inputs,
                          std::span<const VariableRef> outputs, Tape& t) {
    const auto& pay = *static_cast<const Payload*>(p.get());
    const std::size_t n_ = pay.x.rows();
    const Matrix x_adj = detail::gather_adjoints(t, outputs, n_, 1);
    // b_adj solves the transposed system against the seed.
    const Matrix b_adj = pay.factors->solve_transposed(x_adj);
    detail::scatter_add_adjoints(t, inputs.subspan(a_size), b_adj);
    // A_adj -= b_adj x^T, scattered as it is formed.
    const std::span<double> slots = t.adjoint_slots();
    const std::span<const VariableRef> a_refs = inputs.first(a_size);
    for (std::size_t i = 0; i < n_; ++i) {
      const double bi = b_adj(i, 0);
      if (pay.a_run.contiguous) {
        double* row = slots.data() + pay.a_run.base + i * n_;
        for (std::size_t j = 0; j < n_; ++j) row[j] -= bi * pay.x(j, 0);
      } else {
        for (std::size_t j = 0; j < n_; ++j) {
          const VariableRef ref = a_refs[i * n_ + j];
          if (!ref.is_passive()) slots[ref.index] -= bi * pay.x(j, 0);
        }
      }
    }
  };
  tape->register_callback(std::move(cb));
  return x;
}

ActiveMatrix inverse_symbolic(const SymbolicSolver& solver) {
  if (solver.kind() != SolverKind::lu) {
    throw TapeStateError("inverse_symbolic: requires an lu solver");
  }
  const std::size_t n = solver.n();
  const auto& lu = std::get<LuFactors<double>>(solver.factors().factors);
  Matrix c_values = inverse(lu);
  Tape* tape = solver.tape();
  if (tape == nullptr) return ActiveMatrix::passive(c_values);

  struct Payload {
    Matrix c_transposed;
    detail::RefRun a_run;
  };
  auto payload = std::make_shared<const Payload>(Payload{
      transpose(c_values), detail::analyze_refs(solver.a_refs_.data())});

  ActiveMatrix c = ActiveMatrix::from_parts(tape, std::move(c_values),
                                            fresh_entries(*tape, n, n));
  CallbackRecord cb;
  cb.payload = payload;
  cb.inputs = flat_refs(solver.a_refs_);
  cb.outputs = flat_refs(c.refs());
  cb.payload_scalars = static_cast<std::uint64_t>(n * n);
  cb.propagate = [](const std::shared_ptr<const void>& p,
                    std::span<const VariableRef> inputs,
                    std::span<const VariableRef> outputs, Tape& t) {
    const auto& pay = *static_cast<const Payload*>(p.get());
    const std::size_t n_ = pay.c_transposed.rows();
    const Matrix c_adj = detail::gather_adjoints(t, outputs, n_, n_);
    // A_adj -= C^T C_adj C^T.
    const Matrix a_adj =
        matmul(matmul(pay.c_transposed, c_adj), pay.c_transposed);
    detail::scaled_scatter(t, inputs, pay.a_run, a_adj.data().data(),
                           a_adj.size(), -1.0);
  };
  tape->register_callback(std::move(cb));
  return c;
}

AdjointScalar log_abs_det_symbolic(const SymbolicSolver& solver) {
  if (solver.kind() == SolverKind::cholesky) {
    throw TapeStateError("log_abs_det_symbolic: requires a qr or lu solver");
  }
  double value = 0.0;
  if (const auto* qr =
          std::get_if<QrFactors<double>>(&solver.factors().factors)) {
    value = log_abs_det(*qr);
  } else {
    value = log_abs_det(std::get<LuFactors<double>>(solver.factors().factors));
  }
  Tape* tape = solver.tape();
  if (tape == nullptr) return AdjointScalar(value);

  const VariableRef out = tape->record({});

  struct Payload {
    std::shared_ptr<const detail::SolverFactors> factors;
    detail::RefRun a_run;
  };
  auto payload = std::make_shared<const Payload>(Payload{
      solver.factors_, detail::analyze_refs(solver.a_refs_.data())});

  CallbackRecord cb;
  cb.payload = payload;
  cb.inputs = flat_refs(solver.a_refs_);
  cb.outputs = {out};
  cb.payload_scalars = 0;  // nothing beyond the retained solver
  cb.propagate = [](const std::shared_ptr<const void>& p,
                    std::span<const VariableRef> inputs,
                    std::span<const VariableRef> outputs, Tape& t) {
    const auto& pay = *static_cast<const Payload*>(p.get());
    const double x_adj = t.adjoint(outputs[0]);
    if (x_adj == 0.0) return;  // A_adj scales A^{-T}; skip for a zero seed
    const std::size_t n_ = pay.factors->n();
    const Matrix a_inv_t =
        pay.factors->solve_transposed(Matrix::identity(n_));
    detail::scaled_scatter(t, inputs, pay.a_run, a_inv_t.data().data(),
                           a_inv_t.size(), x_adj);
  };
  tape->register_callback(std::move(cb));
  return AdjointScalar::bound(*tape, value, out);
}

}  // namespace adla
