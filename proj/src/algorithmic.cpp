// SPDX-License-Identifier: Apache-2.0
#include "algorithmic.hpp"

#include "errors.hpp"

namespace adla {

DenseMatrix<AdjointScalar> to_adjoint_elements(const ActiveMatrix& m) {
  DenseMatrix<AdjointScalar> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m.scalar_at(i, j);
  return out;
}

ActiveMatrix from_adjoint_elements(
    const DenseMatrix<AdjointScalar>& elements) {
  return ActiveMatrix::from_scalars(elements);
}

ActiveMatrix matmul_algorithmic(const ActiveMatrix& a, const ActiveMatrix& b) {
  return from_adjoint_elements(
      matmul(to_adjoint_elements(a), to_adjoint_elements(b)));
}

AlgorithmicSolver make_solver_algorithmic(const ActiveMatrix& a,
                                          SolverKind kind) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatchError("make_solver_algorithmic: matrix must be square");
  }
  AlgorithmicSolver solver;
  solver.kind_ = kind;
  solver.n_ = a.rows();
  const DenseMatrix<AdjointScalar> elements = to_adjoint_elements(a);
  switch (kind) {
    case SolverKind::lu:
      solver.factors_ = lu_factor(elements);
      break;
    case SolverKind::qr_col_piv:
    case SolverKind::qr_full_piv:
      solver.factors_ = qr_factor(elements, QrPivoting::column);
      break;
    case SolverKind::cholesky:
      solver.factors_ = cholesky_factor(elements);
      break;
  }
  return solver;
}

ActiveMatrix solve_algorithmic(const AlgorithmicSolver& solver,
                               const ActiveMatrix& b) {
  if (b.rows() != solver.n() || b.cols() != 1) {
    throw DimensionMismatchError("solve_algorithmic: rhs must be n x 1");
  }
  const DenseMatrix<AdjointScalar> rhs = to_adjoint_elements(b);
  return from_adjoint_elements(std::visit(
      [&](const auto& f) -> DenseMatrix<AdjointScalar> {
        if constexpr (requires { f.lu; }) return lu_solve(f, rhs);
        else if constexpr (requires { f.qr; }) return qr_solve(f, rhs);
        else return cholesky_solve(f, rhs);
      },
      solver.factors_));
}

ActiveMatrix inverse_algorithmic(const AlgorithmicSolver& solver) {
  if (solver.kind() != SolverKind::lu) {
    throw TapeStateError("inverse_algorithmic: requires an lu solver");
  }
  return from_adjoint_elements(
      inverse(std::get<LuFactors<AdjointScalar>>(solver.factors_)));
}

AdjointScalar log_abs_det_algorithmic(const AlgorithmicSolver& solver) {
  if (solver.kind() == SolverKind::cholesky) {
    throw TapeStateError("log_abs_det_algorithmic: requires a qr or lu solver");
  }
  if (const auto* qr = std::get_if<QrFactors<AdjointScalar>>(&solver.factors_)) {
    return log_abs_det(*qr);
  }
  return log_abs_det(std::get<LuFactors<AdjointScalar>>(solver.factors_));
}

}  // namespace adla
