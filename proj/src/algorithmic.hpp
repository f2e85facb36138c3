// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <variant>

#include "active_matrix.hpp"

namespace adla {

// Plain-overloading counterparts of the symbolic operations: the same
// dense kernels instantiated with AdjointScalar, so every scalar operation
// lands on the tape. These are the baseline the symbolic rules are checked
// and measured against.

DenseMatrix<AdjointScalar> to_adjoint_elements(const ActiveMatrix& m);
ActiveMatrix from_adjoint_elements(const DenseMatrix<AdjointScalar>& elements);

ActiveMatrix matmul_algorithmic(const ActiveMatrix& a, const ActiveMatrix& b);

class AlgorithmicSolver {
 public:
  SolverKind kind() const noexcept { return kind_; }
  std::size_t n() const noexcept { return n_; }

 private:
  friend AlgorithmicSolver make_solver_algorithmic(const ActiveMatrix&,
                                                   SolverKind);
  friend ActiveMatrix solve_algorithmic(const AlgorithmicSolver&,
                                        const ActiveMatrix&);
  friend ActiveMatrix inverse_algorithmic(const AlgorithmicSolver&);
  friend AdjointScalar log_abs_det_algorithmic(const AlgorithmicSolver&);

  SolverKind kind_ = SolverKind::lu;
  std::size_t n_ = 0;
  std::variant<LuFactors<AdjointScalar>, QrFactors<AdjointScalar>,
               CholeskyFactors<AdjointScalar>>
      factors_;
};

AlgorithmicSolver make_solver_algorithmic(const ActiveMatrix& a,
                                          SolverKind kind);
ActiveMatrix solve_algorithmic(const AlgorithmicSolver& solver,
                               const ActiveMatrix& b);
ActiveMatrix inverse_algorithmic(const AlgorithmicSolver& solver);
AdjointScalar log_abs_det_algorithmic(const AlgorithmicSolver& solver);

}  // namespace adla
