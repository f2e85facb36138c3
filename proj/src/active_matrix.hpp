// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <variant>

#include "dense.hpp"
#include "scalar.hpp"
#include "tape.hpp"

namespace adla {

// Matrix of tape-registered scalars: passive values plus one VariableRef per
// element. The symbolic operations below compute values with the passive
// kernels and register matrix-level adjoint rules as tape callbacks instead
// of taping element arithmetic.
class ActiveMatrix {
 public:
  ActiveMatrix() = default;

  // Records one edge-free entry per element (row-major order).
  static ActiveMatrix input(Tape& tape, const Matrix& values);

  // All refs passive: participates in ops but receives no adjoints.
  static ActiveMatrix passive(const Matrix& values);

  static ActiveMatrix from_parts(Tape* tape, Matrix values,
                                 DenseMatrix<VariableRef> refs);

  // Builds a matrix from already-recorded scalars (all bound to one tape).
  static ActiveMatrix from_scalars(const DenseMatrix<AdjointScalar>& elements);

  std::size_t rows() const noexcept { return values_.rows(); }
  std::size_t cols() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  const DenseMatrix<VariableRef>& refs() const noexcept { return refs_; }
  Tape* tape() const noexcept { return tape_; }

  // Element view as a deferred-recording scalar sharing this ref.
  AdjointScalar scalar_at(std::size_t i, std::size_t j) const;

  void seed_adjoints(const Matrix& seeds) const;
  Matrix adjoints() const;  // passive elements read as 0

 private:
  Matrix values_;
  DenseMatrix<VariableRef> refs_;
  Tape* tape_ = nullptr;
};

enum class SolverKind { lu, qr_col_piv, qr_full_piv, cholesky };

const char* to_string(SolverKind kind);

namespace detail {

// Factorization retained in memory for the whole tape lifetime so the
// adjoint run can reuse it for transposed solves.
struct SolverFactors {
  std::variant<LuFactors<double>, QrFactors<double>, CholeskyFactors<double>>
      factors;

  std::size_t n() const;
  Matrix solve(const Matrix& b) const;
  Matrix solve_transposed(const Matrix& b) const;
};

}  // namespace detail

// Retained dense solver: factorizes the input eagerly and passively (the
// decomposition itself never appears on the tape) and keeps the factors
// plus the input refs for adjoint write-back.
class SymbolicSolver {
 public:
  SolverKind kind() const noexcept { return kind_; }
  std::size_t n() const noexcept { return a_refs_.rows(); }
  Tape* tape() const noexcept { return tape_; }
  const detail::SolverFactors& factors() const noexcept { return *factors_; }

 private:
  friend SymbolicSolver make_solver(const ActiveMatrix&, SolverKind);
  friend ActiveMatrix solve_symbolic(const SymbolicSolver&,
                                     const ActiveMatrix&);
  friend ActiveMatrix inverse_symbolic(const SymbolicSolver&);
  friend AdjointScalar log_abs_det_symbolic(const SymbolicSolver&);

  SolverKind kind_ = SolverKind::lu;
  std::shared_ptr<const detail::SolverFactors> factors_;
  DenseMatrix<VariableRef> a_refs_;
  Tape* tape_ = nullptr;
};

// C = A B with the adjoint rule A_adj += C_adj B^T, B_adj += A^T C_adj.
// Payload: copies of A and B (rows*cols each); tape growth stays
// quadratic in the dimensions.
ActiveMatrix matmul_symbolic(const ActiveMatrix& a, const ActiveMatrix& b);

// Factorizes A by kind (qr_full_piv uses column-pivoted Householder QR as
// well; the full-pivoting distinction changes numerics, not adjoint rules).
// Accounts the retained factors as tape payload: n^2+n scalars for LU,
// n^2+2n for QR, n^2 for Cholesky.
SymbolicSolver make_solver(const ActiveMatrix& a, SolverKind kind);

// x = A^{-1} b for a single right-hand-side column. Adjoint rule, reusing
// the retained factors: b_adj += A^{-T} x_adj, A_adj -= (A^{-T} x_adj) x^T.
// Payload beyond the solver: the solution x (n scalars).
ActiveMatrix solve_symbolic(const SymbolicSolver& solver,
                            const ActiveMatrix& b);

// C = A^{-1} (LU-backed). Adjoint rule: A_adj -= C^T C_adj C^T, evaluated
// with two passive products. Payload beyond the solver: C^T (n^2 scalars).
ActiveMatrix inverse_symbolic(const SymbolicSolver& solver);

// x = log|det(A)| (QR- or LU-backed). Adjoint rule: A_adj += x_adj A^{-T},
// computed lazily by transposed solves against identity columns when the
// seed is nonzero. No payload beyond the solver.
AdjointScalar log_abs_det_symbolic(const SymbolicSolver& solver);

namespace detail {

Matrix gather_adjoints(const Tape& tape, std::span<const VariableRef> refs,
                       std::size_t rows, std::size_t cols);
void scatter_add_adjoints(Tape& tape, std::span<const VariableRef> refs,
                          const Matrix& increments);

// Matrices registered with ActiveMatrix::input occupy one contiguous run of
// entries; callbacks detect that once at registration so the adjoint-run
// scatters can index slots directly instead of re-reading the ref table.
struct RefRun {
  bool contiguous = false;
  std::uint64_t base = 0;
};

RefRun analyze_refs(std::span<const VariableRef> refs);

}  // namespace detail

}  // namespace adla
