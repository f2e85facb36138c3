// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "scalar.hpp"

namespace adla {

// Dense row-major matrix over any scalar kind (passive double, adjoint
// scalars, tangent scalars). Instantiated with an active scalar type the
// kernels below become the plain-overloading differentiation baseline.
template <class S>
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<S> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionMismatchError("matrix data length must be rows*cols");
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = S(1.0);
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  S& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const S& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<S> data() noexcept { return {data_.data(), data_.size()}; }
  std::span<const S> data() const noexcept {
    return {data_.data(), data_.size()};
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<S> data_;
};

using Matrix = DenseMatrix<double>;

template <class S>
double max_abs_value(const DenseMatrix<S>& a) {
  double m = 0.0;
  for (const S& x : a.data()) m = std::max(m, std::abs(value_of(x)));
  return m;
}

template <class S>
DenseMatrix<S> transpose(const DenseMatrix<S>& a) {
  DenseMatrix<S> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

template <class S>
DenseMatrix<S> matmul(const DenseMatrix<S>& a, const DenseMatrix<S>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatchError("matmul: inner dimensions differ");
  }
  DenseMatrix<S> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k)
        c(i, j) += a(i, k) * b(k, j);
  return c;
}

// ---------------------------------------------------------------------------
// LU with partial (row) pivoting.
// ---------------------------------------------------------------------------

// Unit-lower L below the diagonal, U on and above; pivots[k] is the row
// swapped with row k at step k; sign tracks the permutation parity.
template <class S>
struct LuFactors {
  DenseMatrix<S> lu;
  std::vector<std::size_t> pivots;
  int sign = 1;
};

namespace detail {

inline constexpr double kSingularRelTol = 1e-12;

template <class S>
void swap_rows(DenseMatrix<S>& m, std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t j = 0; j < m.cols(); ++j) std::swap(m(a, j), m(b, j));
}

inline void require_square(std::size_t rows, std::size_t cols,
                           const char* what) {
  if (rows != cols) throw DimensionMismatchError(what);
}

inline void require_conforming_rhs(std::size_t n, std::size_t rhs_rows,
                                   const char* what) {
  if (rhs_rows != n) throw DimensionMismatchError(what);
}

}  // namespace detail

template <class S>
LuFactors<S> lu_factor(DenseMatrix<S> a) {
  detail::require_square(a.rows(), a.cols(), "lu_factor: matrix must be square");
  const std::size_t n = a.rows();
  const double threshold = detail::kSingularRelTol * max_abs_value(a);
  if (n > 0 && threshold == 0.0) {
    throw SingularMatrixError("lu_factor: zero matrix");
  }
  LuFactors<S> f{std::move(a), std::vector<std::size_t>(n), 1};
  DenseMatrix<S>& lu = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot_row = k;
    double pivot_mag = std::abs(value_of(lu(k, k)));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double mag = std::abs(value_of(lu(i, k)));
      if (mag > pivot_mag) {
        pivot_mag = mag;
        pivot_row = i;
      }
    }
    if (pivot_mag < threshold) {
      throw SingularMatrixError("lu_factor: pivot below singularity threshold");
    }
    f.pivots[k] = pivot_row;
    if (pivot_row != k) {
      detail::swap_rows(lu, k, pivot_row);
      f.sign = -f.sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      lu(i, k) /= lu(k, k);
      for (std::size_t j = k + 1; j < n; ++j) {
        lu(i, j) -= lu(i, k) * lu(k, j);
      }
    }
  }
  return f;
}

// Solves A X = B for all columns of B, reusing the factors.
template <class S>
DenseMatrix<S> lu_solve(const LuFactors<S>& f, const DenseMatrix<S>& b) {
  const std::size_t n = f.lu.rows();
  detail::require_conforming_rhs(n, b.rows(), "lu_solve: rhs rows != n");
  DenseMatrix<S> x = b;
  for (std::size_t k = 0; k < n; ++k) detail::swap_rows(x, k, f.pivots[k]);
  const std::size_t m = x.cols();
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x(i, c) -= f.lu(i, j) * x(j, c);
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x(i, c) -= f.lu(i, j) * x(j, c);
      x(i, c) /= f.lu(i, i);
    }
  }
  return x;
}

// Solves A^T X = B with the same factors: U^T then L^T, then the row
// permutation applied in reverse. The substitutions are written in
// right-looking form so they stream rows of the packed factors.
template <class S>
DenseMatrix<S> lu_solve_transposed(const LuFactors<S>& f,
                                   const DenseMatrix<S>& b) {
  const std::size_t n = f.lu.rows();
  detail::require_conforming_rhs(n, b.rows(), "lu_solve_transposed: rhs rows != n");
  DenseMatrix<S> x = b;
  const std::size_t m = x.cols();
  for (std::size_t c = 0; c < m; ++c) {
    // U^T y = b: after y(j) is final, push it through row j of U.
    for (std::size_t j = 0; j < n; ++j) {
      x(j, c) /= f.lu(j, j);
      for (std::size_t k = j + 1; k < n; ++k) x(k, c) -= f.lu(j, k) * x(j, c);
    }
    // L^T w = y with a unit diagonal, pushing row j of L upward.
    for (std::size_t j = n; j-- > 0;) {
      for (std::size_t k = 0; k < j; ++k) x(k, c) -= f.lu(j, k) * x(j, c);
    }
  }
  for (std::size_t k = n; k-- > 0;) detail::swap_rows(x, k, f.pivots[k]);
  return x;
}

template <class S>
DenseMatrix<S> inverse(const LuFactors<S>& f) {
  return lu_solve(f, DenseMatrix<S>::identity(f.lu.rows()));
}

template <class S>
S log_abs_det(const LuFactors<S>& f) {
  using std::abs;
  using std::log;
  S acc(0.0);
  for (std::size_t i = 0; i < f.lu.rows(); ++i) {
    if (value_of(f.lu(i, i)) == 0.0) {
      throw SingularMatrixError("log_abs_det: zero diagonal");
    }
    acc += log(abs(f.lu(i, i)));
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Householder QR, optionally with column pivoting.
// ---------------------------------------------------------------------------

// Reflector vectors below the diagonal (implicit unit leading element),
// R on and above; tau holds the reflector coefficients; col_pivots[k] is
// the column swapped with column k at step k (k everywhere when pivoting
// is disabled).
template <class S>
struct QrFactors {
  DenseMatrix<S> qr;
  std::vector<S> tau;
  std::vector<std::size_t> col_pivots;
};

enum class QrPivoting { none, column };

template <class S>
QrFactors<S> qr_factor(DenseMatrix<S> a, QrPivoting pivoting) {
  detail::require_square(a.rows(), a.cols(), "qr_factor: matrix must be square");
  const std::size_t n = a.rows();
  const double threshold = detail::kSingularRelTol * max_abs_value(a);
  if (n > 0 && threshold == 0.0) {
    throw SingularMatrixError("qr_factor: zero matrix");
  }
  QrFactors<S> f{std::move(a), std::vector<S>(n), std::vector<std::size_t>(n)};
  DenseMatrix<S>& qr = f.qr;
  for (std::size_t k = 0; k < n; ++k) {
    f.col_pivots[k] = k;
    if (pivoting == QrPivoting::column) {
      double best = -1.0;
      for (std::size_t j = k; j < n; ++j) {
        double norm2 = 0.0;
        for (std::size_t i = k; i < n; ++i) {
          const double v = value_of(qr(i, j));
          norm2 += v * v;
        }
        if (norm2 > best) {
          best = norm2;
          f.col_pivots[k] = j;
        }
      }
      if (f.col_pivots[k] != k) {
        for (std::size_t i = 0; i < n; ++i)
          std::swap(qr(i, k), qr(i, f.col_pivots[k]));
      }
    }
    using std::sqrt;
    S tail(0.0);
    for (std::size_t i = k + 1; i < n; ++i) tail += qr(i, k) * qr(i, k);
    if (value_of(tail) == 0.0) {
      // Column already triangular; identity reflector.
      f.tau[k] = S(0.0);
      continue;
    }
    S alpha = qr(k, k);
    S norm = sqrt(alpha * alpha + tail);
    S beta = norm;
    if (value_of(alpha) >= 0.0) beta = -beta;
    f.tau[k] = (beta - alpha) / beta;
    S inv_scale = S(1.0) / (alpha - beta);
    for (std::size_t i = k + 1; i < n; ++i) qr(i, k) *= inv_scale;
    qr(k, k) = beta;
    for (std::size_t j = k + 1; j < n; ++j) {
      S dot = qr(k, j);
      for (std::size_t i = k + 1; i < n; ++i) dot += qr(i, k) * qr(i, j);
      S t = f.tau[k] * dot;
      qr(k, j) -= t;
      for (std::size_t i = k + 1; i < n; ++i) qr(i, j) -= qr(i, k) * t;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(value_of(qr(i, i))) < threshold) {
      throw SingularMatrixError("qr_factor: diagonal below singularity threshold");
    }
  }
  return f;
}

namespace detail {

// x <- Q^T x, applying reflectors first to last.
template <class S>
void apply_q_transposed(const QrFactors<S>& f, DenseMatrix<S>& x) {
  const std::size_t n = f.qr.rows();
  for (std::size_t k = 0; k < n; ++k) {
    if (value_of(f.tau[k]) == 0.0) continue;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      S dot = x(k, c);
      for (std::size_t i = k + 1; i < n; ++i) dot += f.qr(i, k) * x(i, c);
      S t = f.tau[k] * dot;
      x(k, c) -= t;
      for (std::size_t i = k + 1; i < n; ++i) x(i, c) -= f.qr(i, k) * t;
    }
  }
}

// x <- Q x, applying reflectors last to first.
template <class S>
void apply_q(const QrFactors<S>& f, DenseMatrix<S>& x) {
  const std::size_t n = f.qr.rows();
  for (std::size_t k = n; k-- > 0;) {
    if (value_of(f.tau[k]) == 0.0) continue;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      S dot = x(k, c);
      for (std::size_t i = k + 1; i < n; ++i) dot += f.qr(i, k) * x(i, c);
      S t = f.tau[k] * dot;
      x(k, c) -= t;
      for (std::size_t i = k + 1; i < n; ++i) x(i, c) -= f.qr(i, k) * t;
    }
  }
}

}  // namespace detail

// Solves A X = B via A = Q R P^T: y = Q^T b, R z = y, x = P z.
template <class S>
DenseMatrix<S> qr_solve(const QrFactors<S>& f, const DenseMatrix<S>& b) {
  const std::size_t n = f.qr.rows();
  detail::require_conforming_rhs(n, b.rows(), "qr_solve: rhs rows != n");
  DenseMatrix<S> x = b;
  detail::apply_q_transposed(f, x);
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x(i, c) -= f.qr(i, j) * x(j, c);
      x(i, c) /= f.qr(i, i);
    }
  }
  for (std::size_t k = n; k-- > 0;) detail::swap_rows(x, k, f.col_pivots[k]);
  return x;
}

// Solves A^T X = B: u = P^T b, R^T w = u, x = Q w. The R^T substitution
// streams rows of the packed R.
template <class S>
DenseMatrix<S> qr_solve_transposed(const QrFactors<S>& f,
                                   const DenseMatrix<S>& b) {
  const std::size_t n = f.qr.rows();
  detail::require_conforming_rhs(n, b.rows(), "qr_solve_transposed: rhs rows != n");
  DenseMatrix<S> x = b;
  for (std::size_t k = 0; k < n; ++k) detail::swap_rows(x, k, f.col_pivots[k]);
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t j = 0; j < n; ++j) {
      x(j, c) /= f.qr(j, j);
      for (std::size_t k = j + 1; k < n; ++k) x(k, c) -= f.qr(j, k) * x(j, c);
    }
  }
  detail::apply_q(f, x);
  return x;
}

template <class S>
S log_abs_det(const QrFactors<S>& f) {
  using std::abs;
  using std::log;
  S acc(0.0);
  for (std::size_t i = 0; i < f.qr.rows(); ++i) {
    if (value_of(f.qr(i, i)) == 0.0) {
      throw SingularMatrixError("log_abs_det: zero diagonal");
    }
    acc += log(abs(f.qr(i, i)));
  }
  return acc;
}

// Explicit Q, for reconstruction checks.
template <class S>
DenseMatrix<S> qr_unpack_q(const QrFactors<S>& f) {
  DenseMatrix<S> q = DenseMatrix<S>::identity(f.qr.rows());
  detail::apply_q(f, q);
  return q;
}

// ---------------------------------------------------------------------------
// Cholesky (L L^T) for symmetric positive definite matrices.
// ---------------------------------------------------------------------------

template <class S>
struct CholeskyFactors {
  DenseMatrix<S> l;
};

template <class S>
CholeskyFactors<S> cholesky_factor(const DenseMatrix<S>& a) {
  detail::require_square(a.rows(), a.cols(),
                         "cholesky_factor: matrix must be square");
  const std::size_t n = a.rows();
  const double sym_tol = detail::kSingularRelTol * max_abs_value(a);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(value_of(a(i, j)) - value_of(a(j, i))) > sym_tol) {
        throw NotPositiveDefiniteError("cholesky_factor: matrix not symmetric");
      }
  CholeskyFactors<S> f{DenseMatrix<S>(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    using std::sqrt;
    S diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= f.l(j, k) * f.l(j, k);
    if (value_of(diag) <= 0.0) {
      throw NotPositiveDefiniteError("cholesky_factor: nonpositive pivot");
    }
    f.l(j, j) = sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      S sum = a(i, j);
      for (std::size_t k = 0; k < j; ++k) sum -= f.l(i, k) * f.l(j, k);
      f.l(i, j) = sum / f.l(j, j);
    }
  }
  return f;
}

template <class S>
DenseMatrix<S> cholesky_solve(const CholeskyFactors<S>& f,
                              const DenseMatrix<S>& b) {
  const std::size_t n = f.l.rows();
  detail::require_conforming_rhs(n, b.rows(), "cholesky_solve: rhs rows != n");
  DenseMatrix<S> x = b;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) x(i, c) -= f.l(i, j) * x(j, c);
      x(i, c) /= f.l(i, i);
    }
    // L^T pass in right-looking form, streaming rows of L.
    for (std::size_t j = n; j-- > 0;) {
      x(j, c) /= f.l(j, j);
      for (std::size_t k = 0; k < j; ++k) x(k, c) -= f.l(j, k) * x(j, c);
    }
  }
  return x;
}

// A^T = A for the symmetric case, so the transposed solve is the same.
template <class S>
DenseMatrix<S> cholesky_solve_transposed(const CholeskyFactors<S>& f,
                                         const DenseMatrix<S>& b) {
  return cholesky_solve(f, b);
}

}  // namespace adla
