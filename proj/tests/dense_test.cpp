// SPDX-License-Identifier: Apache-2.0
#include "dense.hpp"

#include <array>
#include <cmath>

#include "bench.hpp"
#include "doctest.h"
#include "errors.hpp"
#include "rng.hpp"
#include "test_util.hpp"

using namespace adla;
using namespace adla::testutil;

namespace {

template <class S>
DenseMatrix<S> lift(const Matrix& m) {
  DenseMatrix<S> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = S(m(i, j));
  return out;
}

template <class S>
Matrix lower(const DenseMatrix<S>& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = value_of(m(i, j));
  return out;
}

}  // namespace

TEST_CASE("matmul") {
  SUBCASE("identity is neutral") {
    Rng rng(1);
    const Matrix a = random_uniform_matrix(rng, 3, 3);
    const Matrix c = matmul(Matrix::identity(3), a);
    CHECK(max_abs_diff(c, a) == 0.0);
  }

  SUBCASE("2x2 worked example") {
    const Matrix a = matrix_from(2, 2, {1, 2, 3, 4});
    const Matrix b = matrix_from(2, 2, {5, 6, 7, 8});
    const Matrix c = matmul(a, b);
    CHECK(max_abs_diff(c, matrix_from(2, 2, {19, 22, 43, 50})) == 0.0);
  }

  SUBCASE("inner dimension mismatch") {
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 2)),
                    DimensionMismatchError);
  }
}

TEST_CASE("recording census of the 2x2 product kernel") {
  const Matrix a = matrix_from(2, 2, {1, 2, 3, 4});
  const Matrix b = matrix_from(2, 2, {5, 6, 7, 8});

  SUBCASE("eager scalars expose the product temporaries") {
    Tape t;
    DenseMatrix<EagerAdjointScalar> ea(2, 2), eb(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        ea(i, j) = make_active_eager(t, a(i, j));
        eb(i, j) = make_active_eager(t, b(i, j));
      }
    const DenseMatrix<EagerAdjointScalar> ec = matmul(ea, eb);
    const TapeStats s = t.stats();
    // 8 inputs + 8 product temporaries + 8 accumulations.
    CHECK(s.num_entries == 24);
    CHECK(s.num_edges == 28);

    for (const EagerAdjointScalar& c : ec.data()) t.set_adjoint(c.ref(), 1.0);
    t.interpret_reverse();
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(t.adjoint(ea(i, j).ref()) == b(j, 0) + b(j, 1));
        CHECK(t.adjoint(eb(i, j).ref()) == a(0, i) + a(1, i));
      }
  }

  SUBCASE("deferred scalars fuse each accumulation") {
    Tape t;
    DenseMatrix<AdjointScalar> fa(2, 2), fb(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        fa(i, j) = make_active(t, a(i, j));
        fb(i, j) = make_active(t, b(i, j));
      }
    matmul(fa, fb);
    const TapeStats s = t.stats();
    // 8 inputs + one entry per compound assignment.
    CHECK(s.num_entries == 16);
    CHECK(s.num_edges == 20);
  }
}

TEST_CASE("lu factorization") {
  SUBCASE("permutation input swaps once") {
    const LuFactors<double> f = lu_factor(matrix_from(2, 2, {0, 1, 1, 0}));
    CHECK(f.sign == -1);
    CHECK(f.pivots[0] == 1);
    const double det = f.sign * f.lu(0, 0) * f.lu(1, 1);
    CHECK(det == -1.0);
  }

  SUBCASE("diagonal input needs no swaps") {
    const LuFactors<double> f = lu_factor(matrix_from(2, 2, {2, 0, 0, 4}));
    CHECK(f.sign == 1);
    CHECK(f.pivots[0] == 0);
    CHECK(f.lu(0, 0) == 2.0);
    CHECK(f.lu(1, 1) == 4.0);
  }

  SUBCASE("P A = L U on a random 8x8") {
    Rng rng(5);
    const Matrix a = random_well_conditioned_matrix(rng, 8);
    const LuFactors<double> f = lu_factor(a);
    const Matrix pa = apply_row_swaps(a, f.pivots);
    const Matrix lu = matmul(lu_expand_l(f), lu_expand_u(f));
    CHECK(max_abs_diff(pa, lu) <= 1e-12 * max_abs_value(a));
  }

  SUBCASE("zero matrix is singular") {
    CHECK_THROWS_AS(lu_factor(Matrix(3, 3)), SingularMatrixError);
  }

  SUBCASE("rank-deficient matrix is singular") {
    CHECK_THROWS_AS(lu_factor(matrix_from(2, 2, {1, 2, 2, 4})),
                    SingularMatrixError);
  }
}

TEST_CASE("lu solve") {
  SUBCASE("diagonal system") {
    const LuFactors<double> f = lu_factor(matrix_from(2, 2, {2, 0, 0, 4}));
    const Matrix x = lu_solve(f, matrix_from(2, 1, {2, 8}));
    CHECK(x(0, 0) == 1.0);
    CHECK(x(1, 0) == 2.0);
  }

  SUBCASE("residual on a random 16x16") {
    Rng rng(11);
    const Matrix a = random_well_conditioned_matrix(rng, 16);
    const Matrix b = random_uniform_matrix(rng, 16, 1);
    const Matrix x = lu_solve(lu_factor(a), b);
    const Matrix r = matmul(a, x);
    CHECK(max_abs_diff(r, b) <= 1e-10 * max_abs_value(a) * max_abs_value(x));
  }

  SUBCASE("transposed solve equals plain solve on symmetric input") {
    Rng rng(12);
    const Matrix spd = random_spd_matrix(rng, 6);
    const Matrix b = random_uniform_matrix(rng, 6, 1);
    const LuFactors<double> f = lu_factor(spd);
    CHECK(max_abs_diff(lu_solve(f, b), lu_solve_transposed(f, b)) <= 1e-11);
  }

  SUBCASE("transposed solve residual") {
    Rng rng(13);
    const Matrix a = random_well_conditioned_matrix(rng, 9);
    const Matrix b = random_uniform_matrix(rng, 9, 1);
    const Matrix x = lu_solve_transposed(lu_factor(a), b);
    const Matrix r = matmul(transpose(a), x);
    CHECK(max_abs_diff(r, b) <= 1e-10 * max_abs_value(a) * max_abs_value(x));
  }
}

TEST_CASE("qr factorization") {
  SUBCASE("rotation input gives unit diagonal magnitudes") {
    const double c = std::cos(0.25 * 3.14159265358979323846);
    const double s = std::sin(0.25 * 3.14159265358979323846);
    const QrFactors<double> f =
        qr_factor(matrix_from(2, 2, {c, -s, s, c}), QrPivoting::none);
    CHECK(std::abs(f.qr(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(f.qr(1, 1)) == doctest::Approx(1.0));
  }

  SUBCASE("identity solves to the right-hand side") {
    const QrFactors<double> f =
        qr_factor(Matrix::identity(4), QrPivoting::column);
    Rng rng(3);
    const Matrix b = random_uniform_matrix(rng, 4, 1);
    CHECK(max_abs_diff(qr_solve(f, b), b) <= 1e-14);
  }

  SUBCASE("agrees with lu on a random well-conditioned 16x16") {
    Rng rng(17);
    const Matrix a = random_well_conditioned_matrix(rng, 16);
    const Matrix b = random_uniform_matrix(rng, 16, 1);
    const Matrix x_lu = lu_solve(lu_factor(a), b);
    const Matrix x_qr = qr_solve(qr_factor(a, QrPivoting::column), b);
    CHECK(max_abs_diff(x_lu, x_qr) <=
          1e-9 * std::max(1.0, max_abs_value(x_lu)));
  }

  SUBCASE("transposed solve residual") {
    Rng rng(18);
    const Matrix a = random_well_conditioned_matrix(rng, 10);
    const Matrix b = random_uniform_matrix(rng, 10, 1);
    const Matrix x = qr_solve_transposed(qr_factor(a, QrPivoting::column), b);
    const Matrix r = matmul(transpose(a), x);
    CHECK(max_abs_diff(r, b) <= 1e-10 * max_abs_value(a) * max_abs_value(x));
  }

  SUBCASE("singular input is rejected") {
    CHECK_THROWS_AS(qr_factor(matrix_from(2, 2, {1, 2, 2, 4}),
                              QrPivoting::column),
                    SingularMatrixError);
  }
}

TEST_CASE("cholesky") {
  SUBCASE("identity factors to identity") {
    const CholeskyFactors<double> f = cholesky_factor(Matrix::identity(3));
    CHECK(max_abs_diff(f.l, Matrix::identity(3)) == 0.0);
  }

  SUBCASE("hand-worked 2x2") {
    const CholeskyFactors<double> f =
        cholesky_factor(matrix_from(2, 2, {4, 2, 2, 3}));
    CHECK(f.l(0, 0) == 2.0);
    CHECK(f.l(1, 0) == 1.0);
    CHECK(f.l(1, 1) == doctest::Approx(std::sqrt(2.0)));
    const Matrix llt = matmul(f.l, transpose(f.l));
    CHECK(max_abs_diff(llt, matrix_from(2, 2, {4, 2, 2, 3})) <= 1e-15);
  }

  SUBCASE("random spd solve residual") {
    Rng rng(23);
    const Matrix a = random_spd_matrix(rng, 12);
    const Matrix b = random_uniform_matrix(rng, 12, 1);
    const Matrix x = cholesky_solve(cholesky_factor(a), b);
    const Matrix r = matmul(a, x);
    CHECK(max_abs_diff(r, b) <= 1e-10 * max_abs_value(a) * max_abs_value(x));
  }

  SUBCASE("asymmetric input is rejected") {
    CHECK_THROWS_AS(cholesky_factor(matrix_from(2, 2, {1, 2, 0, 1})),
                    NotPositiveDefiniteError);
  }

  SUBCASE("indefinite input is rejected") {
    CHECK_THROWS_AS(cholesky_factor(matrix_from(2, 2, {1, 2, 2, 1})),
                    NotPositiveDefiniteError);
  }
}

TEST_CASE("inverse") {
  SUBCASE("identity") {
    const Matrix inv = inverse(lu_factor(Matrix::identity(3)));
    CHECK(max_abs_diff(inv, Matrix::identity(3)) == 0.0);
  }

  SUBCASE("diagonal") {
    const Matrix inv = inverse(lu_factor(matrix_from(2, 2, {2, 0, 0, 4})));
    CHECK(max_abs_diff(inv, matrix_from(2, 2, {0.5, 0, 0, 0.25})) == 0.0);
  }

  SUBCASE("A times its inverse is the identity, random 16x16") {
    Rng rng(29);
    const Matrix a = random_well_conditioned_matrix(rng, 16);
    const Matrix prod = matmul(a, inverse(lu_factor(a)));
    CHECK(max_abs_diff(prod, Matrix::identity(16)) <= 1e-10);
  }
}

TEST_CASE("log-abs-determinant") {
  SUBCASE("diagonal with a negative entry") {
    const Matrix a = matrix_from(2, 2, {2, 0, 0, -4});
    CHECK(log_abs_det(lu_factor(a)) == doctest::Approx(std::log(8.0)));
    CHECK(log_abs_det(qr_factor(a, QrPivoting::column)) ==
          doctest::Approx(std::log(8.0)));
  }

  SUBCASE("identity gives zero") {
    CHECK(log_abs_det(lu_factor(Matrix::identity(5))) == 0.0);
  }

  SUBCASE("lu and qr routes agree on a random 16x16") {
    Rng rng(31);
    const Matrix a = random_well_conditioned_matrix(rng, 16);
    const double via_lu = log_abs_det(lu_factor(a));
    const double via_qr = log_abs_det(qr_factor(a, QrPivoting::column));
    CHECK(rel_close(via_lu, via_qr, 1e-10));
  }

  SUBCASE("zero diagonal in prebuilt factors is rejected") {
    LuFactors<double> f{matrix_from(2, 2, {1, 0, 0, 0}), {0, 1}, 1};
    CHECK_THROWS_AS(log_abs_det(f), SingularMatrixError);
  }
}

TEST_CASE("reconstruction across sizes") {
  Rng rng(37);
  for (const std::size_t n : {2u, 4u, 8u, 16u, 32u}) {
    for (int round = 0; round < 100; ++round) {
      const Matrix a = random_well_conditioned_matrix(rng, n);
      const double scale = max_abs_value(a);

      const LuFactors<double> lf = lu_factor(a);
      CHECK(max_abs_diff(apply_row_swaps(a, lf.pivots),
                         matmul(lu_expand_l(lf), lu_expand_u(lf))) <=
            1e-12 * scale);

      const QrFactors<double> qf = qr_factor(a, QrPivoting::column);
      const Matrix q = qr_unpack_q(qf);
      CHECK(max_abs_diff(matmul(transpose(q), q), Matrix::identity(n)) <=
            1e-12);
      const Matrix ap = apply_col_swaps(a, qf.col_pivots);
      CHECK(max_abs_diff(ap, matmul(q, qr_expand_r(qf))) <= 1e-12 * scale);

      const Matrix spd = random_spd_matrix(rng, n);
      const CholeskyFactors<double> cf = cholesky_factor(spd);
      CHECK(max_abs_diff(matmul(cf.l, transpose(cf.l)), spd) <=
            1e-12 * max_abs_value(spd));
    }
  }
}

TEST_CASE("solvers agree on shared spd systems") {
  Rng rng(41);
  for (int round = 0; round < 10; ++round) {
    const Matrix a = random_spd_matrix(rng, 8);
    const Matrix b = random_uniform_matrix(rng, 8, 1);
    const Matrix x_lu = lu_solve(lu_factor(a), b);
    const Matrix x_qr = qr_solve(qr_factor(a, QrPivoting::column), b);
    const Matrix x_ch = cholesky_solve(cholesky_factor(a), b);
    const double scale = std::max(1.0, max_abs_value(x_lu));
    CHECK(max_abs_diff(x_lu, x_qr) <= 1e-9 * scale);
    CHECK(max_abs_diff(x_lu, x_ch) <= 1e-9 * scale);
  }
}

TEST_CASE("determinant sign matches brute-force cofactor expansion") {
  const auto det2 = [](const std::array<int, 4>& m) {
    return m[0] * m[3] - m[1] * m[2];
  };
  std::array<int, 4> m2{};
  int checked = 0;
  for (m2[0] = -2; m2[0] <= 2; ++m2[0])
    for (m2[1] = -2; m2[1] <= 2; ++m2[1])
      for (m2[2] = -2; m2[2] <= 2; ++m2[2])
        for (m2[3] = -2; m2[3] <= 2; ++m2[3]) {
          Matrix a(2, 2, {double(m2[0]), double(m2[1]), double(m2[2]),
                          double(m2[3])});
          int lu_sign = 0;
          try {
            const LuFactors<double> f = lu_factor(a);
            lu_sign = f.sign;
            for (std::size_t i = 0; i < 2; ++i) {
              if (f.lu(i, i) < 0) lu_sign = -lu_sign;
            }
          } catch (const SingularMatrixError&) {
            lu_sign = 0;
          }
          const int ref = det2(m2);
          const int ref_sign = ref > 0 ? 1 : (ref < 0 ? -1 : 0);
          CHECK(lu_sign == ref_sign);
          ++checked;
        }
  CHECK(checked == 625);

  // 3x3: all 5^9 integer matrices with entries in {-2..2}.
  const auto det3 = [](const int m[9]) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  };
  int m3[9];
  long long total = 0, mismatches = 0;
  std::vector<double> buf(9);
  for (long long code = 0; code < 1953125; ++code) {
    long long c = code;
    for (int i = 0; i < 9; ++i) {
      m3[i] = static_cast<int>(c % 5) - 2;
      c /= 5;
      buf[static_cast<std::size_t>(i)] = m3[i];
    }
    Matrix a(3, 3, buf);
    int lu_sign = 0;
    try {
      const LuFactors<double> f = lu_factor(a);
      lu_sign = f.sign;
      for (std::size_t i = 0; i < 3; ++i) {
        if (f.lu(i, i) < 0) lu_sign = -lu_sign;
      }
    } catch (const SingularMatrixError&) {
      lu_sign = 0;
    }
    const int ref = det3(m3);
    const int ref_sign = ref > 0 ? 1 : (ref < 0 ? -1 : 0);
    if (lu_sign != ref_sign) ++mismatches;
    ++total;
  }
  CHECK(total == 1953125);
  CHECK(mismatches == 0);
}

TEST_CASE("kernels are generic over the scalar kind") {
  Rng rng(43);
  const Matrix a = random_well_conditioned_matrix(rng, 5);
  const Matrix b = random_uniform_matrix(rng, 5, 1);
  const Matrix spd = random_spd_matrix(rng, 5);

  Tape tape;
  const auto lift_adjoint = [&tape](const Matrix& m) {
    DenseMatrix<AdjointScalar> out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j)
        out(i, j) = make_active(tape, m(i, j));
    return out;
  };

  SUBCASE("matmul values agree across instantiations") {
    const Matrix plain = matmul(a, transpose(a));
    const Matrix via_tangent =
        lower(matmul(lift<TangentScalar>(a), lift<TangentScalar>(transpose(a))));
    const Matrix via_adjoint =
        lower(matmul(lift_adjoint(a), lift_adjoint(transpose(a))));
    CHECK(max_abs_diff(plain, via_tangent) <= 1e-13);
    CHECK(max_abs_diff(plain, via_adjoint) <= 1e-13);
  }

  SUBCASE("lu solve values agree across instantiations") {
    const Matrix plain = lu_solve(lu_factor(a), b);
    const Matrix via_tangent = lower(
        lu_solve(lu_factor(lift<TangentScalar>(a)), lift<TangentScalar>(b)));
    const Matrix via_adjoint =
        lower(lu_solve(lu_factor(lift_adjoint(a)), lift_adjoint(b)));
    CHECK(max_abs_diff(plain, via_tangent) <= 1e-13);
    CHECK(max_abs_diff(plain, via_adjoint) <= 1e-13);
  }

  SUBCASE("qr solve values agree across instantiations") {
    const Matrix plain = qr_solve(qr_factor(a, QrPivoting::column), b);
    const Matrix via_tangent = lower(qr_solve(
        qr_factor(lift<TangentScalar>(a), QrPivoting::column),
        lift<TangentScalar>(b)));
    const Matrix via_adjoint = lower(qr_solve(
        qr_factor(lift_adjoint(a), QrPivoting::column), lift_adjoint(b)));
    CHECK(max_abs_diff(plain, via_tangent) <= 1e-13);
    CHECK(max_abs_diff(plain, via_adjoint) <= 1e-13);
  }

  SUBCASE("cholesky and log-abs-det values agree across instantiations") {
    const Matrix plain = cholesky_solve(cholesky_factor(spd), b);
    const Matrix via_tangent = lower(cholesky_solve(
        cholesky_factor(lift<TangentScalar>(spd)), lift<TangentScalar>(b)));
    const Matrix via_adjoint = lower(
        cholesky_solve(cholesky_factor(lift_adjoint(spd)), lift_adjoint(b)));
    CHECK(max_abs_diff(plain, via_tangent) <= 1e-13);
    CHECK(max_abs_diff(plain, via_adjoint) <= 1e-13);

    const double plain_det = log_abs_det(lu_factor(a));
    const TangentScalar tangent_det = log_abs_det(lu_factor(lift<TangentScalar>(a)));
    const AdjointScalar adjoint_det = log_abs_det(lu_factor(lift_adjoint(a)));
    CHECK(rel_close(plain_det, tangent_det.value(), 1e-13));
    CHECK(rel_close(plain_det, adjoint_det.value(), 1e-13));
  }

  SUBCASE("eager instantiation matches too") {
    Tape t2;
    DenseMatrix<EagerAdjointScalar> ea(5, 5);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        ea(i, j) = make_active_eager(t2, a(i, j));
    const Matrix plain = matmul(a, a);
    const Matrix via_eager = lower(matmul(ea, ea));
    CHECK(max_abs_diff(plain, via_eager) <= 1e-13);
  }
}
