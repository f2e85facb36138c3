// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

namespace adla {

// Factorization failure: a pivot fell below the relative singularity
// threshold (1e-12 * max|A|), or the matrix is identically zero.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cholesky failure: the matrix is not symmetric positive definite.
class NotPositiveDefiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class DimensionMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tape misuse: re-interpretation without reset, rewinding past the end,
// registering an ill-formed callback, seeding a passive variable.
class TapeStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace adla
