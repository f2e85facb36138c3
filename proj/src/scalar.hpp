// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <boost/container/small_vector.hpp>
#include <cassert>
#include <cmath>
#include <span>

#include "tape.hpp"

namespace adla {

// ---------------------------------------------------------------------------
// Tangent mode: value plus directional derivative, propagated forward.
// ---------------------------------------------------------------------------

class TangentScalar {
 public:
  TangentScalar() = default;
  TangentScalar(double value) : value_(value) {}
  TangentScalar(double value, double derivative)
      : value_(value), derivative_(derivative) {}

  double value() const noexcept { return value_; }
  double derivative() const noexcept { return derivative_; }

  TangentScalar& operator+=(const TangentScalar& rhs);
  TangentScalar& operator-=(const TangentScalar& rhs);
  TangentScalar& operator*=(const TangentScalar& rhs);
  TangentScalar& operator/=(const TangentScalar& rhs);

 private:
  double value_ = 0.0;
  double derivative_ = 0.0;
};

inline TangentScalar operator+(const TangentScalar& a, const TangentScalar& b) {
  return {a.value() + b.value(), a.derivative() + b.derivative()};
}
inline TangentScalar operator-(const TangentScalar& a, const TangentScalar& b) {
  return {a.value() - b.value(), a.derivative() - b.derivative()};
}
inline TangentScalar operator*(const TangentScalar& a, const TangentScalar& b) {
  return {a.value() * b.value(),
          a.derivative() * b.value() + a.value() * b.derivative()};
}
inline TangentScalar operator/(const TangentScalar& a, const TangentScalar& b) {
  const double inv = 1.0 / b.value();
  return {a.value() * inv,
          (a.derivative() - a.value() * inv * b.derivative()) * inv};
}
inline TangentScalar operator-(const TangentScalar& a) {
  return {-a.value(), -a.derivative()};
}

inline TangentScalar& TangentScalar::operator+=(const TangentScalar& rhs) {
  return *this = *this + rhs;
}
inline TangentScalar& TangentScalar::operator-=(const TangentScalar& rhs) {
  return *this = *this - rhs;
}
inline TangentScalar& TangentScalar::operator*=(const TangentScalar& rhs) {
  return *this = *this * rhs;
}
inline TangentScalar& TangentScalar::operator/=(const TangentScalar& rhs) {
  return *this = *this / rhs;
}

inline bool operator<(const TangentScalar& a, const TangentScalar& b) {
  return a.value() < b.value();
}
inline bool operator>(const TangentScalar& a, const TangentScalar& b) {
  return a.value() > b.value();
}
inline bool operator<=(const TangentScalar& a, const TangentScalar& b) {
  return a.value() <= b.value();
}
inline bool operator>=(const TangentScalar& a, const TangentScalar& b) {
  return a.value() >= b.value();
}
inline bool operator==(const TangentScalar& a, const TangentScalar& b) {
  return a.value() == b.value();
}

inline double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline TangentScalar sin(const TangentScalar& x) {
  return {std::sin(x.value()), std::cos(x.value()) * x.derivative()};
}
inline TangentScalar cos(const TangentScalar& x) {
  return {std::cos(x.value()), -std::sin(x.value()) * x.derivative()};
}
inline TangentScalar exp(const TangentScalar& x) {
  const double e = std::exp(x.value());
  return {e, e * x.derivative()};
}
inline TangentScalar log(const TangentScalar& x) {
  return {std::log(x.value()), x.derivative() / x.value()};
}
inline TangentScalar sqrt(const TangentScalar& x) {
  const double r = std::sqrt(x.value());
  return {r, 0.5 / r * x.derivative()};
}
// abs uses the subgradient 0 at the kink.
inline TangentScalar abs(const TangentScalar& x) {
  return {std::abs(x.value()), sign_of(x.value()) * x.derivative()};
}
inline TangentScalar pow(const TangentScalar& x, double c) {
  return {std::pow(x.value(), c),
          c * std::pow(x.value(), c - 1.0) * x.derivative()};
}

// ---------------------------------------------------------------------------
// Adjoint mode with deferred recording: operators accumulate a dependency
// list and chain-rule the weights; assigning the expression to an
// AdjointScalar records exactly one tape entry.
// ---------------------------------------------------------------------------

class AdjointScalar;

class DeferredExpr {
 public:
  using DepList = boost::container::small_vector<Dep, 4>;

  DeferredExpr(double value) : value_(value) {}
  DeferredExpr(const AdjointScalar& s);

  double value() const noexcept { return value_; }
  Tape* tape() const noexcept { return tape_; }
  std::span<const Dep> deps() const noexcept { return {deps_.data(), deps_.size()}; }

  // Appends `factor` times each dep of `src`, merging duplicate refs by
  // summing weights.
  void add_scaled(const DepList& src, double factor) {
    for (const Dep& dep : src) {
      bool merged = false;
      for (Dep& mine : deps_) {
        if (mine.ref == dep.ref) {
          mine.weight += factor * dep.weight;
          merged = true;
          break;
        }
      }
      if (!merged) deps_.push_back({dep.ref, factor * dep.weight});
    }
  }

  void scale(double factor) {
    for (Dep& dep : deps_) dep.weight *= factor;
  }

  static DeferredExpr combine(const DeferredExpr& a, const DeferredExpr& b,
                              double value, double weight_a, double weight_b) {
    assert(!(a.tape_ && b.tape_ && a.tape_ != b.tape_) &&
           "operands bound to different tapes");
    DeferredExpr out(value);
    out.tape_ = a.tape_ ? a.tape_ : b.tape_;
    out.deps_ = a.deps_;
    out.scale(weight_a);
    out.add_scaled(b.deps_, weight_b);
    return out;
  }

  static DeferredExpr chain(const DeferredExpr& x, double value,
                            double weight) {
    DeferredExpr out(value);
    out.tape_ = x.tape_;
    out.deps_ = x.deps_;
    out.scale(weight);
    return out;
  }

 private:
  friend class AdjointScalar;

  double value_ = 0.0;
  Tape* tape_ = nullptr;
  DepList deps_;
};

// Scalar bound to a tape entry (or passive when derived from constants
// only). Arithmetic yields DeferredExpr values; assignment materializes
// them as a single entry.
class AdjointScalar {
 public:
  AdjointScalar() = default;
  AdjointScalar(double value) : value_(value) {}

  AdjointScalar(const DeferredExpr& expr) { materialize(expr); }
  AdjointScalar& operator=(const DeferredExpr& expr) {
    materialize(expr);
    return *this;
  }

  // Wraps an existing tape entry.
  static AdjointScalar bound(Tape& tape, double value, VariableRef ref) {
    AdjointScalar s(value);
    s.tape_ = &tape;
    s.ref_ = ref;
    return s;
  }

  double value() const noexcept { return value_; }
  VariableRef ref() const noexcept { return ref_; }
  Tape* tape() const noexcept { return tape_; }
  bool is_passive() const noexcept { return ref_.is_passive(); }

  double adjoint() const { return tape_->adjoint(ref_); }

  AdjointScalar& operator+=(const DeferredExpr& rhs);
  AdjointScalar& operator-=(const DeferredExpr& rhs);
  AdjointScalar& operator*=(const DeferredExpr& rhs);
  AdjointScalar& operator/=(const DeferredExpr& rhs);

 private:
  void materialize(const DeferredExpr& expr) {
    value_ = expr.value_;
    if (expr.tape_ == nullptr || expr.deps_.empty()) {
      tape_ = nullptr;
      ref_ = VariableRef::passive();
      return;
    }
    tape_ = expr.tape_;
    ref_ = tape_->record(std::span<const Dep>(expr.deps_.data(),
                                              expr.deps_.size()));
  }

  double value_ = 0.0;
  VariableRef ref_ = VariableRef::passive();
  Tape* tape_ = nullptr;
};

inline DeferredExpr::DeferredExpr(const AdjointScalar& s) : value_(s.value()) {
  if (!s.is_passive()) {
    tape_ = s.tape();
    deps_.push_back({s.ref(), 1.0});
  }
}

// Registers an independent variable: one entry with no edges.
inline AdjointScalar make_active(Tape& tape, double value) {
  return AdjointScalar::bound(tape, value, tape.record({}));
}

inline DeferredExpr operator+(const DeferredExpr& a, const DeferredExpr& b) {
  return DeferredExpr::combine(a, b, a.value() + b.value(), 1.0, 1.0);
}
inline DeferredExpr operator-(const DeferredExpr& a, const DeferredExpr& b) {
  return DeferredExpr::combine(a, b, a.value() - b.value(), 1.0, -1.0);
}
inline DeferredExpr operator*(const DeferredExpr& a, const DeferredExpr& b) {
  return DeferredExpr::combine(a, b, a.value() * b.value(), b.value(),
                               a.value());
}
inline DeferredExpr operator/(const DeferredExpr& a, const DeferredExpr& b) {
  const double inv = 1.0 / b.value();
  return DeferredExpr::combine(a, b, a.value() * inv, inv,
                               -a.value() * inv * inv);
}
inline DeferredExpr operator-(const DeferredExpr& a) {
  return DeferredExpr::chain(a, -a.value(), -1.0);
}

inline AdjointScalar& AdjointScalar::operator+=(const DeferredExpr& rhs) {
  return *this = DeferredExpr(*this) + rhs;
}
inline AdjointScalar& AdjointScalar::operator-=(const DeferredExpr& rhs) {
  return *this = DeferredExpr(*this) - rhs;
}
inline AdjointScalar& AdjointScalar::operator*=(const DeferredExpr& rhs) {
  return *this = DeferredExpr(*this) * rhs;
}
inline AdjointScalar& AdjointScalar::operator/=(const DeferredExpr& rhs) {
  return *this = DeferredExpr(*this) / rhs;
}

inline bool operator<(const DeferredExpr& a, const DeferredExpr& b) {
  return a.value() < b.value();
}
inline bool operator>(const DeferredExpr& a, const DeferredExpr& b) {
  return a.value() > b.value();
}
inline bool operator<=(const DeferredExpr& a, const DeferredExpr& b) {
  return a.value() <= b.value();
}
inline bool operator>=(const DeferredExpr& a, const DeferredExpr& b) {
  return a.value() >= b.value();
}
inline bool operator==(const DeferredExpr& a, const DeferredExpr& b) {
  return a.value() == b.value();
}

inline DeferredExpr sin(const DeferredExpr& x) {
  return DeferredExpr::chain(x, std::sin(x.value()), std::cos(x.value()));
}
inline DeferredExpr cos(const DeferredExpr& x) {
  return DeferredExpr::chain(x, std::cos(x.value()), -std::sin(x.value()));
}
inline DeferredExpr exp(const DeferredExpr& x) {
  const double e = std::exp(x.value());
  return DeferredExpr::chain(x, e, e);
}
inline DeferredExpr log(const DeferredExpr& x) {
  return DeferredExpr::chain(x, std::log(x.value()), 1.0 / x.value());
}
inline DeferredExpr sqrt(const DeferredExpr& x) {
  const double r = std::sqrt(x.value());
  return DeferredExpr::chain(x, r, 0.5 / r);
}
inline DeferredExpr abs(const DeferredExpr& x) {
  return DeferredExpr::chain(x, std::abs(x.value()), sign_of(x.value()));
}
inline DeferredExpr pow(const DeferredExpr& x, double c) {
  return DeferredExpr::chain(x, std::pow(x.value(), c),
                             c * std::pow(x.value(), c - 1.0));
}

// ---------------------------------------------------------------------------
// Adjoint mode with eager recording: every operator materializes its result
// immediately, so temporaries show up as their own tape entries. This is the
// plain-overloading baseline the deferred policy is measured against.
// ---------------------------------------------------------------------------

class EagerAdjointScalar {
 public:
  EagerAdjointScalar() = default;
  EagerAdjointScalar(double value) : value_(value) {}

  static EagerAdjointScalar bound(Tape& tape, double value, VariableRef ref) {
    EagerAdjointScalar s(value);
    s.tape_ = &tape;
    s.ref_ = ref;
    return s;
  }

  double value() const noexcept { return value_; }
  VariableRef ref() const noexcept { return ref_; }
  Tape* tape() const noexcept { return tape_; }
  bool is_passive() const noexcept { return ref_.is_passive(); }

  double adjoint() const { return tape_->adjoint(ref_); }

  EagerAdjointScalar& operator+=(const EagerAdjointScalar& rhs);
  EagerAdjointScalar& operator-=(const EagerAdjointScalar& rhs);
  EagerAdjointScalar& operator*=(const EagerAdjointScalar& rhs);
  EagerAdjointScalar& operator/=(const EagerAdjointScalar& rhs);

 private:
  double value_ = 0.0;
  VariableRef ref_ = VariableRef::passive();
  Tape* tape_ = nullptr;
};

inline EagerAdjointScalar make_active_eager(Tape& tape, double value) {
  return EagerAdjointScalar::bound(tape, value, tape.record({}));
}

namespace detail {

inline EagerAdjointScalar eager_binary(const EagerAdjointScalar& a,
                                       const EagerAdjointScalar& b,
                                       double value, double weight_a,
                                       double weight_b) {
  assert(!(a.tape() && b.tape() && a.tape() != b.tape()) &&
         "operands bound to different tapes");
  Tape* tape = a.tape() ? a.tape() : b.tape();
  if (tape == nullptr) return EagerAdjointScalar(value);
  const VariableRef ref =
      tape->record({Dep{a.ref(), weight_a}, Dep{b.ref(), weight_b}});
  return EagerAdjointScalar::bound(*tape, value, ref);
}

inline EagerAdjointScalar eager_unary(const EagerAdjointScalar& x,
                                      double value, double weight) {
  if (x.is_passive()) return EagerAdjointScalar(value);
  const VariableRef ref = x.tape()->record({Dep{x.ref(), weight}});
  return EagerAdjointScalar::bound(*x.tape(), value, ref);
}

}  // namespace detail

inline EagerAdjointScalar operator+(const EagerAdjointScalar& a,
                                    const EagerAdjointScalar& b) {
  return detail::eager_binary(a, b, a.value() + b.value(), 1.0, 1.0);
}
inline EagerAdjointScalar operator-(const EagerAdjointScalar& a,
                                    const EagerAdjointScalar& b) {
  return detail::eager_binary(a, b, a.value() - b.value(), 1.0, -1.0);
}
inline EagerAdjointScalar operator*(const EagerAdjointScalar& a,
                                    const EagerAdjointScalar& b) {
  return detail::eager_binary(a, b, a.value() * b.value(), b.value(),
                              a.value());
}
inline EagerAdjointScalar operator/(const EagerAdjointScalar& a,
                                    const EagerAdjointScalar& b) {
  const double inv = 1.0 / b.value();
  return detail::eager_binary(a, b, a.value() * inv, inv,
                              -a.value() * inv * inv);
}
inline EagerAdjointScalar operator-(const EagerAdjointScalar& a) {
  return detail::eager_unary(a, -a.value(), -1.0);
}

inline EagerAdjointScalar& EagerAdjointScalar::operator+=(
    const EagerAdjointScalar& rhs) {
  return *this = *this + rhs;
}
inline EagerAdjointScalar& EagerAdjointScalar::operator-=(
    const EagerAdjointScalar& rhs) {
  return *this = *this - rhs;
}
inline EagerAdjointScalar& EagerAdjointScalar::operator*=(
    const EagerAdjointScalar& rhs) {
  return *this = *this * rhs;
}
inline EagerAdjointScalar& EagerAdjointScalar::operator/=(
    const EagerAdjointScalar& rhs) {
  return *this = *this / rhs;
}

inline bool operator<(const EagerAdjointScalar& a, const EagerAdjointScalar& b) {
  return a.value() < b.value();
}
inline bool operator>(const EagerAdjointScalar& a, const EagerAdjointScalar& b) {
  return a.value() > b.value();
}
inline bool operator<=(const EagerAdjointScalar& a,
                       const EagerAdjointScalar& b) {
  return a.value() <= b.value();
}
inline bool operator>=(const EagerAdjointScalar& a,
                       const EagerAdjointScalar& b) {
  return a.value() >= b.value();
}
inline bool operator==(const EagerAdjointScalar& a,
                       const EagerAdjointScalar& b) {
  return a.value() == b.value();
}

inline EagerAdjointScalar sin(const EagerAdjointScalar& x) {
  return detail::eager_unary(x, std::sin(x.value()), std::cos(x.value()));
}
inline EagerAdjointScalar cos(const EagerAdjointScalar& x) {
  return detail::eager_unary(x, std::cos(x.value()), -std::sin(x.value()));
}
inline EagerAdjointScalar exp(const EagerAdjointScalar& x) {
  const double e = std::exp(x.value());
  return detail::eager_unary(x, e, e);
}
inline EagerAdjointScalar log(const EagerAdjointScalar& x) {
  return detail::eager_unary(x, std::log(x.value()), 1.0 / x.value());
}
inline EagerAdjointScalar sqrt(const EagerAdjointScalar& x) {
  const double r = std::sqrt(x.value());
  return detail::eager_unary(x, r, 0.5 / r);
}
inline EagerAdjointScalar abs(const EagerAdjointScalar& x) {
  return detail::eager_unary(x, std::abs(x.value()), sign_of(x.value()));
}
inline EagerAdjointScalar pow(const EagerAdjointScalar& x, double c) {
  return detail::eager_unary(x, std::pow(x.value(), c),
                             c * std::pow(x.value(), c - 1.0));
}

// ---------------------------------------------------------------------------
// Passive view of any scalar kind; generic kernels use this for control
// flow (pivot selection, thresholds) so branching never records entries.
// ---------------------------------------------------------------------------

inline double value_of(double x) { return x; }
inline double value_of(const TangentScalar& x) { return x.value(); }
inline double value_of(const AdjointScalar& x) { return x.value(); }
inline double value_of(const EagerAdjointScalar& x) { return x.value(); }
inline double value_of(const DeferredExpr& x) { return x.value(); }

}  // namespace adla
