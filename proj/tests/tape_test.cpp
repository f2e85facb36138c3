// SPDX-License-Identifier: Apache-2.0
#include "tape.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <thread>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "errors.hpp"
#include "rng.hpp"
#include "test_util.hpp"

using namespace adla;

TEST_CASE("recording entries") {
  Tape t;

  SUBCASE("independent variable has no predecessors") {
    const VariableRef r = t.record({});
    CHECK(r.index == 0);
    CHECK(t.stats().num_entries == 1);
    CHECK(t.stats().num_edges == 0);
  }

  SUBCASE("binary op records two edges") {
    const VariableRef a = t.record({});
    const VariableRef b = t.record({});
    const VariableRef c = t.record({{a, 2.0}, {b, 3.0}});
    CHECK(c.index == 2);
    const auto edges = t.entry_edges(c.index);
    REQUIRE(edges.size() == 2);
    CHECK(edges[0].target == a);
    CHECK(edges[0].weight == 2.0);
    CHECK(edges[1].target == b);
    CHECK(edges[1].weight == 3.0);
  }

  SUBCASE("passive deps are dropped") {
    const VariableRef a = t.record({});
    const VariableRef c = t.record({{VariableRef::passive(), 5.0}, {a, 1.0}});
    CHECK(t.entry_edges(c.index).size() == 1);
    CHECK(t.stats().num_edges == 1);
  }

  SUBCASE("dep referring past the end is rejected") {
    CHECK_THROWS_AS(t.record({{VariableRef{7}, 1.0}}), std::out_of_range);
  }
}

TEST_CASE("adjoint slots") {
  Tape t;
  const VariableRef x = t.record({});
  const VariableRef y = t.record({{x, 2.0}});

  SUBCASE("set then get") {
    t.set_adjoint(y, 1.0);
    CHECK(t.adjoint(y) == 1.0);
  }

  SUBCASE("fresh slots are zero") { CHECK(t.adjoint(y) == 0.0); }

  SUBCASE("passive refs cannot be seeded") {
    CHECK_THROWS_AS(t.set_adjoint(VariableRef::passive(), 1.0), TapeStateError);
    CHECK_THROWS_AS(t.adjoint(VariableRef::passive()), TapeStateError);
  }

  SUBCASE("out-of-range refs are rejected") {
    CHECK_THROWS_AS(t.set_adjoint(VariableRef{5}, 1.0), std::out_of_range);
  }
}

TEST_CASE("reverse interpretation propagates products") {
  // z = x*y with x=3, y=4: local partials are y and x.
  Tape t;
  const VariableRef x = t.record({});
  const VariableRef y = t.record({});
  const VariableRef z = t.record({{x, 4.0}, {y, 3.0}});
  t.set_adjoint(z, 1.0);
  t.interpret_reverse();
  CHECK(t.adjoint(x) == 4.0);
  CHECK(t.adjoint(y) == 3.0);
}

TEST_CASE("parallel edges accumulate") {
  // z = x + x records two unit edges to x.
  Tape t;
  const VariableRef x = t.record({});
  const VariableRef z = t.record({{x, 1.0}, {x, 1.0}});
  t.set_adjoint(z, 1.0);
  t.interpret_reverse();
  CHECK(t.adjoint(x) == 2.0);
}

TEST_CASE("hand-built 2x2 product graph matches the matrix-level expansions") {
  // Graph of C(i,j) += A(i,k)*B(k,j) for 2x2 inputs with explicit product
  // temporaries z, seeded with an all-ones output adjoint.
  Rng rng(7);
  for (int instance = 0; instance < 4; ++instance) {
    double a[2][2], b[2][2];
    for (auto& row : a)
      for (double& v : row) v = static_cast<double>(rng.next_u64() % 9) - 4.0;
    for (auto& row : b)
      for (double& v : row) v = static_cast<double>(rng.next_u64() % 9) - 4.0;

    Tape t;
    VariableRef ar[2][2], br[2][2];
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) ar[i][j] = t.record({});
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) br[i][j] = t.record({});
    VariableRef cr[2][2];
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        VariableRef z[2];
        for (int k = 0; k < 2; ++k) {
          z[k] = t.record({{ar[i][k], b[k][j]}, {br[k][j], a[i][k]}});
        }
        cr[i][j] = t.record({{z[0], 1.0}, {z[1], 1.0}});
      }
    }
    for (auto& row : cr)
      for (VariableRef r : row) t.set_adjoint(r, 1.0);
    t.interpret_reverse();

    // a_adj(i,j) = sum_k c_adj(i,k) b(j,k); b_adj(i,j) = sum_k a(k,i) c_adj(k,j).
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double a_adj = b[j][0] + b[j][1];
        const double b_adj = a[0][i] + a[1][i];
        CHECK(t.adjoint(ar[i][j]) == a_adj);
        CHECK(t.adjoint(br[i][j]) == b_adj);
      }
    }
  }
}

TEST_CASE("callbacks") {
  SUBCASE("fire after later entries and before earlier ones") {
    Tape t;
    const VariableRef x0 = t.record({});
    const VariableRef x1 = t.record({{x0, 2.0}});
    const VariableRef out = t.record({});
    double snapshot_x0 = -1.0;
    CallbackRecord cb;
    cb.inputs = {x1};
    cb.outputs = {out};
    cb.propagate = [&snapshot_x0, x0](const std::shared_ptr<const void>&,
                                      std::span<const VariableRef> inputs,
                                      std::span<const VariableRef> outputs,
                                      Tape& tape) {
      snapshot_x0 = tape.adjoint(x0);
      tape.accumulate_adjoint(inputs[0], 3.0 * tape.adjoint(outputs[0]));
    };
    t.register_callback(std::move(cb));
    t.set_adjoint(out, 1.0);
    t.interpret_reverse();
    CHECK(snapshot_x0 == 0.0);  // entry 1 had not yet propagated
    CHECK(t.adjoint(x1) == 3.0);
    CHECK(t.adjoint(x0) == 6.0);
  }

  SUBCASE("zero output seeds leave inputs unchanged") {
    Tape t;
    const VariableRef in = t.record({});
    const VariableRef out = t.record({});
    CallbackRecord cb;
    cb.inputs = {in};
    cb.outputs = {out};
    cb.propagate = [](const std::shared_ptr<const void>&,
                      std::span<const VariableRef> inputs,
                      std::span<const VariableRef> outputs, Tape& tape) {
      tape.accumulate_adjoint(inputs[0], 10.0 * tape.adjoint(outputs[0]));
    };
    t.register_callback(std::move(cb));
    t.interpret_reverse();
    CHECK(t.adjoint(in) == 0.0);
  }

  SUBCASE("payload scalars feed the stats") {
    Tape t;
    const VariableRef in = t.record({});
    const VariableRef out = t.record({});
    CallbackRecord cb;
    cb.inputs = {in};
    cb.outputs = {out};
    cb.payload_scalars = 8;
    cb.propagate = [](const std::shared_ptr<const void>&,
                      std::span<const VariableRef>,
                      std::span<const VariableRef>, Tape&) {};
    t.register_callback(std::move(cb));
    CHECK(t.stats().num_callback_payload_scalars == 8);
    t.add_payload_scalars(12);
    CHECK(t.stats().num_callback_payload_scalars == 20);
  }

  SUBCASE("empty outputs are rejected") {
    Tape t;
    t.record({});
    CallbackRecord cb;
    cb.inputs = {VariableRef{0}};
    cb.propagate = [](const std::shared_ptr<const void>&,
                      std::span<const VariableRef>,
                      std::span<const VariableRef>, Tape&) {};
    CHECK_THROWS_AS(t.register_callback(std::move(cb)), TapeStateError);
  }

  SUBCASE("positions must strictly increase") {
    Tape t;
    t.record({});
    const VariableRef out = t.record({});
    const auto noop = [](const std::shared_ptr<const void>&,
                         std::span<const VariableRef>,
                         std::span<const VariableRef>, Tape&) {};
    CallbackRecord first;
    first.outputs = {out};
    first.propagate = noop;
    t.register_callback(std::move(first));
    CallbackRecord second;  // same position: no entries since
    second.outputs = {out};
    second.propagate = noop;
    CHECK_THROWS_AS(t.register_callback(std::move(second)), TapeStateError);
    t.record({});
    CallbackRecord third;
    third.outputs = {out};
    third.propagate = noop;
    t.register_callback(std::move(third));  // later position is fine
    CHECK(t.num_callbacks() == 2);
  }

  SUBCASE("rewind keeps callbacks at or before the target position") {
    Tape t;
    const VariableRef out = t.record({});
    CallbackRecord cb;
    cb.outputs = {out};
    cb.propagate = [](const std::shared_ptr<const void>&,
                      std::span<const VariableRef>,
                      std::span<const VariableRef>, Tape&) {};
    t.register_callback(std::move(cb));  // position 1
    t.record({});
    t.rewind_to(1);
    CHECK(t.num_callbacks() == 1);  // boundary callback survives
    t.rewind_to(0);
    CHECK(t.num_callbacks() == 0);
  }

  SUBCASE("outputs must be edge-free and after the inputs") {
    Tape t;
    const VariableRef a = t.record({});
    const VariableRef b = t.record({{a, 1.0}});
    CallbackRecord cb;
    cb.inputs = {a};
    cb.outputs = {b};
    cb.propagate = [](const std::shared_ptr<const void>&,
                      std::span<const VariableRef>,
                      std::span<const VariableRef>, Tape&) {};
    CHECK_THROWS_AS(t.register_callback(std::move(cb)), TapeStateError);
  }
}

TEST_CASE("interpretation is single-shot until reset") {
  Tape t;
  const VariableRef x = t.record({});
  const VariableRef y = t.record({{x, 2.0}});
  t.set_adjoint(y, 1.0);
  t.interpret_reverse();
  CHECK_THROWS_AS(t.interpret_reverse(), TapeStateError);
  t.reset();
  t.record({});
  t.interpret_reverse();  // fresh tape interprets fine
}

TEST_CASE("lifecycle") {
  SUBCASE("rewind truncates entries") {
    Tape t;
    for (int i = 0; i < 5; ++i) t.record({});
    t.rewind_to(2);
    CHECK(t.stats().num_entries == 2);
    CHECK_THROWS_AS(t.rewind_to(3), TapeStateError);
  }

  SUBCASE("rewind drops callbacks, payload accounting, and edges") {
    Tape t;
    const VariableRef a = t.record({});
    t.add_payload_scalars(4);
    const std::uint64_t mark = t.position();
    t.record({{a, 1.0}});
    const VariableRef out = t.record({});
    CallbackRecord cb;
    cb.inputs = {a};
    cb.outputs = {out};
    cb.payload_scalars = 9;
    cb.propagate = [](const std::shared_ptr<const void>&,
                      std::span<const VariableRef>,
                      std::span<const VariableRef>, Tape&) {};
    t.register_callback(std::move(cb));
    t.add_payload_scalars(2);
    t.set_adjoint(a, 5.0);

    t.rewind_to(mark);
    const TapeStats s = t.stats();
    CHECK(s.num_entries == 1);
    CHECK(s.num_edges == 0);
    CHECK(s.num_callback_payload_scalars == 4);
    CHECK(t.num_callbacks() == 0);
    CHECK(t.adjoint(a) == 0.0);  // all adjoints zeroed
  }

  SUBCASE("reset on an empty tape is a no-op") {
    Tape t;
    t.reset();
    CHECK(t.stats() == TapeStats{});
  }

  SUBCASE("identical recordings give identical stats") {
    const auto build = [](Tape& t) {
      const VariableRef a = t.record({});
      const VariableRef b = t.record({{a, 2.5}});
      t.record({{a, 1.0}, {b, -0.5}});
    };
    Tape t;
    build(t);
    const TapeStats first = t.stats();
    t.set_adjoint(VariableRef{2}, 1.0);
    t.interpret_reverse();
    t.reset();
    build(t);
    CHECK(t.stats() == first);
  }
}

TEST_CASE("stats") {
  SUBCASE("empty tape is all zeros") {
    Tape t;
    CHECK(t.stats() == TapeStats{});
  }

  SUBCASE("byte model is 16 per entry, 16 per edge, 8 per payload scalar") {
    Tape t;
    const VariableRef a = t.record({});
    t.record({{a, 1.0}, {a, 2.0}});
    t.add_payload_scalars(3);
    const TapeStats s = t.stats();
    CHECK(s.num_entries == 2);
    CHECK(s.num_edges == 2);
    CHECK(s.estimated_bytes == 2 * 16 + 2 * 16 + 3 * 8);
  }
}

TEST_CASE("non-finite weights are stored and propagate") {
  Tape t;
  const VariableRef x = t.record({});
  const VariableRef y =
      t.record({{x, std::numeric_limits<double>::quiet_NaN()}});
  t.set_adjoint(y, 1.0);
  t.interpret_reverse();
  CHECK(std::isnan(t.adjoint(x)));
}

TEST_CASE("block registration matches repeated empty records") {
  Tape t;
  const VariableRef first = t.record_block(4);
  CHECK(first.index == 0);
  CHECK(t.position() == 4);
  const TapeStats block_stats = t.stats();
  t.reset();
  for (int i = 0; i < 4; ++i) t.record({});
  CHECK(t.stats() == block_stats);
}

TEST_CASE("reverse sweep is linear in the seed") {
  // Power-of-two seed scaling is exact in floating point.
  const auto build_and_run = [](double seed, double adjoints[2]) {
    Tape t;
    const VariableRef x0 = t.record({});
    const VariableRef x1 = t.record({});
    const VariableRef e2 = t.record({{x0, 0.5}, {x1, 1.25}});
    const VariableRef e3 = t.record({{e2, 2.0}, {x0, 3.0}});
    t.set_adjoint(e3, seed);
    t.interpret_reverse();
    adjoints[0] = t.adjoint(x0);
    adjoints[1] = t.adjoint(x1);
  };
  double base[2], doubled[2];
  build_and_run(0.7, base);
  build_and_run(1.4, doubled);
  CHECK(doubled[0] == 2.0 * base[0]);
  CHECK(doubled[1] == 2.0 * base[1]);
}

TEST_CASE("distinct tapes work concurrently from distinct threads") {
  auto worker = [](double scale, double& out) {
    Tape t;
    const VariableRef x = t.record({});
    VariableRef acc = x;
    for (int i = 0; i < 20000; ++i) acc = t.record({{acc, scale}});
    t.set_adjoint(acc, 1.0);
    t.interpret_reverse();
    out = t.adjoint(x);
  };
  double a = 0.0, b = 0.0;
  std::thread ta(worker, 1.0, std::ref(a));
  std::thread tb(worker, -1.0, std::ref(b));
  ta.join();
  tb.join();
  CHECK(a == 1.0);
  CHECK(b == 1.0);  // even chain of -1 weights
}

TEST_CASE("identical recordings produce bit-identical adjoints") {
  const auto run = [](std::vector<double>& out) {
    Rng rng(99);
    Tape t;
    std::vector<VariableRef> refs;
    for (int i = 0; i < 4; ++i) refs.push_back(t.record({}));
    for (int i = 0; i < 40; ++i) {
      const VariableRef a = refs[rng.next_u64() % refs.size()];
      const VariableRef b = refs[rng.next_u64() % refs.size()];
      refs.push_back(t.record({{a, rng.uniform()}, {b, rng.uniform()}}));
    }
    t.set_adjoint(refs.back(), 1.0);
    t.interpret_reverse();
    for (int i = 0; i < 4; ++i) out.push_back(t.adjoint(refs[i]));
  };
  std::vector<double> first, second;
  run(first);
  run(second);
  CHECK(std::memcmp(first.data(), second.data(),
                    first.size() * sizeof(double)) == 0);
}
