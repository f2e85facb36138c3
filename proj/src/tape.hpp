// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace adla {

// Position of a recorded variable on a tape, or the passive sentinel for
// plain constants. Passive refs never receive or contribute adjoints.
struct VariableRef {
  static constexpr std::uint64_t kPassiveIndex =
      std::numeric_limits<std::uint64_t>::max();

  std::uint64_t index = kPassiveIndex;

  [[nodiscard]] bool is_passive() const noexcept {
    return index == kPassiveIndex;
  }
  static constexpr VariableRef passive() noexcept { return {}; }

  friend bool operator==(VariableRef, VariableRef) = default;
};

// A dependency of a new entry: predecessor variable plus the local partial
// derivative of the entry with respect to it.
struct Dep {
  VariableRef ref;
  double weight = 0.0;
};

// One stored edge of the computational graph (target index < owner index).
struct Edge {
  VariableRef target;
  double weight = 0.0;
};

// Counters describing the recorded tape. estimated_bytes follows a fixed
// cost model so measurements stay comparable across implementations:
// 8 bytes per adjoint slot, 8 per entry offset, 8 per edge target,
// 8 per edge weight, 8 per retained payload scalar.
struct TapeStats {
  std::uint64_t num_entries = 0;
  std::uint64_t num_edges = 0;
  std::uint64_t num_callback_payload_scalars = 0;
  std::uint64_t estimated_bytes = 0;

  friend bool operator==(const TapeStats&, const TapeStats&) = default;
};

class Tape;

// A matrix-level derivative rule embedded in the tape. The payload holds
// captured primal data (input matrices, retained factorizations, solution
// vectors); propagate reads the output-adjoint slots and increments the
// input-adjoint slots. It must not mutate the payload or the tape structure.
struct CallbackRecord {
  using PropagateFn =
      std::function<void(const std::shared_ptr<const void>& payload,
                         std::span<const VariableRef> inputs,
                         std::span<const VariableRef> outputs, Tape& tape)>;

  std::shared_ptr<const void> payload;
  std::vector<VariableRef> inputs;
  std::vector<VariableRef> outputs;
  PropagateFn propagate;
  std::uint64_t payload_scalars = 0;
};

// Append-only record of scalar operations interleaved with matrix-level
// callback records. The augmented primal run records entries (one per
// produced variable, with edges to its dependencies weighted by the local
// partials); interpret_reverse() then walks the entries from last to first,
// propagating adjoints along the edges and firing callbacks at their
// recorded positions.
//
// A tape and everything bound to it belong to a single thread. Distinct
// tapes may be used concurrently.
class Tape {
 public:
  Tape() { entry_offsets_.push_back(0); }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Appends one entry whose edges are the non-passive deps, in order.
  // Passive deps are dropped. Weights are stored unchanged; non-finite
  // weights propagate through interpretation like any other value.
  // Throws std::out_of_range if a non-passive dep does not name an
  // existing entry.
  VariableRef record(std::span<const Dep> deps);
  VariableRef record(std::initializer_list<Dep> deps) {
    return record(std::span<const Dep>(deps.begin(), deps.size()));
  }

  // Appends `count` edge-free entries in one step and returns the first
  // ref; equivalent to `count` record({}) calls. Matrix registration uses
  // this to keep per-element bookkeeping off the augmented primal clock.
  VariableRef record_block(std::uint64_t count);

  // Stores a callback at the current entry position. Requirements checked
  // here: at least one output; outputs are existing edge-free entries;
  // every non-passive input was recorded before every output; callback
  // positions are strictly increasing.
  void register_callback(CallbackRecord record);

  // Accounts scalars retained outside callback payloads (e.g. a
  // factorization kept alive for the adjoint run). Rewinding below the
  // current position drops the accounting again.
  void add_payload_scalars(std::uint64_t count);

  // Adjoint slot access. Passive refs cannot be seeded or read.
  void set_adjoint(VariableRef ref, double value);
  void accumulate_adjoint(VariableRef ref, double increment);
  double adjoint(VariableRef ref) const;

  // Direct slot view for bulk gather/scatter inside callbacks (refs were
  // validated at registration; callers skip passive refs themselves).
  // Invalidated by record/reset/rewind.
  std::span<double> adjoint_slots() noexcept {
    return {adjoints_.data(), adjoints_.size()};
  }
  std::span<const double> adjoint_slots() const noexcept {
    return {adjoints_.data(), adjoints_.size()};
  }

  // Reverse sweep: entries from last to first; entry i with adjoint a
  // adds w * a to the adjoint of each edge target (t, w). A callback at
  // position p fires after all entries with index >= p and before entry
  // p-1. Interpreting twice without reset/rewind throws TapeStateError;
  // adjoints are not re-zeroed automatically.
  void interpret_reverse();

  void reset();

  // Number of recorded entries.
  std::uint64_t position() const noexcept {
    return static_cast<std::uint64_t>(entry_offsets_.size() - 1);
  }

  // Truncates entries, edges and callbacks recorded after `position` and
  // zeroes all remaining adjoint slots.
  void rewind_to(std::uint64_t position);

  TapeStats stats() const;

  // Introspection helpers (tests, tools).
  std::vector<Edge> entry_edges(std::uint64_t entry) const;
  std::size_t num_callbacks() const noexcept { return callbacks_.size(); }

 private:
  struct PositionedCallback {
    std::uint64_t position = 0;
    CallbackRecord record;
  };
  struct PayloadEvent {
    std::uint64_t position = 0;
    std::uint64_t scalars = 0;
  };

  void check_valid_entry(VariableRef ref) const;

  // Entries and edges are indexed with 32 bits; record() reports capacity
  // exhaustion past ~4.29e9 of either. Keeps the per-entry footprint small
  // enough that reverse sweeps over large tapes stay bandwidth-friendly.
  std::vector<double> adjoints_;
  std::vector<std::uint32_t> entry_offsets_;  // size = entries + 1
  std::vector<std::uint32_t> edge_targets_;
  std::vector<double> edge_weights_;
  std::vector<PositionedCallback> callbacks_;
  std::vector<PayloadEvent> payload_events_;
  bool interpreted_ = false;
};

}  // namespace adla
