// SPDX-License-Identifier: Apache-2.0
#include "tape.hpp"

#include <algorithm>
#include <stdexcept>

#include "errors.hpp"

namespace adla {

namespace {
// Targets and offsets are stored as 32-bit indices; entry and edge counts
// must stay below this bound so every recordable position fits.
constexpr std::uint64_t kMaxEntries = 0xfffffffeull;
constexpr std::uint64_t kMaxEdges = 0xfffffffeull;
}  // namespace

void Tape::check_valid_entry(VariableRef ref) const {
  if (ref.is_passive()) {
    throw TapeStateError("passive variables carry no adjoint slot");
  }
  if (ref.index >= position()) {
    throw std::out_of_range("variable ref past the end of the tape");
  }
}

VariableRef Tape::record(std::span<const Dep> deps) {
  const std::uint64_t index = position();
  if (index >= kMaxEntries) {
    throw std::length_error("tape entry capacity exhausted");
  }
  for (const Dep& dep : deps) {
    if (dep.ref.is_passive()) continue;
    if (dep.ref.index >= index) {
      throw std::out_of_range("dep ref must name an earlier entry");
    }
    edge_targets_.push_back(static_cast<std::uint32_t>(dep.ref.index));
    edge_weights_.push_back(dep.weight);
  }
  if (edge_targets_.size() >= kMaxEdges) {
    throw std::length_error("tape edge capacity exhausted");
  }
  entry_offsets_.push_back(static_cast<std::uint32_t>(edge_targets_.size()));
  adjoints_.push_back(0.0);
  return VariableRef{index};
}

VariableRef Tape::record_block(std::uint64_t count) {
  const std::uint64_t first = position();
  if (first + count > kMaxEntries) {
    throw std::length_error("tape entry capacity exhausted");
  }
  entry_offsets_.resize(entry_offsets_.size() + count,
                        static_cast<std::uint32_t>(edge_targets_.size()));
  adjoints_.resize(adjoints_.size() + count, 0.0);
  return VariableRef{first};
}

void Tape::register_callback(CallbackRecord record) {
  if (record.outputs.empty()) {
    throw TapeStateError("callback with no outputs can never fire");
  }
  if (!record.propagate) {
    throw TapeStateError("callback without a propagate rule");
  }
  const std::uint64_t pos = position();
  if (!callbacks_.empty() && callbacks_.back().position >= pos) {
    throw TapeStateError("callback positions must be strictly increasing");
  }
  std::uint64_t min_output = VariableRef::kPassiveIndex;
  for (VariableRef out : record.outputs) {
    check_valid_entry(out);
    if (entry_offsets_[out.index + 1] != entry_offsets_[out.index]) {
      throw TapeStateError("callback outputs must be edge-free entries");
    }
    min_output = std::min(min_output, out.index);
  }
  for (VariableRef in : record.inputs) {
    if (in.is_passive()) continue;
    if (in.index >= min_output) {
      throw TapeStateError("callback inputs must precede its outputs");
    }
  }
  callbacks_.push_back({pos, std::move(record)});
}

void Tape::add_payload_scalars(std::uint64_t count) {
  if (count == 0) return;
  payload_events_.push_back({position(), count});
}

void Tape::set_adjoint(VariableRef ref, double value) {
  check_valid_entry(ref);
  adjoints_[ref.index] = value;
}

void Tape::accumulate_adjoint(VariableRef ref, double increment) {
  check_valid_entry(ref);
  adjoints_[ref.index] += increment;
}

double Tape::adjoint(VariableRef ref) const {
  check_valid_entry(ref);
  return adjoints_[ref.index];
}

void Tape::interpret_reverse() {
  if (interpreted_) {
    throw TapeStateError(
        "tape already interpreted; reset or rewind before interpreting again");
  }
  interpreted_ = true;
  const auto fire = [this](const PositionedCallback& positioned) {
    const CallbackRecord& cb = positioned.record;
    cb.propagate(cb.payload, std::span<const VariableRef>(cb.inputs),
                 std::span<const VariableRef>(cb.outputs), *this);
  };
  // Entries [lo, hi) in reverse order. Offsets are nondecreasing, so equal
  // endpoint offsets mean the whole range is edge-free and propagates
  // nothing.
  const auto process_range = [this](std::uint64_t lo, std::uint64_t hi) {
    if (entry_offsets_[lo] == entry_offsets_[hi]) return;
    for (std::uint64_t i = hi; i-- > lo;) {
      const std::uint64_t begin = entry_offsets_[i];
      const std::uint64_t end = entry_offsets_[i + 1];
      if (begin == end) continue;
      const double a = adjoints_[i];
      for (std::uint64_t e = begin; e < end; ++e) {
        adjoints_[edge_targets_[e]] += edge_weights_[e] * a;
      }
    }
  };
  std::uint64_t hi = position();
  for (auto callback = callbacks_.rbegin(); callback != callbacks_.rend();
       ++callback) {
    process_range(callback->position, hi);
    fire(*callback);
    hi = callback->position;
  }
  process_range(0, hi);
}

void Tape::reset() {
  adjoints_.clear();
  entry_offsets_.assign(1, 0);
  edge_targets_.clear();
  edge_weights_.clear();
  callbacks_.clear();
  payload_events_.clear();
  interpreted_ = false;
}

void Tape::rewind_to(std::uint64_t position_) {
  if (position_ > position()) {
    throw TapeStateError("cannot rewind past the current position");
  }
  entry_offsets_.resize(position_ + 1);
  const std::uint64_t edge_count = entry_offsets_.back();
  edge_targets_.resize(edge_count);
  edge_weights_.resize(edge_count);
  adjoints_.assign(position_, 0.0);
  while (!callbacks_.empty() && callbacks_.back().position > position_) {
    callbacks_.pop_back();
  }
  while (!payload_events_.empty() &&
         payload_events_.back().position > position_) {
    payload_events_.pop_back();
  }
  interpreted_ = false;
}

TapeStats Tape::stats() const {
  TapeStats s;
  s.num_entries = position();
  s.num_edges = static_cast<std::uint64_t>(edge_targets_.size());
  for (const PositionedCallback& cb : callbacks_) {
    s.num_callback_payload_scalars += cb.record.payload_scalars;
  }
  for (const PayloadEvent& ev : payload_events_) {
    s.num_callback_payload_scalars += ev.scalars;
  }
  s.estimated_bytes = 16 * s.num_entries + 16 * s.num_edges +
                      8 * s.num_callback_payload_scalars;
  return s;
}

std::vector<Edge> Tape::entry_edges(std::uint64_t entry) const {
  if (entry >= position()) {
    throw std::out_of_range("entry index past the end of the tape");
  }
  std::vector<Edge> edges;
  for (std::uint64_t e = entry_offsets_[entry]; e < entry_offsets_[entry + 1];
       ++e) {
    edges.push_back(Edge{VariableRef{edge_targets_[e]}, edge_weights_[e]});
  }
  return edges;
}

}  // namespace adla
