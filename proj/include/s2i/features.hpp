// include/s2i/features.hpp

// Copyright 2026  The s2i authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef S2I_FEATURES_HPP_
#define S2I_FEATURES_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "s2i/common.hpp"
#include "s2i/matrix.hpp"
#include "s2i/posteriorgram.hpp"

namespace s2i {

// Delays are in frames; at the default 40 ms frame period the default set
// {1,2,3,5} spans 40-200 ms.
struct HacConfig {
  std::vector<int> delays = {1, 2, 3, 5};

  void validate() const;
  std::string label() const;  // "1-2-3-5", used in CSV columns
  std::uint64_t digest() const;
  friend bool operator==(const HacConfig& a, const HacConfig& b) {
    return a.delays == b.delays;
  }
};

// Nonnegative co-occurrence embedding of one utterance: one C*C block per
// delay, row-major (earlier frame index, later frame index).
struct HacVector {
  Vector values;
  HacConfig config;
  std::size_t alphabet_size = 0;

  std::size_t size() const { return values.size(); }
};

HacVector hac_encode(const Posteriorgram& pg, const HacConfig& cfg);

// Ordered slot/value inventory; one semantic bit per (slot, value) pair.
struct SlotSchema {
  struct Slot {
    std::string name;
    std::vector<std::string> values;
  };
  std::vector<Slot> slots;

  std::size_t dimension() const;  // D, total value count
  std::optional<std::size_t> bit_index(const std::string& slot,
                                       const std::string& value) const;
  void validate() const;
  std::uint64_t digest() const;
};

// A fully assigned task: every slot of the schema mapped to one value.
struct TaskLabel {
  std::map<std::string, std::string> assignments;

  friend bool operator==(const TaskLabel& a, const TaskLabel& b) {
    return a.assignments == b.assignments;
  }
  friend auto operator<=>(const TaskLabel& a, const TaskLabel& b) {
    return a.assignments <=> b.assignments;
  }
};

// Binary many-hot encoding: exactly one active bit per slot.
struct SemanticVector {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
};

SemanticVector encode_semantics(const TaskLabel& label,
                                const SlotSchema& schema);

struct DecodeResult {
  std::size_t index = 0;   // winning candidate
  bool degenerate = false; // all-zero prediction, fell back to candidate 0
};

// Closed-set decoding: cosine similarity against each candidate's many-hot
// encoding, ties broken by the lowest candidate index.
DecodeResult decode_semantics(const Vector& prediction,
                              const SlotSchema& schema,
                              const std::vector<TaskLabel>& candidates);

}  // namespace s2i

#endif  // S2I_FEATURES_HPP_
