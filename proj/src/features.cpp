// src/features.cpp

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

#include "s2i/features.hpp"

#include <cmath>
#include <set>

#include "s2i/kernels.hpp"

namespace s2i {

void HacConfig::validate() const {
  require(!delays.empty(), ErrorCode::kConfig, "delay list is empty");
  int prev = 0;
  for (const int d : delays) {
    require(d >= 1, ErrorCode::kConfig, "delays must be >= 1");
    require(d > prev, ErrorCode::kConfig, "delays must be strictly increasing");
    prev = d;
  }
}

std::string HacConfig::label() const {
  std::string out;
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(delays[i]);
  }
  return out;
}

std::uint64_t HacConfig::digest() const { return fnv1a(label()); }

HacVector hac_encode(const Posteriorgram& pg, const HacConfig& cfg) {
  cfg.validate();
  const std::size_t t_dim = pg.num_frames();
  bool any_pair = false;
  for (const int d : cfg.delays)
    if (t_dim > static_cast<std::size_t>(d)) any_pair = true;
  if (!any_pair)
    warn("hac_encode: no frame pairs exist for any delay, result is all-zero");

  const Matrix probs = pg.probabilities();
  HacVector hac;
  hac.config = cfg;
  hac.alphabet_size = pg.num_symbols();
  kernels::hac_accumulate(probs, cfg.delays, hac.values);
  return hac;
}

std::size_t SlotSchema::dimension() const {
  std::size_t d = 0;
  for (const auto& slot : slots) d += slot.values.size();
  return d;
}

std::optional<std::size_t> SlotSchema::bit_index(const std::string& slot,
                                                 const std::string& value) const {
  std::size_t base = 0;
  for (const auto& s : slots) {
    if (s.name == slot) {
      for (std::size_t i = 0; i < s.values.size(); ++i)
        if (s.values[i] == value) return base + i;
      return std::nullopt;
    }
    base += s.values.size();
  }
  return std::nullopt;
}

void SlotSchema::validate() const {
  require(dimension() >= 1, ErrorCode::kConfig, "schema has no values");
  std::set<std::string> names;
  for (const auto& slot : slots) {
    require(names.insert(slot.name).second, ErrorCode::kConfig,
            "duplicate slot name: " + slot.name);
    std::set<std::string> values(slot.values.begin(), slot.values.end());
    require(values.size() == slot.values.size(), ErrorCode::kConfig,
            "duplicate value in slot: " + slot.name);
  }
}

std::uint64_t SlotSchema::digest() const {
  std::string canon;
  for (const auto& slot : slots) {
    canon += slot.name + "=";
    for (const auto& v : slot.values) canon += v + "|";
    canon += ";";
  }
  return fnv1a(canon);
}

SemanticVector encode_semantics(const TaskLabel& label,
                                const SlotSchema& schema) {
  SemanticVector out;
  out.bits.assign(schema.dimension(), 0);
  for (const auto& slot : schema.slots) {
    const auto it = label.assignments.find(slot.name);
    require(it != label.assignments.end(), ErrorCode::kConfig,
            "label missing slot: " + slot.name);
    const auto bit = schema.bit_index(slot.name, it->second);
    require(bit.has_value(), ErrorCode::kConfig,
            "value '" + it->second + "' not in schema slot '" + slot.name +
                "'");
    out.bits[*bit] = 1;
  }
  require(label.assignments.size() == schema.slots.size(), ErrorCode::kConfig,
          "label assigns a slot not in the schema");
  return out;
}

DecodeResult decode_semantics(const Vector& prediction,
                              const SlotSchema& schema,
                              const std::vector<TaskLabel>& candidates) {
  require(!candidates.empty(), ErrorCode::kConfig, "no candidates to decode");
  require(prediction.size() == schema.dimension(), ErrorCode::kConfig,
          "prediction length does not match schema dimension");

  double pred_norm_sq = 0.0;
  for (const double v : prediction) pred_norm_sq += v * v;
  if (pred_norm_sq == 0.0) {
    warn("decode_semantics: all-zero prediction, returning first candidate");
    return {0, true};
  }
  const double pred_norm = std::sqrt(pred_norm_sq);

  DecodeResult best{0, false};
  double best_score = -1.0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const SemanticVector enc = encode_semantics(candidates[k], schema);
    double dot = 0.0;
    double enc_norm_sq = 0.0;
    for (std::size_t i = 0; i < enc.bits.size(); ++i) {
      if (enc.bits[i]) {
        dot += prediction[i];
        enc_norm_sq += 1.0;
      }
    }
    const double score = dot / (pred_norm * std::sqrt(enc_norm_sq));
    if (score > best_score) {
      best_score = score;
      best.index = k;
    }
  }
  return best;
}

}  // namespace s2i
