// include/s2i/harness.hpp

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

#ifndef S2I_HARNESS_HPP_
#define S2I_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "s2i/features.hpp"
#include "s2i/posteriorgram.hpp"

namespace s2i {

enum class GrammarKind { kOrderInsensitive, kOrderSensitive };

std::string to_string(GrammarKind kind);
GrammarKind grammar_kind_from_string(const std::string& s);

// A synthetic command language. The order-insensitive kind permutes slot
// words freely (every word multiset names a unique task); the
// order-sensitive kind renders a fixed template over a shared word pool, so
// the same word multiset can name several distinct tasks.
struct Grammar {
  GrammarKind kind = GrammarKind::kOrderInsensitive;
  SlotSchema schema;
  // (slot, value) -> spoken word
  std::map<std::pair<std::string, std::string>, std::string> lexicon;
  // Order-sensitive surface form; "$slot" tokens name slots, anything else
  // is a literal word.
  std::vector<std::string> template_tokens;
  std::vector<std::string> filler_words;  // order-insensitive extras
  double filler_probability = 0.25;
  std::vector<TaskLabel> inventory;
  char silence = '_';
  std::uint64_t seed = 0;

  void validate() const;
  CharacterAlphabet alphabet() const;
  const std::string& word_for(const std::string& slot,
                              const std::string& value) const;
  std::vector<std::string> words_for(const TaskLabel& label) const;
  // Renders one utterance; draws word order / filler choices from rng.
  std::string transcript_for(const TaskLabel& label, Rng& rng) const;
};

// Built-in desk-scale archetypes: a 33-task robot-command language where
// word order carries no meaning, and a 38-task card-move language where it
// does ("pon <source> eta <target>" over a shared card-name pool).
Grammar make_robot_grammar(std::uint64_t seed = 7);
Grammar make_card_grammar(std::uint64_t seed = 7);

struct Utterance {
  std::string id;
  std::string speaker;
  std::string transcript;
  TaskLabel label;
  std::string pg_path;  // relative to the manifest directory
};

struct DatasetManifest {
  GrammarKind grammar_kind = GrammarKind::kOrderInsensitive;
  CharacterAlphabet alphabet;
  double frame_period = kDefaultFramePeriod;
  SlotSchema schema;
  std::vector<TaskLabel> inventory;
  std::string synthesis_digest;
  std::vector<Utterance> utterances;

  void validate() const;
  std::uint64_t inventory_digest() const;
  std::optional<std::size_t> task_index(const TaskLabel& label) const;
  std::vector<std::string> speakers() const;  // distinct, in first-seen order
};

struct GenerationConfig {
  int n_speakers = 5;
  int utterances_per_speaker = 150;
  SynthesisConfig synthesis;  // base seed + noise; confusion is derived
                              // per speaker from the seed
};

// Samples tasks uniformly over the inventory, renders transcripts, draws a
// speaker-specific confusion matrix per speaker and writes one
// posteriorgram file per utterance under out_dir/pg/. Returns the manifest
// (also written to out_dir/manifest.json).
DatasetManifest generate_dataset(const Grammar& grammar,
                                 const GenerationConfig& cfg,
                                 const std::filesystem::path& out_dir);

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace s2i

#endif  // S2I_HARNESS_HPP_
