// tests/test_util.hpp

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

#ifndef S2I_TESTS_TEST_UTIL_HPP_
#define S2I_TESTS_TEST_UTIL_HPP_

#include <string>
#include <utility>
#include <vector>

#include "s2i/features.hpp"
#include "s2i/posteriorgram.hpp"

namespace s2i::testutil {

// One-slot, five-word toy language: every task is a single unique word.
struct ToyCorpus {
  CharacterAlphabet alphabet;
  SlotSchema schema;
  std::vector<TaskLabel> inventory;
  std::vector<std::string> words;

  std::string transcript(std::size_t task) const { return words[task]; }
};

inline ToyCorpus make_toy_corpus() {
  ToyCorpus toy;
  toy.alphabet.symbols = "_aeiopktus";
  toy.alphabet.silence_index = 0;
  toy.words = {"apa", "eto", "iki", "opu", "usta"};
  SlotSchema::Slot slot;
  slot.name = "word";
  slot.values = {"w1", "w2", "w3", "w4", "w5"};
  toy.schema.slots = {slot};
  for (const auto& v : slot.values)
    toy.inventory.push_back(TaskLabel{{{"word", v}}});
  return toy;
}

// Noise-free synthesis with duration jitter; distinct seeds give distinct
// utterances of the same word.
inline Posteriorgram toy_utterance(const ToyCorpus& toy, std::size_t task,
                                   std::uint64_t seed, double noise = 0.0) {
  SynthesisConfig cfg;
  cfg.confusion_noise = noise;
  cfg.frames_per_char_min = 1;
  cfg.frames_per_char_max = 3;
  cfg.silence_pad_min = 1;
  cfg.silence_pad_max = 2;
  cfg.seed = seed;
  return synthesize_posteriorgram(toy.transcript(task), toy.alphabet, cfg);
}

// (posteriorgram, task index) pairs: `per_task` utterances of every task.
inline std::vector<std::pair<Posteriorgram, std::size_t>> toy_set(
    const ToyCorpus& toy, std::size_t per_task, std::uint64_t seed_base,
    double noise = 0.0) {
  std::vector<std::pair<Posteriorgram, std::size_t>> out;
  for (std::size_t task = 0; task < toy.words.size(); ++task)
    for (std::size_t k = 0; k < per_task; ++k)
      out.emplace_back(
          toy_utterance(toy, task, seed_base + task * 1000 + k, noise), task);
  return out;
}

}  // namespace s2i::testutil

#endif  // S2I_TESTS_TEST_UTIL_HPP_
