// include/s2i/posteriorgram.hpp

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

#ifndef S2I_POSTERIORGRAM_HPP_
#define S2I_POSTERIORGRAM_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "s2i/common.hpp"
#include "s2i/matrix.hpp"

namespace s2i {

inline constexpr double kDefaultFramePeriod = 0.040;  // seconds

// Ordered character inventory. The silence symbol is an ordinary member at
// a fixed index; nothing downstream strips it.
struct CharacterAlphabet {
  std::string symbols;
  std::size_t silence_index = 0;

  std::size_t size() const { return symbols.size(); }
  char silence() const { return symbols[silence_index]; }
  std::optional<std::size_t> index_of(char c) const;
  void validate() const;
  std::uint64_t digest() const;
};

// T x C natural-log probabilities, one row per frame. Rows log-sum-exp to
// zero; entries may be -inf (an exact zero probability).
struct Posteriorgram {
  Matrix log_frames;
  double frame_period = kDefaultFramePeriod;

  std::size_t num_frames() const { return log_frames.rows(); }
  std::size_t num_symbols() const { return log_frames.cols(); }
  void validate() const;

  // exp of every row; the probability-domain view used by HAC.
  Matrix probabilities() const;
};

// Controls the synthetic stand-in for a character-level acoustic model:
// per-character frame durations, a confusion mixture and silence padding.
struct SynthesisConfig {
  int frames_per_char_min = 1;
  int frames_per_char_max = 3;
  double confusion_noise = 0.0;  // probability mass diverted off the true char
  Matrix confusion;              // C x C row-stochastic; empty selects the
                                 // uniform off-diagonal default
  int silence_pad_min = 1;       // leading/trailing silence frames
  int silence_pad_max = 3;
  std::uint64_t seed = 0;

  void validate(std::size_t alphabet_size) const;
  std::uint64_t digest(std::size_t alphabet_size) const;
};

// Uniform over the non-true characters; the default confusion structure.
Matrix uniform_offdiagonal_confusion(std::size_t alphabet_size);

// Renders a transcript into a log posteriorgram. Every frame of character c
// carries the distribution (1-eps)*onehot(c) + eps*confusion_row(c); the
// randomness is in per-character durations and the silence padding.
// Deterministic for a fixed (transcript, cfg) including cfg.seed.
Posteriorgram synthesize_posteriorgram(std::string_view transcript,
                                       const CharacterAlphabet& alphabet,
                                       const SynthesisConfig& cfg);

// Text format: `T C frame_period` header line, then T rows of C natural-log
// probabilities, ASCII, LF line endings. save is atomic (temp + rename).
void save_posteriorgram(const Posteriorgram& pg,
                        const std::filesystem::path& path);
Posteriorgram load_posteriorgram(const std::filesystem::path& path);

}  // namespace s2i

#endif  // S2I_POSTERIORGRAM_HPP_
