// include/s2i/curve.hpp

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

#ifndef S2I_CURVE_HPP_
#define S2I_CURVE_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "s2i/capsule.hpp"
#include "s2i/harness.hpp"
#include "s2i/nmf.hpp"

namespace s2i {

enum class DecoderKind { kNmf, kCapsule };

std::string to_string(DecoderKind kind);
DecoderKind decoder_kind_from_string(const std::string& s);

// Learning-curve protocol: per speaker and fold, shuffle that speaker's
// utterances, split them into `blocks` near-equal blocks, train on the
// first m blocks and test on the rest for every requested m.
struct CurveSpec {
  int blocks = 15;
  int folds = 5;
  DecoderKind decoder = DecoderKind::kNmf;
  HacConfig hac;         // NMF only
  NmfConfig nmf;
  CapsuleConfig capsule;
  std::uint64_t seed = 1;
  int jobs = 1;
  // Subset of training sizes to evaluate; empty means all of 1..blocks-1.
  std::vector<int> train_sizes;

  void validate() const;
  std::vector<int> effective_sizes() const;
};

struct CurveCell {
  std::string speaker;
  int fold = 0;
  int m = 0;
  double accuracy = 0.0;
};

struct LearningCurve {
  DecoderKind decoder = DecoderKind::kNmf;
  std::string delay_label;      // "1-2-3-5" for NMF runs, "-" otherwise
  std::vector<int> sizes;       // evaluated m values, ascending
  std::vector<CurveCell> raw;   // every (speaker, fold, m) cell
  std::vector<double> mean;     // per size, over speakers x folds
  std::vector<double> stderr_;  // sample standard error per size

  double mean_at(int m) const;
};

// Runs the protocol over every (speaker, fold, m) cell; cells are
// independent jobs executed on spec.jobs threads with results merged by
// cell index, so parallel and serial runs are identical. Split integrity
// (disjoint, exhaustive, balanced blocks) is verified on every cell.
LearningCurve run_learning_curve(const DatasetManifest& manifest,
                                 const std::filesystem::path& root,
                                 const CurveSpec& spec);

// Paired comparison across HAC delay sets: identical (speaker, fold, m)
// splits for every set. Requires the NMF decoder.
std::vector<LearningCurve> run_delay_ablation(
    const DatasetManifest& manifest, const std::filesystem::path& root,
    const CurveSpec& base, const std::vector<HacConfig>& delay_sets);

// CSV emission. Raw: `speaker,fold,m,delay_set,decoder,accuracy`.
// Aggregated: `m,mean_accuracy,stderr`. Gaps: per-m differences of each
// curve's mean against the first curve.
std::string raw_csv(const std::vector<LearningCurve>& curves);
std::string aggregated_csv(const LearningCurve& curve);
std::string gaps_csv(const std::vector<LearningCurve>& curves);

}  // namespace s2i

#endif  // S2I_CURVE_HPP_
