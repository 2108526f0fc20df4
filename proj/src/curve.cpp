// src/curve.cpp

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

#include "s2i/curve.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>

namespace s2i {

std::string to_string(DecoderKind kind) {
  return kind == DecoderKind::kNmf ? "nmf" : "capsule";
}

DecoderKind decoder_kind_from_string(const std::string& s) {
  if (s == "nmf") return DecoderKind::kNmf;
  if (s == "capsule") return DecoderKind::kCapsule;
  throw Error(ErrorCode::kConfig, "unknown decoder: " + s);
}

void CurveSpec::validate() const {
  require(blocks >= 2, ErrorCode::kConfig, "blocks must be >= 2");
  require(folds >= 2, ErrorCode::kConfig, "folds must be >= 2");
  require(jobs >= 1, ErrorCode::kConfig, "jobs must be >= 1");
  if (decoder == DecoderKind::kNmf) hac.validate();
  nmf.validate();
  capsule.validate();
  for (const int m : train_sizes)
    require(m >= 1 && m <= blocks - 1, ErrorCode::kConfig,
            "train size out of range: " + std::to_string(m));
}

std::vector<int> CurveSpec::effective_sizes() const {
  if (!train_sizes.empty()) {
    std::vector<int> sizes = train_sizes;
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
    return sizes;
  }
  std::vector<int> sizes(static_cast<std::size_t>(blocks - 1));
  std::iota(sizes.begin(), sizes.end(), 1);
  return sizes;
}

double LearningCurve::mean_at(int m) const {
  for (std::size_t i = 0; i < sizes.size(); ++i)
    if (sizes[i] == m) return mean[i];
  throw Error(ErrorCode::kConfig,
              "no curve point at m=" + std::to_string(m));
}

namespace {

struct SpeakerGroup {
  std::string name;
  std::vector<std::size_t> utterances;  // indices into the manifest order
};

// Splits `shuffled` into `blocks` near-equal blocks (leading blocks take
// the remainder) and returns the first sum(0..m) as train, rest as test.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

Split block_split(const std::vector<std::size_t>& shuffled, int blocks,
                  int m) {
  const std::size_t n = shuffled.size();
  const std::size_t b = static_cast<std::size_t>(blocks);
  const std::size_t base = n / b;
  const std::size_t rem = n % b;
  std::vector<std::size_t> block_sizes(b, base);
  for (std::size_t i = 0; i < rem; ++i) ++block_sizes[i];

  // Partition integrity: balanced non-empty blocks.
  for (const std::size_t s : block_sizes) {
    require(s >= 1, ErrorCode::kConfig, "empty learning-curve block");
    require(s + 1 >= block_sizes[0] && s <= block_sizes[0],
            ErrorCode::kNumeric, "unbalanced learning-curve blocks");
  }

  std::size_t train_count = 0;
  for (int i = 0; i < m; ++i)
    train_count += block_sizes[static_cast<std::size_t>(i)];
  Split split;
  split.train.assign(shuffled.begin(),
                     shuffled.begin() + static_cast<std::ptrdiff_t>(train_count));
  split.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(train_count),
                    shuffled.end());
  return split;
}

// Leakage check, run on every cell: train and test must be disjoint and
// together must be exactly the speaker's utterance set.
void verify_split(const Split& split, std::vector<std::size_t> universe) {
  std::vector<std::size_t> merged = split.train;
  merged.insert(merged.end(), split.test.begin(), split.test.end());
  require(merged.size() == universe.size(), ErrorCode::kNumeric,
          "split does not cover the speaker's utterances");
  std::sort(merged.begin(), merged.end());
  require(std::adjacent_find(merged.begin(), merged.end()) == merged.end(),
          ErrorCode::kNumeric, "train/test leakage detected");
  std::sort(universe.begin(), universe.end());
  require(merged == universe, ErrorCode::kNumeric,
          "split id mismatch against the speaker's utterances");
}

struct PreparedData {
  std::vector<Posteriorgram> pgs;           // by utterance index
  std::vector<std::size_t> label_index;     // by utterance index
  std::vector<SemanticVector> semantics;    // by utterance index
  std::vector<HacVector> hacs;              // NMF only
  std::vector<SpeakerGroup> speakers;
};

PreparedData prepare(const DatasetManifest& manifest,
                     const std::filesystem::path& root,
                     const CurveSpec& spec) {
  PreparedData data;
  data.pgs.reserve(manifest.utterances.size());
  data.label_index.reserve(manifest.utterances.size());
  for (const auto& utt : manifest.utterances) {
    Posteriorgram pg = load_posteriorgram(root / utt.pg_path);
    require(pg.num_symbols() == manifest.alphabet.size(),
            ErrorCode::kIncompatible,
            "posteriorgram/alphabet size mismatch for " + utt.id);
    data.pgs.push_back(std::move(pg));
    const auto idx = manifest.task_index(utt.label);
    data.label_index.push_back(*idx);
    data.semantics.push_back(encode_semantics(utt.label, manifest.schema));
  }
  if (spec.decoder == DecoderKind::kNmf) {
    data.hacs.reserve(data.pgs.size());
    for (const auto& pg : data.pgs) data.hacs.push_back(hac_encode(pg, spec.hac));
  }
  for (const auto& name : manifest.speakers()) {
    SpeakerGroup group;
    group.name = name;
    for (std::size_t i = 0; i < manifest.utterances.size(); ++i)
      if (manifest.utterances[i].speaker == name)
        group.utterances.push_back(i);
    require(group.utterances.size() >= static_cast<std::size_t>(spec.blocks),
            ErrorCode::kConfig,
            "speaker " + name + " has fewer utterances than blocks");
    data.speakers.push_back(std::move(group));
  }
  return data;
}

double run_cell_nmf(const PreparedData& data, const DatasetManifest& manifest,
                    const CurveSpec& spec, const Split& split,
                    std::uint64_t cell_seed) {
  std::vector<std::pair<SemanticVector, HacVector>> pairs;
  pairs.reserve(split.train.size());
  for (const std::size_t idx : split.train)
    pairs.emplace_back(data.semantics[idx], data.hacs[idx]);
  NmfConfig cfg = spec.nmf;
  cfg.seed = cell_seed;
  const NmfModel model = nmf_train(pairs, cfg, manifest.schema);

  std::vector<const HacVector*> tests;
  tests.reserve(split.test.size());
  for (const std::size_t idx : split.test) tests.push_back(&data.hacs[idx]);
  const Matrix h = nmf_infer_batch(model, tests);

  std::size_t correct = 0;
  Vector activation(model.latent_dim());
  for (std::size_t t = 0; t < split.test.size(); ++t) {
    for (std::size_t k = 0; k < activation.size(); ++k)
      activation[k] = h(k, t);
    const Vector prediction = nmf_predict(model, activation);
    const DecodeResult decoded =
        decode_semantics(prediction, manifest.schema, manifest.inventory);
    if (decoded.index == data.label_index[split.test[t]]) ++correct;
  }
  return static_cast<double>(correct) /
         static_cast<double>(split.test.size());
}

double run_cell_capsule(const PreparedData& data,
                        const DatasetManifest& manifest,
                        const CurveSpec& spec, const Split& split,
                        std::uint64_t cell_seed) {
  std::vector<const Posteriorgram*> inputs;
  std::vector<std::size_t> labels;
  inputs.reserve(split.train.size());
  for (const std::size_t idx : split.train) {
    inputs.push_back(&data.pgs[idx]);
    labels.push_back(data.label_index[idx]);
  }
  CapsuleConfig cfg = spec.capsule;
  cfg.seed = cell_seed;
  const CapsuleModel model =
      capsule_train(inputs, labels, manifest.inventory.size(), cfg,
                    manifest.alphabet.size(), manifest.inventory_digest());

  std::size_t correct = 0;
  for (const std::size_t idx : split.test)
    if (capsule_classify(model, data.pgs[idx]) == data.label_index[idx])
      ++correct;
  return static_cast<double>(correct) /
         static_cast<double>(split.test.size());
}

}  // namespace

LearningCurve run_learning_curve(const DatasetManifest& manifest,
                                 const std::filesystem::path& root,
                                 const CurveSpec& spec) {
  spec.validate();
  manifest.validate();
  const PreparedData data = prepare(manifest, root, spec);
  const std::vector<int> sizes = spec.effective_sizes();

  struct Cell {
    std::size_t speaker;
    int fold;
    int m;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < data.speakers.size(); ++s)
    for (int fold = 1; fold <= spec.folds; ++fold)
      for (const int m : sizes) cells.push_back({s, fold, m});

  LearningCurve curve;
  curve.decoder = spec.decoder;
  curve.delay_label =
      spec.decoder == DecoderKind::kNmf ? spec.hac.label() : "-";
  curve.sizes = sizes;
  curve.raw.assign(cells.size(), CurveCell{});

  std::exception_ptr failure = nullptr;
  std::mutex failure_mutex;
  const std::int64_t n_cells = static_cast<std::int64_t>(cells.size());
#pragma omp parallel for num_threads(spec.jobs) schedule(dynamic)
  for (std::int64_t c = 0; c < n_cells; ++c) {
    try {
      const Cell& cell = cells[static_cast<std::size_t>(c)];
      const SpeakerGroup& group = data.speakers[cell.speaker];
      const std::uint64_t speaker_hash = fnv1a(group.name);

      // Shuffles are keyed by (seed, speaker, fold) only, so every delay
      // set and decoder sees the same paired splits.
      std::vector<std::size_t> shuffled = group.utterances;
      Rng rng(mix_seed(spec.seed, "shuffle", speaker_hash,
                       static_cast<std::uint64_t>(cell.fold)));
      rng.shuffle(shuffled);
      const Split split = block_split(shuffled, spec.blocks, cell.m);
      verify_split(split, group.utterances);

      const std::uint64_t cell_seed =
          mix_seed(spec.seed, "decoder", speaker_hash,
                   static_cast<std::uint64_t>(cell.fold),
                   static_cast<std::uint64_t>(cell.m));
      const double accuracy =
          spec.decoder == DecoderKind::kNmf
              ? run_cell_nmf(data, manifest, spec, split, cell_seed)
              : run_cell_capsule(data, manifest, spec, split, cell_seed);
      curve.raw[static_cast<std::size_t>(c)] =
          CurveCell{group.name, cell.fold, cell.m, accuracy};
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  curve.mean.assign(sizes.size(), 0.0);
  curve.stderr_.assign(sizes.size(), 0.0);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    Vector values;
    for (const auto& cell : curve.raw)
      if (cell.m == sizes[i]) values.push_back(cell.accuracy);
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (const double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (const double v : values) var += (v - mean) * (v - mean);
    curve.mean[i] = mean;
    curve.stderr_[i] =
        values.size() > 1 ? std::sqrt(var / (n - 1.0)) / std::sqrt(n) : 0.0;
  }
  return curve;
}

std::vector<LearningCurve> run_delay_ablation(
    const DatasetManifest& manifest, const std::filesystem::path& root,
    const CurveSpec& base, const std::vector<HacConfig>& delay_sets) {
  require(base.decoder == DecoderKind::kNmf, ErrorCode::kConfig,
          "delay ablation requires the nmf decoder");
  require(!delay_sets.empty(), ErrorCode::kConfig, "no delay sets given");
  std::vector<LearningCurve> curves;
  curves.reserve(delay_sets.size());
  for (const auto& ds : delay_sets) {
    CurveSpec spec = base;
    spec.hac = ds;
    curves.push_back(run_learning_curve(manifest, root, spec));
  }
  return curves;
}

std::string raw_csv(const std::vector<LearningCurve>& curves) {
  std::string out = "speaker,fold,m,delay_set,decoder,accuracy\n";
  for (const auto& curve : curves) {
    for (const auto& cell : curve.raw) {
      out += cell.speaker + "," + std::to_string(cell.fold) + "," +
             std::to_string(cell.m) + "," + curve.delay_label + "," +
             to_string(curve.decoder) + "," + format_g17(cell.accuracy) +
             "\n";
    }
  }
  return out;
}

std::string aggregated_csv(const LearningCurve& curve) {
  std::string out = "m,mean_accuracy,stderr\n";
  for (std::size_t i = 0; i < curve.sizes.size(); ++i)
    out += std::to_string(curve.sizes[i]) + "," + format_g17(curve.mean[i]) +
           "," + format_g17(curve.stderr_[i]) + "\n";
  return out;
}

std::string gaps_csv(const std::vector<LearningCurve>& curves) {
  require(!curves.empty(), ErrorCode::kConfig, "no curves");
  std::string out = "m";
  for (const auto& c : curves) out += ",mean_" + c.delay_label;
  for (std::size_t i = 1; i < curves.size(); ++i)
    out += ",gap_" + curves[i].delay_label + "_vs_" + curves[0].delay_label;
  out += "\n";
  for (std::size_t row = 0; row < curves[0].sizes.size(); ++row) {
    out += std::to_string(curves[0].sizes[row]);
    for (const auto& c : curves) out += "," + format_g17(c.mean[row]);
    for (std::size_t i = 1; i < curves.size(); ++i)
      out += "," + format_g17(curves[i].mean[row] - curves[0].mean[row]);
    out += "\n";
  }
  return out;
}

}  // namespace s2i
