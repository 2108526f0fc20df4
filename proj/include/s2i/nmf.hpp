// include/s2i/nmf.hpp

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

#ifndef S2I_NMF_HPP_
#define S2I_NMF_HPP_

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "s2i/features.hpp"
#include "s2i/matrix.hpp"

namespace s2i {

struct NmfConfig {
  std::size_t k = 0;       // latent dimension; 0 selects D + 5 at train time
  int train_iters = 200;
  int infer_iters = 100;
  double floor = 1e-12;    // numeric floor for factors and denominators
  double semantic_weight = 1.0;  // beta, scale of the semantic block
  int restarts = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Supervised KL-NMF intent model: stacked dictionary over the semantic and
// acoustic blocks, columns of [W_s; W_a] sum to 1 after training.
struct NmfModel {
  Matrix w_semantic;  // D x K
  Matrix w_acoustic;  // A x K
  NmfConfig config;
  HacConfig hac;
  std::uint64_t schema_digest = 0;

  // Objective trace of the selected restart, one value per training
  // iteration. Not serialized.
  std::vector<double> objective_history;

  std::size_t latent_dim() const { return w_semantic.cols(); }
};

// Multiplicative Lee-Seung updates minimizing generalized KL divergence
// D(V || WH). Exposed so callers (and the tests) can drive explicit
// initializations. Appends the post-iteration objective to `history`.
void kl_nmf_iterate(const Matrix& v, Matrix& w, Matrix& h, int iters,
                    double floor, std::vector<double>* history);

// H-only updates with W frozen (test-time inference).
void kl_nmf_iterate_h(const Matrix& v, const Matrix& w, Matrix& h, int iters,
                      double floor);

// Trains on (semantic, acoustic) column pairs. Acoustic columns are scaled
// to unit sum, the semantic block by cfg.semantic_weight, and the stacked
// matrix is factorized jointly.
NmfModel nmf_train(
    const std::vector<std::pair<SemanticVector, HacVector>>& pairs,
    const NmfConfig& cfg, const SlotSchema& schema);

struct NmfActivation {
  Vector h;
  bool degenerate = false;  // all-zero acoustic input
};

NmfActivation nmf_infer(const NmfModel& model, const HacVector& test);

// Batched inference, one column per test vector. Each column sees the same
// seeded initialization and its updates are independent, so results are
// identical to per-item nmf_infer.
Matrix nmf_infer_batch(const NmfModel& model,
                       const std::vector<const HacVector*>& tests,
                       std::vector<std::uint8_t>* degenerate = nullptr);

// W_s * h: nonnegative semantic prediction of length D.
Vector nmf_predict(const NmfModel& model, const Vector& h);

void save_nmf_model(const NmfModel& model, const std::filesystem::path& path);
NmfModel load_nmf_model(const std::filesystem::path& path);

}  // namespace s2i

#endif  // S2I_NMF_HPP_
