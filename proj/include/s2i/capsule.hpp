// include/s2i/capsule.hpp

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

#ifndef S2I_CAPSULE_HPP_
#define S2I_CAPSULE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "s2i/matrix.hpp"
#include "s2i/posteriorgram.hpp"

namespace s2i {

struct CapsuleConfig {
  std::size_t n_primary = 32;   // hidden capsules
  std::size_t d_primary = 64;   // hidden capsule dimension
  std::size_t d_output = 8;     // output capsule dimension
  int routing_iters = 3;
  double margin_pos = 0.9;      // m+
  double margin_neg = 0.1;      // m-
  double down_weight = 0.5;     // lambda on absent-label terms
  double step_size = 1e-3;
  int epochs = 100;
  std::size_t batch_size = 16;
  bool shuffle_each_epoch = true;
  // Log probabilities are clamped below at this value so exact zero
  // probabilities (log = -inf) stay finite.
  double input_log_floor = -10.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// All trainable parameters. Field order is the serialization order and the
// order the seeded initializer fills.
struct CapsuleParams {
  Vector attention_w;    // C
  double attention_b = 0.0;
  Matrix distributor_w;  // I x C
  Vector distributor_b;  // I
  Vector squash_w;       // I*P*C, entry (i, p, c) at (i*P + p)*C + c
  Vector routing_w;      // I*L*O*P, entry (i,j,o,p) at ((i*L+j)*O+o)*P + p

  void resize(std::size_t c, std::size_t i, std::size_t p, std::size_t o,
              std::size_t l);
  void fill(double v);
  // Mutable views over every parameter group, in declared order.
  std::vector<std::span<double>> views();
};

struct CapsuleModel {
  CapsuleParams params;
  CapsuleConfig config;
  std::size_t alphabet_size = 0;  // C
  std::size_t n_labels = 0;       // L
  std::uint64_t inventory_digest = 0;

  // Mean margin loss per epoch from training. Not serialized.
  std::vector<double> epoch_loss;
};

struct CapsuleForward {
  Matrix outputs;  // L x O, one output capsule vector per label
  Vector lengths;  // L, norms in [0, 1)
};

// Intermediate activations of one forward pass, kept for backprop and for
// the invariant tests (distributor and coupling normalization).
struct CapsuleTrace {
  Matrix inputs;   // T x C clamped log frames
  Vector alpha;    // T
  Matrix delta;    // T x I
  Matrix pooled;   // I x C
  Matrix s_pre;    // I x P
  Matrix s_caps;   // I x P
  Vector u_hat;    // I*L*O
  std::vector<Matrix> coupling;  // per routing iteration, I x L
  std::vector<Matrix> sigma;     // per routing iteration, L x O
  std::vector<Matrix> v;         // per routing iteration, L x O
};

// squash(s) = (|s|^2 / (1 + |s|^2)) * s / |s|, with squash(0) = 0.
void squash(std::span<const double> s, std::span<double> out);

CapsuleForward capsule_forward(const CapsuleModel& model,
                               const Posteriorgram& pg,
                               CapsuleTrace* trace = nullptr);

double capsule_loss(const Vector& lengths, std::size_t true_label,
                    const CapsuleConfig& cfg);

// Margin loss of one utterance plus parameter gradients accumulated into
// `grad` (which must be sized like the model's params). Returns the loss.
double capsule_loss_and_gradients(const CapsuleModel& model,
                                  const Posteriorgram& pg, std::size_t label,
                                  CapsuleParams& grad);

// Mini-batch training with Adam step scaling; gradients flow through the
// unrolled routing iterations. Deterministic given cfg.seed.
CapsuleModel capsule_train(const std::vector<const Posteriorgram*>& inputs,
                           const std::vector<std::size_t>& labels,
                           std::size_t n_labels, const CapsuleConfig& cfg,
                           std::size_t alphabet_size,
                           std::uint64_t inventory_digest = 0);

// argmax over output capsule lengths, ties to the lowest index.
std::size_t capsule_classify(const CapsuleModel& model,
                             const Posteriorgram& pg);

void save_capsule_model(const CapsuleModel& model,
                        const std::filesystem::path& path);
CapsuleModel load_capsule_model(const std::filesystem::path& path);

}  // namespace s2i

#endif  // S2I_CAPSULE_HPP_
