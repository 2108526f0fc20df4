// tests/test_capsule.cpp

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

#include <cmath>
#include <filesystem>
#include <limits>

#include <doctest.h>

#include "s2i/capsule.hpp"
#include "test_util.hpp"

using namespace s2i;
namespace fs = std::filesystem;

namespace {

Posteriorgram random_pg(std::size_t t_dim, std::size_t c_dim, Rng& rng) {
  Posteriorgram pg;
  pg.log_frames = Matrix(t_dim, c_dim);
  for (std::size_t t = 0; t < t_dim; ++t) {
    double sum = 0.0;
    Vector row(c_dim);
    for (auto& v : row) {
      v = rng.uniform(0.05, 1.0);
      sum += v;
    }
    for (std::size_t c = 0; c < c_dim; ++c)
      pg.log_frames(t, c) = std::log(row[c] / sum);
  }
  return pg;
}

CapsuleModel random_model(std::size_t c_dim, std::size_t i_dim,
                          std::size_t p_dim, std::size_t o_dim,
                          std::size_t l_dim, std::uint64_t seed,
                          double scale = 0.4) {
  CapsuleModel model;
  model.alphabet_size = c_dim;
  model.n_labels = l_dim;
  model.config.n_primary = i_dim;
  model.config.d_primary = p_dim;
  model.config.d_output = o_dim;
  model.params.resize(c_dim, i_dim, p_dim, o_dim, l_dim);
  Rng rng(seed);
  for (auto view : model.params.views())
    for (double& p : view) p = rng.uniform(-scale, scale);
  return model;
}

double norm(std::span<const double> v) {
  double n2 = 0.0;
  for (const double x : v) n2 += x * x;
  return std::sqrt(n2);
}

}  // namespace

TEST_SUITE("capsule") {

TEST_CASE("squash of the zero vector is the zero vector") {
  Vector s(4, 0.0);
  Vector out(4, 1.0);
  squash(s, out);
  for (const double v : out) CHECK(v == 0.0);
}

TEST_CASE("squash of a unit vector halves it") {
  Vector s = {1.0, 0.0, 0.0};
  Vector out(3);
  squash(s, out);
  CHECK(out[0] == doctest::Approx(0.5));
  CHECK(out[1] == 0.0);
  CHECK(norm(out) == doctest::Approx(0.5));
}

TEST_CASE("squash keeps every output below unit length") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Vector s(5);
    const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
    for (auto& v : s) v = rng.uniform(-1.0, 1.0) * scale;
    Vector out(5);
    squash(s, out);
    CHECK(norm(out) < 1.0);
  }
}

TEST_CASE("squash norm approaches the squared input norm near zero") {
  Vector s = {1e-4, 0.0};
  Vector out(2);
  squash(s, out);
  CHECK(norm(out) == doctest::Approx(1e-8).epsilon(0.01));
}

TEST_CASE("distributor, attention and coupling normalization") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const CapsuleModel model =
        random_model(4, 3, 5, 2, 3, 1000 + static_cast<std::uint64_t>(trial));
    const Posteriorgram pg = random_pg(7, 4, rng);
    CapsuleTrace trace;
    capsule_forward(model, pg, &trace);
    for (std::size_t t = 0; t < pg.num_frames(); ++t) {
      CHECK(trace.alpha[t] > 0.0);
      CHECK(trace.alpha[t] < 1.0);
      double sum = 0.0;
      for (const double d : trace.delta.row(t)) sum += d;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (const Matrix& coupling : trace.coupling) {
      REQUIRE(coupling.rows() == 3);
      for (std::size_t i = 0; i < coupling.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < coupling.cols(); ++j)
          sum += coupling(i, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("margin loss matches hand-computed values") {
  CapsuleConfig cfg;
  SUBCASE("at the margins the loss vanishes") {
    Vector lengths = {cfg.margin_pos, cfg.margin_neg, cfg.margin_neg};
    CHECK(capsule_loss(lengths, 0, cfg) == doctest::Approx(0.0));
  }
  SUBCASE("all-zero lengths cost the squared positive margin") {
    Vector lengths(4, 0.0);
    CHECK(capsule_loss(lengths, 2, cfg) == doctest::Approx(0.81));
  }
  SUBCASE("random lengths match an independent evaluator") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
      Vector lengths(5);
      for (auto& v : lengths) v = rng.uniform(0.0, 1.0);
      const std::size_t truth = rng.index(5);
      // Independent re-implementation.
      double expected = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        const double present = cfg.margin_pos - lengths[k];
        const double absent = lengths[k] - cfg.margin_neg;
        if (k == truth && present > 0.0) expected += present * present;
        if (k != truth && absent > 0.0)
          expected += cfg.down_weight * absent * absent;
      }
      CHECK(capsule_loss(lengths, truth, cfg) ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  // Tiny model: C=3, I=2, P=4, O=2, L=2, T=5.
  CapsuleModel model = random_model(3, 2, 4, 2, 2, 505);
  Rng rng(66);
  const Posteriorgram pg = random_pg(5, 3, rng);
  const std::size_t label = 1;

  CapsuleParams grad;
  grad.resize(3, 2, 4, 2, 2);
  grad.fill(0.0);
  capsule_loss_and_gradients(model, pg, label, grad);

  const double h = 1e-5;
  auto params = model.params.views();
  auto grads = grad.views();
  double max_rel = 0.0;
  for (std::size_t group = 0; group < params.size(); ++group) {
    for (std::size_t i = 0; i < params[group].size(); ++i) {
      double& p = params[group][i];
      const double saved = p;
      p = saved + h;
      const CapsuleForward plus = capsule_forward(model, pg);
      const double lp = capsule_loss(plus.lengths, label, model.config);
      p = saved - h;
      const CapsuleForward minus = capsule_forward(model, pg);
      const double lm = capsule_loss(minus.lengths, label, model.config);
      p = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = grads[group][i];
      const double scale =
          std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      max_rel = std::max(max_rel, std::abs(numeric - analytic) / scale);
    }
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("forward output is invariant to frame permutations") {
  Rng rng(13);
  const CapsuleModel model = random_model(5, 4, 6, 3, 4, 999);
  const Posteriorgram pg = random_pg(9, 5, rng);
  const CapsuleForward base = capsule_forward(model, pg);

  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> perm(pg.num_frames());
    for (std::size_t t = 0; t < perm.size(); ++t) perm[t] = t;
    rng.shuffle(perm);
    Posteriorgram shuffled;
    shuffled.log_frames = Matrix(pg.num_frames(), 5);
    for (std::size_t t = 0; t < perm.size(); ++t)
      for (std::size_t c = 0; c < 5; ++c)
        shuffled.log_frames(t, c) = pg.log_frames(perm[t], c);
    const CapsuleForward permuted = capsule_forward(model, shuffled);
    for (std::size_t j = 0; j < base.lengths.size(); ++j)
      CHECK(std::abs(base.lengths[j] - permuted.lengths[j]) <= 1e-12);
  }
}

TEST_CASE("routing weights that feed one output capsule force that label") {
  CapsuleModel model = random_model(4, 3, 5, 2, 4, 77);
  // Zero every routing block except output capsule 2.
  const std::size_t l_dim = 4;
  const std::size_t o_dim = 2;
  const std::size_t p_dim = 5;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < l_dim; ++j)
      if (j != 2)
        for (std::size_t o = 0; o < o_dim; ++o)
          for (std::size_t p = 0; p < p_dim; ++p)
            model.params.routing_w[((i * l_dim + j) * o_dim + o) * p_dim + p] =
                0.0;
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Posteriorgram pg = random_pg(6, 4, rng);
    CHECK(capsule_classify(model, pg) == 2);
  }
}

TEST_CASE("training separates a two-label toy set within 100 epochs") {
  const auto toy = testutil::make_toy_corpus();
  std::vector<Posteriorgram> pgs;
  std::vector<std::size_t> labels;
  for (std::size_t k = 0; k < 5; ++k) {
    pgs.push_back(testutil::toy_utterance(toy, 0, 100 + k));
    labels.push_back(0);
    pgs.push_back(testutil::toy_utterance(toy, 1, 200 + k));
    labels.push_back(1);
  }
  std::vector<const Posteriorgram*> inputs;
  for (const auto& pg : pgs) inputs.push_back(&pg);

  CapsuleConfig cfg;
  cfg.n_primary = 8;
  cfg.d_primary = 16;
  cfg.d_output = 4;
  cfg.epochs = 100;
  cfg.batch_size = 4;
  cfg.seed = 5;
  const CapsuleModel model =
      capsule_train(inputs, labels, 2, cfg, toy.alphabet.size());

  std::size_t correct = 0;
  for (std::size_t i = 0; i < pgs.size(); ++i)
    if (capsule_classify(model, pgs[i]) == labels[i]) ++correct;
  CHECK(correct == pgs.size());
  // The loss actually went down.
  CHECK(model.epoch_loss.back() < model.epoch_loss.front());
}

TEST_CASE("duplicating the dataset leaves full-batch training unchanged") {
  const auto toy = testutil::make_toy_corpus();
  std::vector<Posteriorgram> pgs;
  std::vector<std::size_t> labels;
  for (std::size_t k = 0; k < 3; ++k) {
    pgs.push_back(testutil::toy_utterance(toy, 0, 400 + k));
    labels.push_back(0);
    pgs.push_back(testutil::toy_utterance(toy, 1, 500 + k));
    labels.push_back(1);
  }
  std::vector<const Posteriorgram*> inputs;
  for (const auto& pg : pgs) inputs.push_back(&pg);

  CapsuleConfig cfg;
  cfg.n_primary = 4;
  cfg.d_primary = 8;
  cfg.d_output = 3;
  cfg.epochs = 10;
  cfg.shuffle_each_epoch = false;  // fixed ordering
  cfg.seed = 77;

  CapsuleConfig single = cfg;
  single.batch_size = inputs.size();
  const CapsuleModel base =
      capsule_train(inputs, labels, 2, single, toy.alphabet.size());

  std::vector<const Posteriorgram*> doubled = inputs;
  doubled.insert(doubled.end(), inputs.begin(), inputs.end());
  std::vector<std::size_t> doubled_labels = labels;
  doubled_labels.insert(doubled_labels.end(), labels.begin(), labels.end());
  CapsuleConfig twice = cfg;
  twice.batch_size = doubled.size();  // batch spans the duplicates
  const CapsuleModel dup =
      capsule_train(doubled, doubled_labels, 2, twice, toy.alphabet.size());

  auto a = base.params;
  auto b = dup.params;
  auto av = a.views();
  auto bv = b.views();
  for (std::size_t group = 0; group < av.size(); ++group)
    for (std::size_t i = 0; i < av[group].size(); ++i)
      CHECK(std::abs(av[group][i] - bv[group][i]) <= 1e-9);
}

TEST_CASE("training twice with one seed gives identical models") {
  const auto toy = testutil::make_toy_corpus();
  std::vector<Posteriorgram> pgs;
  std::vector<std::size_t> labels;
  for (std::size_t k = 0; k < 4; ++k) {
    pgs.push_back(testutil::toy_utterance(toy, k % 2, 600 + k));
    labels.push_back(k % 2);
  }
  std::vector<const Posteriorgram*> inputs;
  for (const auto& pg : pgs) inputs.push_back(&pg);
  CapsuleConfig cfg;
  cfg.n_primary = 4;
  cfg.d_primary = 8;
  cfg.d_output = 3;
  cfg.epochs = 5;
  cfg.seed = 3;
  CapsuleModel m1 = capsule_train(inputs, labels, 2, cfg, toy.alphabet.size());
  CapsuleModel m2 = capsule_train(inputs, labels, 2, cfg, toy.alphabet.size());
  auto v1 = m1.params.views();
  auto v2 = m2.params.views();
  for (std::size_t group = 0; group < v1.size(); ++group)
    for (std::size_t i = 0; i < v1[group].size(); ++i)
      CHECK(v1[group][i] == v2[group][i]);
}

TEST_CASE("non-finite inputs abort training with a numeric diagnostic") {
  const auto toy = testutil::make_toy_corpus();
  Posteriorgram bad = testutil::toy_utterance(toy, 0, 1);
  bad.log_frames(0, 1) = std::numeric_limits<double>::quiet_NaN();
  std::vector<const Posteriorgram*> inputs = {&bad};
  std::vector<std::size_t> labels = {0};
  CapsuleConfig cfg;
  cfg.n_primary = 2;
  cfg.d_primary = 4;
  cfg.d_output = 2;
  cfg.epochs = 1;
  CHECK_THROWS_WITH_AS(
      capsule_train(inputs, labels, 1, cfg, toy.alphabet.size()),
      doctest::Contains("non-finite"), Error);
}

TEST_CASE("the forward pass rejects mismatched alphabets") {
  const CapsuleModel model = random_model(4, 2, 4, 2, 2, 1);
  Rng rng(2);
  const Posteriorgram pg = random_pg(3, 5, rng);
  CHECK_THROWS_AS(capsule_forward(model, pg), Error);
}

TEST_CASE("model files round-trip and reproduce the forward pass") {
  const CapsuleModel model = random_model(4, 3, 5, 2, 3, 44);
  const fs::path path = fs::temp_directory_path() / "s2i_caps_model_test.caps";
  save_capsule_model(model, path);
  const CapsuleModel loaded = load_capsule_model(path);
  Rng rng(8);
  const Posteriorgram pg = random_pg(6, 4, rng);
  const CapsuleForward a = capsule_forward(model, pg);
  const CapsuleForward b = capsule_forward(loaded, pg);
  for (std::size_t j = 0; j < a.lengths.size(); ++j)
    CHECK(a.lengths[j] == b.lengths[j]);
  fs::remove(path);
}

}  // TEST_SUITE
