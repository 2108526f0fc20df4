// tests/test_nmf.cpp

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

#include <doctest.h>

#include "s2i/kernels.hpp"
#include "s2i/nmf.hpp"
#include "test_util.hpp"

using namespace s2i;
namespace fs = std::filesystem;

namespace {

Matrix random_nonneg(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.data()[i] = rng.uniform(0.05, 1.0);
  return m;
}

std::vector<std::pair<SemanticVector, HacVector>> toy_pairs(
    const testutil::ToyCorpus& toy,
    const std::vector<std::pair<Posteriorgram, std::size_t>>& set,
    const HacConfig& hac) {
  std::vector<std::pair<SemanticVector, HacVector>> pairs;
  for (const auto& [pg, task] : set)
    pairs.emplace_back(encode_semantics(toy.inventory[task], toy.schema),
                       hac_encode(pg, hac));
  return pairs;
}

}  // namespace

TEST_SUITE("nmf") {

TEST_CASE("an exact factorization is a fixed point with zero divergence") {
  Rng rng(5);
  Matrix w0 = random_nonneg(12, 4, rng);
  Matrix h0 = random_nonneg(4, 9, rng);
  Matrix v;
  kernels::matmul(w0, h0, v);

  std::vector<double> history;
  kl_nmf_iterate(v, w0, h0, 25, 1e-12, &history);
  for (const double obj : history) CHECK(obj == 0.0);
}

TEST_CASE("the KL objective is non-increasing on random data") {
  Rng rng(17);
  const Matrix v = random_nonneg(20, 10, rng);
  Matrix w = random_nonneg(20, 4, rng);
  Matrix h = random_nonneg(4, 10, rng);
  std::vector<double> history;
  kl_nmf_iterate(v, w, h, 200, 1e-12, &history);
  REQUIRE(history.size() == 200);
  for (std::size_t i = 1; i < history.size(); ++i)
    CHECK(history[i] <=
          history[i - 1] + 1e-8 * std::max(1.0, std::abs(history[i - 1])));
  // And it actually made progress.
  CHECK(history.back() < history.front());
}

TEST_CASE("factors stay at or above the floor") {
  Rng rng(23);
  const Matrix v = random_nonneg(8, 6, rng);
  Matrix w = random_nonneg(8, 3, rng);
  Matrix h = random_nonneg(3, 6, rng);
  kl_nmf_iterate(v, w, h, 50, 1e-12, nullptr);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w.data()[i] >= 1e-12);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(h.data()[i] >= 1e-12);
}

TEST_CASE("training on the separable toy corpus recovers every held-out task") {
  const auto toy = testutil::make_toy_corpus();
  HacConfig hac;
  const auto train_set = testutil::toy_set(toy, 2, 100);
  NmfConfig cfg;
  cfg.k = 10;
  cfg.seed = 3;
  const NmfModel model = nmf_train(toy_pairs(toy, train_set, hac), cfg,
                                   toy.schema);

  // Stacked dictionary columns sum to one.
  for (std::size_t k = 0; k < model.latent_dim(); ++k) {
    double sum = 0.0;
    for (std::size_t r = 0; r < model.w_semantic.rows(); ++r)
      sum += model.w_semantic(r, k);
    for (std::size_t r = 0; r < model.w_acoustic.rows(); ++r)
      sum += model.w_acoustic(r, k);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Held-out re-syntheses (fresh seeds).
  const auto test_set = testutil::toy_set(toy, 2, 9000);
  std::size_t correct = 0;
  for (const auto& [pg, task] : test_set) {
    const HacVector hv = hac_encode(pg, hac);
    const NmfActivation act = nmf_infer(model, hv);
    const Vector pred = nmf_predict(model, act.h);
    if (decode_semantics(pred, toy.schema, toy.inventory).index == task)
      ++correct;
  }
  CHECK(correct == test_set.size());

  // Re-inferring a training utterance reproduces its own label.
  const HacVector hv = hac_encode(train_set[3].first, hac);
  const Vector pred = nmf_predict(model, nmf_infer(model, hv).h);
  CHECK(decode_semantics(pred, toy.schema, toy.inventory).index ==
        train_set[3].second);
}

TEST_CASE("inference concentrates on the matching dictionary column") {
  // Well-conditioned acoustic dictionary: near-disjoint column supports.
  const std::size_t a_dim = 16;
  const std::size_t k_dim = 4;
  NmfModel model;
  model.config.infer_iters = 200;
  model.config.floor = 1e-12;
  model.w_acoustic = Matrix(a_dim, k_dim, 1e-4);
  for (std::size_t k = 0; k < k_dim; ++k)
    for (std::size_t r = k * 4; r < k * 4 + 4; ++r)
      model.w_acoustic(r, k) = 0.25;
  model.w_semantic = Matrix(2, k_dim, 0.0);

  HacVector test;
  test.alphabet_size = 4;
  test.values.assign(a_dim, 0.0);
  for (std::size_t r = 4; r < 8; ++r) test.values[r] = 3.0;  // column 1 x 12

  const NmfActivation act = nmf_infer(model, test);
  REQUIRE(act.h.size() == k_dim);
  double total = 0.0;
  for (const double v : act.h) total += v;
  CHECK(act.h[1] / total >= 0.9);
  CHECK_FALSE(act.degenerate);
}

TEST_CASE("an all-zero acoustic input is flagged and floored") {
  NmfModel model;
  model.w_acoustic = Matrix(6, 3, 0.2);
  model.w_semantic = Matrix(2, 3, 0.5);
  HacVector zero;
  zero.values.assign(6, 0.0);
  const NmfActivation act = nmf_infer(model, zero);
  CHECK(act.degenerate);
  for (const double v : act.h) CHECK(v == doctest::Approx(1e-12));
}

TEST_CASE("predict maps a basis activation to the matching column") {
  NmfModel model;
  model.w_semantic = Matrix(3, 2);
  model.w_semantic(0, 0) = 0.7;
  model.w_semantic(1, 0) = 0.2;
  model.w_semantic(2, 0) = 0.1;
  model.w_semantic(0, 1) = 0.05;
  model.w_semantic(1, 1) = 0.05;
  model.w_semantic(2, 1) = 0.9;
  model.w_acoustic = Matrix(4, 2, 0.1);
  Vector e1 = {0.0, 1.0};
  const Vector pred = nmf_predict(model, e1);
  CHECK(pred[0] == doctest::Approx(0.05));
  CHECK(pred[1] == doctest::Approx(0.05));
  CHECK(pred[2] == doctest::Approx(0.9));
  const Vector zero_pred = nmf_predict(model, Vector(2, 0.0));
  for (const double v : zero_pred) CHECK(v == 0.0);
}

TEST_CASE("scaling a test HAC leaves the decoded task unchanged") {
  const auto toy = testutil::make_toy_corpus();
  HacConfig hac;
  NmfConfig cfg;
  cfg.seed = 8;
  const auto train_set = testutil::toy_set(toy, 2, 300);
  const NmfModel model =
      nmf_train(toy_pairs(toy, train_set, hac), cfg, toy.schema);

  const Posteriorgram pg = testutil::toy_utterance(toy, 2, 777);
  HacVector hv = hac_encode(pg, hac);
  const auto decode = [&](const HacVector& h) {
    return decode_semantics(nmf_predict(model, nmf_infer(model, h).h),
                            toy.schema, toy.inventory)
        .index;
  };
  const std::size_t base = decode(hv);
  for (const double scale : {2.0, 0.25, 3.7}) {
    HacVector scaled = hv;
    for (double& v : scaled.values) v *= scale;
    CHECK(decode(scaled) == base);
  }
}

TEST_CASE("exactly factorizable data reaches near-zero divergence") {
  // K = true rank, 5 restarts: at least one restart must land at KL <= 1e-6.
  Rng rng(31);
  Matrix w0 = random_nonneg(10, 2, rng);
  Matrix h0 = random_nonneg(2, 8, rng);
  Matrix v;
  kernels::matmul(w0, h0, v);
  double best = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 5; ++restart) {
    Rng init(mix_seed(77, "restart", static_cast<std::uint64_t>(restart)));
    Matrix w = random_nonneg(10, 2, init);
    Matrix h = random_nonneg(2, 8, init);
    std::vector<double> history;
    kl_nmf_iterate(v, w, h, 2000, 1e-12, &history);
    best = std::min(best, history.back());
  }
  CHECK(best <= 1e-6);
}

TEST_CASE("dimension mismatches and empty input are rejected") {
  const auto toy = testutil::make_toy_corpus();
  HacConfig hac;
  NmfConfig cfg;
  CHECK_THROWS_AS(nmf_train({}, cfg, toy.schema), Error);

  auto pairs = toy_pairs(toy, testutil::toy_set(toy, 1, 50), hac);
  pairs[1].second.values.resize(pairs[1].second.values.size() - 1);
  CHECK_THROWS_AS(nmf_train(pairs, cfg, toy.schema), Error);

  const NmfModel model =
      nmf_train(toy_pairs(toy, testutil::toy_set(toy, 1, 50), hac), cfg,
                toy.schema);
  HacVector wrong;
  wrong.values.assign(3, 1.0);
  CHECK_THROWS_AS(nmf_infer(model, wrong), Error);
}

TEST_CASE("model files round-trip") {
  const auto toy = testutil::make_toy_corpus();
  HacConfig hac;
  NmfConfig cfg;
  cfg.seed = 12;
  const NmfModel model =
      nmf_train(toy_pairs(toy, testutil::toy_set(toy, 1, 60), hac), cfg,
                toy.schema);
  const fs::path path = fs::temp_directory_path() / "s2i_nmf_model_test.nmf";
  save_nmf_model(model, path);
  const NmfModel loaded = load_nmf_model(path);
  CHECK(loaded.w_semantic == model.w_semantic);
  CHECK(loaded.w_acoustic == model.w_acoustic);
  CHECK(loaded.hac == model.hac);
  CHECK(loaded.schema_digest == model.schema_digest);
  CHECK(loaded.config.infer_iters == model.config.infer_iters);
  fs::remove(path);
}

}  // TEST_SUITE
