// tests/acceptance_main.cpp

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

// End-to-end acceptance suite. Runs every criterion at its stated
// tolerance, prints one [PASS]/[FAIL] line per criterion and exits
// non-zero if any fail. The heavy trend criteria run the full default
// datasets; expect on the order of ten minutes of compute.
//
//   acceptance [--jobs N] [--keep]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "s2i/curve.hpp"
#include "s2i/harness.hpp"
#include "s2i/kernels.hpp"
#include "test_util.hpp"

using namespace s2i;
namespace fs = std::filesystem;

namespace {

int g_jobs = 4;
fs::path g_work;
int g_failures = 0;

void criterion(int number, const std::string& name,
               const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool ok = false;
  const auto start = std::chrono::steady_clock::now();
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  std::printf("[%s] criterion %d: %s (%.1f s)%s%s\n", ok ? "PASS" : "FAIL",
              number, name.c_str(), seconds, detail.empty() ? "" : " -- ",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

Matrix random_nonneg(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.data()[i] = rng.uniform(0.05, 1.0);
  return m;
}

Posteriorgram random_pg(std::size_t t_dim, std::size_t c_dim, Rng& rng) {
  Posteriorgram pg;
  pg.log_frames = Matrix(t_dim, c_dim);
  for (std::size_t t = 0; t < t_dim; ++t) {
    Vector row(c_dim);
    double sum = 0.0;
    for (auto& v : row) {
      v = rng.uniform(0.05, 1.0);
      sum += v;
    }
    for (std::size_t c = 0; c < c_dim; ++c)
      pg.log_frames(t, c) = std::log(row[c] / sum);
  }
  return pg;
}

CapsuleModel random_capsule(std::size_t c_dim, std::size_t i_dim,
                            std::size_t p_dim, std::size_t o_dim,
                            std::size_t l_dim, std::uint64_t seed) {
  CapsuleModel model;
  model.alphabet_size = c_dim;
  model.n_labels = l_dim;
  model.config.n_primary = i_dim;
  model.config.d_primary = p_dim;
  model.config.d_output = o_dim;
  model.params.resize(c_dim, i_dim, p_dim, o_dim, l_dim);
  Rng rng(seed);
  for (auto view : model.params.views())
    for (double& p : view) p = rng.uniform(-0.4, 0.4);
  return model;
}

DatasetManifest generate_default(GrammarKind kind, const fs::path& dir) {
  const Grammar grammar = kind == GrammarKind::kOrderInsensitive
                              ? make_robot_grammar(1)
                              : make_card_grammar(1);
  GenerationConfig cfg;
  cfg.n_speakers = 5;
  cfg.utterances_per_speaker =
      kind == GrammarKind::kOrderInsensitive ? 150 : 100;
  cfg.synthesis.confusion_noise = 0.2;
  cfg.synthesis.seed = 1;
  return generate_dataset(grammar, cfg, dir);
}

// Shared state across criteria 5-7.
struct TrendResults {
  std::vector<LearningCurve> sensitive;    // delays {1}, {1,2,3,5}; B=5
  std::vector<LearningCurve> insensitive;  // delays {1}, {1,2,3,5}; B=15
};

bool check_mean_recomputation(const LearningCurve& curve, std::string& why) {
  for (std::size_t i = 0; i < curve.sizes.size(); ++i) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& cell : curve.raw) {
      if (cell.m == curve.sizes[i]) {
        total += cell.accuracy;
        ++count;
      }
    }
    if (count == 0 ||
        std::abs(curve.mean[i] - total / static_cast<double>(count)) >
            1e-12) {
      why = "aggregated mean does not match the raw cells";
      return false;
    }
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc)
      g_jobs = std::atoi(argv[++i]);
  }
  g_work = fs::temp_directory_path() / "s2i_acceptance";
  fs::remove_all(g_work);
  fs::create_directories(g_work);
  std::printf("acceptance suite (jobs=%d, work=%s)\n", g_jobs,
              g_work.string().c_str());

  // 1. NMF KL monotonicity on 50 seeded random problems.
  criterion(1, "NMF KL objective non-increasing over 200 iterations",
            [&](std::string& why) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t ks[] = {2, 5, 10};
    for (int problem = 0; problem < 50; ++problem) {
      Rng rng(mix_seed(4242, "kl", static_cast<std::uint64_t>(problem)));
      const std::size_t k = ks[problem % 3];
      const Matrix v = random_nonneg(40, 20, rng);
      Matrix w = random_nonneg(40, k, rng);
      Matrix h = random_nonneg(k, 20, rng);
      std::vector<double> history;
      kl_nmf_iterate(v, w, h, 200, 1e-12, &history);
      double prev = std::numeric_limits<double>::infinity();
      for (const double obj : history) {
        if (obj > prev + 1e-8 * std::max(1.0, std::abs(prev))) {
          why = "objective increased on problem " + std::to_string(problem);
          return false;
        }
        prev = obj;
      }
    }
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    if (seconds >= 30.0) {
      why = "exceeded the 30 s budget";
      return false;
    }
    return true;
  });

  // 2. Capsule analytic gradients vs central finite differences.
  criterion(2, "capsule gradients match finite differences within 1e-4",
            [&](std::string& why) {
    const auto start = std::chrono::steady_clock::now();
    CapsuleModel model = random_capsule(3, 2, 4, 2, 2, 505);
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
        const double lp =
            capsule_loss(capsule_forward(model, pg).lengths, label,
                         model.config);
        p = saved - h;
        const double lm =
            capsule_loss(capsule_forward(model, pg).lengths, label,
                         model.config);
        p = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        const double analytic = grads[group][i];
        const double scale =
            std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        max_rel = std::max(max_rel, std::abs(numeric - analytic) / scale);
      }
    }
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    why = "max relative error " + format_g17(max_rel);
    if (seconds >= 10.0) {
      why += "; exceeded the 10 s budget";
      return false;
    }
    return max_rel < 1e-4;
  });

  // 3. Frame-order invariance of the capsule decoder.
  criterion(3, "capsule outputs invariant to frame permutations (1e-12)",
            [&](std::string& why) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      Rng rng(mix_seed(777, "perm", static_cast<std::uint64_t>(trial)));
      const std::size_t t_dim = static_cast<std::size_t>(rng.uniform_int(2, 12));
      const CapsuleModel model = random_capsule(
          5, 4, 6, 3, 4, mix_seed(3, "m", static_cast<std::uint64_t>(trial)));
      const Posteriorgram pg = random_pg(t_dim, 5, rng);
      const CapsuleForward base = capsule_forward(model, pg);

      std::vector<std::size_t> perm(t_dim);
      for (std::size_t t = 0; t < t_dim; ++t) perm[t] = t;
      rng.shuffle(perm);
      Posteriorgram shuffled;
      shuffled.log_frames = Matrix(t_dim, 5);
      for (std::size_t t = 0; t < t_dim; ++t)
        for (std::size_t c = 0; c < 5; ++c)
          shuffled.log_frames(t, c) = pg.log_frames(perm[t], c);
      const CapsuleForward permuted = capsule_forward(model, shuffled);
      for (std::size_t j = 0; j < base.lengths.size(); ++j)
        worst = std::max(worst,
                         std::abs(base.lengths[j] - permuted.lengths[j]));
    }
    why = "max length change " + format_g17(worst);
    return worst <= 1e-12;
  });

  // 4. Separable end-to-end sanity: both decoders at 100% held-out.
  criterion(4, "noise-free 5-task dataset: both decoders 100% held-out",
            [&](std::string& why) {
    const auto start = std::chrono::steady_clock::now();
    const auto toy = testutil::make_toy_corpus();
    const auto train_set = testutil::toy_set(toy, 4, 100);  // 5 tasks x 4
    const auto test_set = testutil::toy_set(toy, 2, 9000);

    // NMF decoder.
    HacConfig hac;
    std::vector<std::pair<SemanticVector, HacVector>> pairs;
    for (const auto& [pg, task] : train_set)
      pairs.emplace_back(encode_semantics(toy.inventory[task], toy.schema),
                         hac_encode(pg, hac));
    NmfConfig nmf_cfg;
    nmf_cfg.seed = 5;
    const NmfModel nmf = nmf_train(pairs, nmf_cfg, toy.schema);
    std::size_t nmf_correct = 0;
    for (const auto& [pg, task] : test_set) {
      const Vector pred =
          nmf_predict(nmf, nmf_infer(nmf, hac_encode(pg, hac)).h);
      if (decode_semantics(pred, toy.schema, toy.inventory).index == task)
        ++nmf_correct;
    }

    // Capsule decoder, default architecture.
    std::vector<const Posteriorgram*> inputs;
    std::vector<std::size_t> labels;
    for (const auto& [pg, task] : train_set) {
      inputs.push_back(&pg);
      labels.push_back(task);
    }
    CapsuleConfig caps_cfg;
    caps_cfg.seed = 5;
    const CapsuleModel caps = capsule_train(inputs, labels, 5, caps_cfg,
                                            toy.alphabet.size());
    std::size_t caps_correct = 0;
    for (const auto& [pg, task] : test_set)
      if (capsule_classify(caps, pg) == task) ++caps_correct;

    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    why = "nmf " + std::to_string(nmf_correct) + "/" +
          std::to_string(test_set.size()) + ", capsule " +
          std::to_string(caps_correct) + "/" + std::to_string(test_set.size());
    if (seconds >= 120.0) {
      why += "; exceeded the 2 min budget";
      return false;
    }
    return nmf_correct == test_set.size() &&
           caps_correct == test_set.size();
  });

  // Datasets and NMF trend runs shared by criteria 5-7.
  const fs::path patcor_dir = g_work / "patcor";
  const fs::path grabo_dir = g_work / "grabo";
  const DatasetManifest patcor =
      generate_default(GrammarKind::kOrderSensitive, patcor_dir);
  const DatasetManifest grabo =
      generate_default(GrammarKind::kOrderInsensitive, grabo_dir);

  HacConfig delays_one;
  delays_one.delays = {1};
  HacConfig delays_full;
  delays_full.delays = {1, 2, 3, 5};
  TrendResults trends;

  // 5. Order-sensitivity trend (paper's Fig. 3 analogue).
  criterion(5, "delay ablation: >=2pp gain (sensitive), <=1pp (insensitive)",
            [&](std::string& why) {
    const auto start = std::chrono::steady_clock::now();
    CurveSpec spec;
    spec.blocks = 5;
    spec.folds = 5;
    spec.decoder = DecoderKind::kNmf;
    spec.seed = 1;
    spec.jobs = g_jobs;
    trends.sensitive = run_delay_ablation(patcor, patcor_dir, spec,
                                          {delays_one, delays_full});

    CurveSpec spec15 = spec;
    spec15.blocks = 15;
    trends.insensitive = run_delay_ablation(grabo, grabo_dir, spec15,
                                            {delays_one, delays_full});

    const LearningCurve& sens_one = trends.sensitive[0];
    const LearningCurve& sens_full = trends.sensitive[1];
    const double gap_m1 = sens_full.mean_at(1) - sens_one.mean_at(1);
    const double gap_m2 = sens_full.mean_at(2) - sens_one.mean_at(2);

    double max_insensitive_gap = -1.0;
    for (std::size_t i = 0; i < trends.insensitive[0].sizes.size(); ++i)
      max_insensitive_gap =
          std::max(max_insensitive_gap, trends.insensitive[1].mean[i] -
                                            trends.insensitive[0].mean[i]);

    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    why = "sensitive gaps m=1: " + format_g17(gap_m1) +
          ", m=2: " + format_g17(gap_m2) +
          "; insensitive max gap: " + format_g17(max_insensitive_gap);
    if (seconds >= 900.0) {
      why += "; exceeded the 15 min budget";
      return false;
    }
    return gap_m1 >= 0.02 && gap_m2 >= 0.02 && max_insensitive_gap <= 0.01;
  });

  // 6. Learning-curve monotone trend for both decoders.
  criterion(6, "mean accuracy at m=B-1 exceeds m=1 for both decoders",
            [&](std::string& why) {
    if (trends.sensitive.empty() || trends.insensitive.empty()) {
      why = "criterion 5 runs unavailable";
      return false;
    }
    // NMF: from the full-delay curves of criterion 5.
    const LearningCurve& nmf_patcor = trends.sensitive[1];
    const LearningCurve& nmf_grabo = trends.insensitive[1];

    // Capsule: endpoints of the curve on both default datasets.
    CurveSpec caps;
    caps.folds = 5;
    caps.decoder = DecoderKind::kCapsule;
    caps.seed = 1;
    caps.jobs = g_jobs;
    caps.blocks = 5;
    caps.train_sizes = {1, 4};
    const LearningCurve caps_patcor =
        run_learning_curve(patcor, patcor_dir, caps);
    caps.blocks = 15;
    caps.train_sizes = {1, 14};
    const LearningCurve caps_grabo = run_learning_curve(grabo, grabo_dir, caps);

    why = "nmf patcor " + format_g17(nmf_patcor.mean_at(1)) + " -> " +
          format_g17(nmf_patcor.mean_at(4)) + "; nmf grabo " +
          format_g17(nmf_grabo.mean_at(1)) + " -> " +
          format_g17(nmf_grabo.mean_at(14)) + "; capsule patcor " +
          format_g17(caps_patcor.mean_at(1)) + " -> " +
          format_g17(caps_patcor.mean_at(4)) + "; capsule grabo " +
          format_g17(caps_grabo.mean_at(1)) + " -> " +
          format_g17(caps_grabo.mean_at(14));
    return nmf_patcor.mean_at(4) > nmf_patcor.mean_at(1) &&
           nmf_grabo.mean_at(14) > nmf_grabo.mean_at(1) &&
           caps_patcor.mean_at(4) > caps_patcor.mean_at(1) &&
           caps_grabo.mean_at(14) > caps_grabo.mean_at(1);
  });

  // 7. Protocol integrity. Split disjointness/exactness is verified inside
  // every cell of every run above (run_learning_curve throws otherwise);
  // here: paired splits, mean recomputation and bit-identical reruns.
  criterion(7, "protocol integrity: pairing, averaging, reproducibility",
            [&](std::string& why) {
    if (trends.sensitive.size() != 2) {
      why = "criterion 5 runs unavailable";
      return false;
    }
    // Paired ablation: cells align across delay sets.
    const auto& a = trends.sensitive[0].raw;
    const auto& b = trends.sensitive[1].raw;
    if (a.size() != b.size()) {
      why = "cell counts differ across delay sets";
      return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].speaker != b[i].speaker || a[i].fold != b[i].fold ||
          a[i].m != b[i].m) {
        why = "cell keys differ across delay sets";
        return false;
      }
    }
    // Aggregates equal a brute-force recomputation from the raw log.
    for (const auto& curves : {trends.sensitive, trends.insensitive})
      for (const auto& curve : curves)
        if (!check_mean_recomputation(curve, why)) return false;

    // Bit-identical rerun under a fixed seed (small slice, two jobs
    // settings).
    CurveSpec spec;
    spec.blocks = 5;
    spec.folds = 2;
    spec.decoder = DecoderKind::kNmf;
    spec.hac = delays_one;
    spec.seed = 1;
    spec.train_sizes = {1};
    spec.jobs = 1;
    const LearningCurve once = run_learning_curve(patcor, patcor_dir, spec);
    spec.jobs = g_jobs;
    const LearningCurve twice = run_learning_curve(patcor, patcor_dir, spec);
    if (raw_csv({once}) != raw_csv({twice})) {
      why = "re-run is not bit-identical";
      return false;
    }
    return true;
  });

  // 8. HAC oracle equivalence.
  criterion(8, "hac_encode matches the brute-force pair oracle (1e-12)",
            [&](std::string& why) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      Rng rng(mix_seed(88, "hac", static_cast<std::uint64_t>(trial)));
      const std::size_t t_dim = static_cast<std::size_t>(rng.uniform_int(1, 20));
      const std::size_t c_dim = static_cast<std::size_t>(rng.uniform_int(2, 6));
      const Posteriorgram pg = random_pg(t_dim, c_dim, rng);
      HacConfig cfg;
      cfg.delays = {1, 2, 3, 5};
      const HacVector hac = hac_encode(pg, cfg);

      // Brute-force double loop over every (t, t+d) pair.
      const Matrix probs = pg.probabilities();
      Vector oracle(cfg.delays.size() * c_dim * c_dim, 0.0);
      for (std::size_t di = 0; di < cfg.delays.size(); ++di) {
        const std::size_t d = static_cast<std::size_t>(cfg.delays[di]);
        for (std::size_t t = 0; t + d < t_dim; ++t)
          for (std::size_t i = 0; i < c_dim; ++i)
            for (std::size_t j = 0; j < c_dim; ++j)
              oracle[di * c_dim * c_dim + i * c_dim + j] +=
                  probs(t, i) * probs(t + d, j);
      }
      for (std::size_t i = 0; i < oracle.size(); ++i)
        worst = std::max(worst, std::abs(oracle[i] - hac.values[i]));
    }
    why = "max deviation " + format_g17(worst);
    return worst <= 1e-12;
  });

  std::printf("%d of 8 criteria passed\n", 8 - g_failures);
  fs::remove_all(g_work);
  return g_failures == 0 ? 0 : 1;
}
