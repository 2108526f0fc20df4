// tools/s2i_main.cpp

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

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "s2i/curve.hpp"
#include "s2i/harness.hpp"
#include "s2i/svg.hpp"

namespace {

using namespace s2i;
namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kParse:
      return 2;
    case ErrorCode::kIncompatible:
      return 3;
    case ErrorCode::kNumeric:
      return 4;
  }
  return 4;
}

const char* category(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
      return "config";
    case ErrorCode::kParse:
      return "parse";
    case ErrorCode::kIncompatible:
      return "incompatible";
    case ErrorCode::kNumeric:
      return "numeric";
  }
  return "numeric";
}

std::vector<int> parse_delays(const std::string& csv) {
  std::vector<int> out;
  std::string token;
  for (const char c : csv + ",") {
    if (c == ',') {
      if (!token.empty()) {
        try {
          out.push_back(std::stoi(token));
        } catch (const std::exception&) {
          throw Error(ErrorCode::kConfig, "bad delay value: " + token);
        }
        token.clear();
      }
    } else {
      token += c;
    }
  }
  return out;
}

std::vector<HacConfig> parse_delay_sets(const std::string& spec) {
  std::vector<HacConfig> out;
  std::string current;
  for (const char c : spec + ";") {
    if (c == ';') {
      if (!current.empty()) {
        HacConfig cfg;
        cfg.delays = parse_delays(current);
        cfg.validate();
        out.push_back(cfg);
        current.clear();
      }
    } else {
      current += c;
    }
  }
  require(!out.empty(), ErrorCode::kConfig, "no delay sets given");
  return out;
}

std::string label_text(const TaskLabel& label) {
  std::string out;
  for (const auto& [slot, value] : label.assignments) {
    if (!out.empty()) out += ';';
    out += slot + "=" + value;
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::kConfig,
          "cannot create output directory: " + dir.string());
}

// ---- gen ----

struct GenOptions {
  std::string grammar;
  int speakers = 5;
  int utts = 0;  // 0 resolves per grammar (150 insensitive, 100 sensitive)
  double noise = 0.2;
  int frames_min = 1;
  int frames_max = 3;
  int pad_min = 1;
  int pad_max = 3;
  std::uint64_t seed = 1;
  std::string out;
};

void run_gen(const GenOptions& opt) {
  Grammar grammar;
  int default_utts = 0;
  if (opt.grammar == "order-insensitive") {
    grammar = make_robot_grammar(opt.seed);
    default_utts = 150;
  } else if (opt.grammar == "order-sensitive") {
    grammar = make_card_grammar(opt.seed);
    default_utts = 100;
  } else {
    throw Error(ErrorCode::kConfig, "unknown grammar: " + opt.grammar);
  }

  GenerationConfig cfg;
  cfg.n_speakers = opt.speakers;
  cfg.utterances_per_speaker = opt.utts > 0 ? opt.utts : default_utts;
  cfg.synthesis.confusion_noise = opt.noise;
  cfg.synthesis.frames_per_char_min = opt.frames_min;
  cfg.synthesis.frames_per_char_max = opt.frames_max;
  cfg.synthesis.silence_pad_min = opt.pad_min;
  cfg.synthesis.silence_pad_max = opt.pad_max;
  cfg.synthesis.seed = opt.seed;

  ensure_dir(fs::path(opt.out));
  const DatasetManifest manifest =
      generate_dataset(grammar, cfg, fs::path(opt.out));
  std::cout << "manifest " << (fs::path(opt.out) / "manifest.json").string()
            << " utterances " << manifest.utterances.size() << "\n";
}

// ---- shared decoder options ----

struct DecoderOptions {
  std::string decoder;
  std::string delays = "1,2,3,5";
  bool delays_given = false;
  // nmf
  std::size_t k = 0;
  int train_iters = 200;
  int infer_iters = 100;
  double beta = 1.0;
  int restarts = 1;
  // capsule
  int epochs = 100;
  std::size_t batch = 16;
  double lr = 1e-3;
  int routing = 3;
  std::uint64_t seed = 0;
};

void add_decoder_options(CLI::App* cmd, DecoderOptions& opt,
                         bool decoder_required) {
  auto* dec = cmd->add_option("--decoder", opt.decoder, "nmf or capsule");
  if (decoder_required) dec->required();
  cmd->add_option("--delays", opt.delays,
                  "HAC delays in frames, comma separated (nmf only)")
      ->each([&opt](const std::string&) { opt.delays_given = true; });
  cmd->add_option("--k", opt.k, "NMF latent dimension (0 = D+5)");
  cmd->add_option("--train-iters", opt.train_iters, "NMF training iterations");
  cmd->add_option("--infer-iters", opt.infer_iters, "NMF inference iterations");
  cmd->add_option("--beta", opt.beta, "NMF semantic block weight");
  cmd->add_option("--restarts", opt.restarts, "NMF training restarts");
  cmd->add_option("--epochs", opt.epochs, "capsule training epochs");
  cmd->add_option("--batch", opt.batch, "capsule mini-batch size");
  cmd->add_option("--lr", opt.lr, "capsule step size");
  cmd->add_option("--routing", opt.routing, "capsule routing iterations");
  cmd->add_option("--seed", opt.seed, "decoder seed");
}

NmfConfig nmf_config_from(const DecoderOptions& opt) {
  NmfConfig cfg;
  cfg.k = opt.k;
  cfg.train_iters = opt.train_iters;
  cfg.infer_iters = opt.infer_iters;
  cfg.semantic_weight = opt.beta;
  cfg.restarts = opt.restarts;
  cfg.seed = opt.seed;
  cfg.validate();
  return cfg;
}

CapsuleConfig capsule_config_from(const DecoderOptions& opt) {
  CapsuleConfig cfg;
  cfg.epochs = opt.epochs;
  cfg.batch_size = opt.batch;
  cfg.step_size = opt.lr;
  cfg.routing_iters = opt.routing;
  cfg.seed = opt.seed;
  cfg.validate();
  return cfg;
}

DecoderKind resolve_decoder(const DecoderOptions& opt) {
  const DecoderKind kind = decoder_kind_from_string(opt.decoder);
  if (kind == DecoderKind::kCapsule && opt.delays_given)
    throw Error(ErrorCode::kConfig,
                "--delays applies only to the nmf decoder");
  return kind;
}

// ---- train ----

struct TrainEvalOptions {
  DecoderOptions decoder;
  std::string manifest;
  std::string model;
};

void run_train(const TrainEvalOptions& opt) {
  const DecoderKind kind = resolve_decoder(opt.decoder);
  const fs::path manifest_path(opt.manifest);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();

  std::vector<Posteriorgram> pgs;
  pgs.reserve(manifest.utterances.size());
  for (const auto& utt : manifest.utterances)
    pgs.push_back(load_posteriorgram(root / utt.pg_path));

  if (kind == DecoderKind::kNmf) {
    HacConfig hac;
    hac.delays = parse_delays(opt.decoder.delays);
    hac.validate();
    std::vector<std::pair<SemanticVector, HacVector>> pairs;
    pairs.reserve(pgs.size());
    for (std::size_t i = 0; i < pgs.size(); ++i)
      pairs.emplace_back(
          encode_semantics(manifest.utterances[i].label, manifest.schema),
          hac_encode(pgs[i], hac));
    const NmfModel model =
        nmf_train(pairs, nmf_config_from(opt.decoder), manifest.schema);
    save_nmf_model(model, opt.model);
  } else {
    std::vector<const Posteriorgram*> inputs;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < pgs.size(); ++i) {
      inputs.push_back(&pgs[i]);
      labels.push_back(*manifest.task_index(manifest.utterances[i].label));
    }
    const CapsuleModel model = capsule_train(
        inputs, labels, manifest.inventory.size(),
        capsule_config_from(opt.decoder), manifest.alphabet.size(),
        manifest.inventory_digest());
    save_capsule_model(model, opt.model);
  }
  std::cout << "model " << opt.model << "\n";
}

// ---- eval ----

void run_eval(const TrainEvalOptions& opt) {
  const DecoderKind kind = decoder_kind_from_string(opt.decoder.decoder);
  const fs::path manifest_path(opt.manifest);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();

  std::vector<Posteriorgram> pgs;
  pgs.reserve(manifest.utterances.size());
  for (const auto& utt : manifest.utterances)
    pgs.push_back(load_posteriorgram(root / utt.pg_path));

  std::vector<std::size_t> truth;
  for (const auto& utt : manifest.utterances)
    truth.push_back(*manifest.task_index(utt.label));

  std::vector<std::size_t> predicted;
  if (kind == DecoderKind::kNmf) {
    const NmfModel model = load_nmf_model(opt.model);
    require(model.schema_digest == manifest.schema.digest(),
            ErrorCode::kIncompatible,
            "model schema digest does not match the manifest");
    if (opt.decoder.delays_given) {
      HacConfig requested;
      requested.delays = parse_delays(opt.decoder.delays);
      require(requested == model.hac, ErrorCode::kIncompatible,
              "requested delays do not match the model's delays");
    }
    const std::size_t expected_a = model.hac.delays.size() *
                                   manifest.alphabet.size() *
                                   manifest.alphabet.size();
    require(model.w_acoustic.rows() == expected_a, ErrorCode::kIncompatible,
            "model acoustic dimension does not match the manifest alphabet");

    std::vector<HacVector> hacs;
    std::vector<const HacVector*> ptrs;
    hacs.reserve(pgs.size());
    for (const auto& pg : pgs) hacs.push_back(hac_encode(pg, model.hac));
    for (const auto& h : hacs) ptrs.push_back(&h);
    const Matrix h = nmf_infer_batch(model, ptrs);
    Vector activation(model.latent_dim());
    for (std::size_t i = 0; i < pgs.size(); ++i) {
      for (std::size_t k = 0; k < activation.size(); ++k)
        activation[k] = h(k, i);
      predicted.push_back(
          decode_semantics(nmf_predict(model, activation), manifest.schema,
                           manifest.inventory)
              .index);
    }
  } else {
    if (opt.decoder.delays_given)
      throw Error(ErrorCode::kConfig,
                  "--delays applies only to the nmf decoder");
    const CapsuleModel model = load_capsule_model(opt.model);
    require(model.alphabet_size == manifest.alphabet.size(),
            ErrorCode::kIncompatible,
            "model alphabet size does not match the manifest");
    require(model.n_labels == manifest.inventory.size() &&
                model.inventory_digest == manifest.inventory_digest(),
            ErrorCode::kIncompatible,
            "model task inventory does not match the manifest");
    for (const auto& pg : pgs)
      predicted.push_back(capsule_classify(model, pg));
  }

  std::size_t correct = 0;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> confusion;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == predicted[i]) ++correct;
    ++confusion[{truth[i], predicted[i]}];
  }
  std::cout << "accuracy,"
            << format_g17(static_cast<double>(correct) /
                          static_cast<double>(truth.size()))
            << "\n";
  std::cout << "true,predicted,count\n";
  for (const auto& [key, count] : confusion)
    std::cout << label_text(manifest.inventory[key.first]) << ","
              << label_text(manifest.inventory[key.second]) << "," << count
              << "\n";
}

// ---- curve / ablate ----

struct CurveOptions {
  DecoderOptions decoder;
  std::string manifest;
  std::string out;
  int blocks = 0;  // 0 resolves per grammar kind (15 / 5)
  int folds = 5;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string train_sizes;
  bool plot = false;
  std::string delay_sets;  // ablate only
};

CurveSpec curve_spec_from(const CurveOptions& opt,
                          const DatasetManifest& manifest, DecoderKind kind) {
  CurveSpec spec;
  spec.blocks = opt.blocks > 0
                    ? opt.blocks
                    : (manifest.grammar_kind == GrammarKind::kOrderInsensitive
                           ? 15
                           : 5);
  spec.folds = opt.folds;
  spec.decoder = kind;
  spec.hac.delays = parse_delays(opt.decoder.delays);
  spec.nmf = nmf_config_from(opt.decoder);
  spec.capsule = capsule_config_from(opt.decoder);
  spec.seed = opt.seed;
  spec.jobs = opt.jobs;
  if (!opt.train_sizes.empty())
    spec.train_sizes = parse_delays(opt.train_sizes);
  spec.validate();
  return spec;
}

void run_curve(const CurveOptions& opt) {
  const DecoderKind kind = resolve_decoder(opt.decoder);
  const fs::path manifest_path(opt.manifest);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const CurveSpec spec = curve_spec_from(opt, manifest, kind);

  const LearningCurve curve =
      run_learning_curve(manifest, manifest_path.parent_path(), spec);

  ensure_dir(fs::path(opt.out));
  write_file_atomic((fs::path(opt.out) / "raw.csv").string(),
                    raw_csv({curve}));
  const std::string agg = aggregated_csv(curve);
  write_file_atomic((fs::path(opt.out) / "agg.csv").string(), agg);
  if (opt.plot) {
    SvgSeries series;
    series.label = to_string(kind) +
                   (kind == DecoderKind::kNmf ? " " + curve.delay_label : "");
    for (std::size_t i = 0; i < curve.sizes.size(); ++i)
      series.points.push_back(
          {static_cast<double>(curve.sizes[i]), curve.mean[i]});
    write_file_atomic(
        (fs::path(opt.out) / "curve.svg").string(),
        render_line_chart("learning curve", "training blocks",
                          "mean accuracy", {series}));
  }
  std::cout << agg;
}

void run_ablate(const CurveOptions& opt) {
  if (!opt.decoder.decoder.empty() && opt.decoder.decoder != "nmf")
    throw Error(ErrorCode::kConfig, "ablate supports only the nmf decoder");
  const fs::path manifest_path(opt.manifest);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const std::vector<HacConfig> sets = parse_delay_sets(opt.delay_sets);
  const CurveSpec base = curve_spec_from(opt, manifest, DecoderKind::kNmf);

  const std::vector<LearningCurve> curves =
      run_delay_ablation(manifest, manifest_path.parent_path(), base, sets);

  ensure_dir(fs::path(opt.out));
  write_file_atomic((fs::path(opt.out) / "raw.csv").string(), raw_csv(curves));
  for (const auto& curve : curves)
    write_file_atomic(
        (fs::path(opt.out) / ("agg_" + curve.delay_label + ".csv")).string(),
        aggregated_csv(curve));
  const std::string gaps = gaps_csv(curves);
  write_file_atomic((fs::path(opt.out) / "gaps.csv").string(), gaps);
  if (opt.plot) {
    std::vector<SvgSeries> series;
    for (const auto& curve : curves) {
      SvgSeries s;
      s.label = "delays " + curve.delay_label;
      for (std::size_t i = 0; i < curve.sizes.size(); ++i)
        s.points.push_back(
            {static_cast<double>(curve.sizes[i]), curve.mean[i]});
      series.push_back(std::move(s));
    }
    write_file_atomic(
        (fs::path(opt.out) / "ablate.svg").string(),
        render_line_chart("HAC delay ablation", "training blocks",
                          "mean accuracy", series));
  }
  std::cout << gaps;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic posteriorgram speech-to-intent laboratory"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a config file");

  GenOptions gen_opt;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--grammar", gen_opt.grammar,
                  "order-insensitive or order-sensitive")
      ->required();
  gen->add_option("--speakers", gen_opt.speakers, "number of speakers");
  gen->add_option("--utts", gen_opt.utts,
                  "utterances per speaker (0 = grammar default)");
  gen->add_option("--noise", gen_opt.noise, "confusion noise in [0,1)");
  gen->add_option("--frames-min", gen_opt.frames_min, "min frames per char");
  gen->add_option("--frames-max", gen_opt.frames_max, "max frames per char");
  gen->add_option("--pad-min", gen_opt.pad_min, "min silence pad frames");
  gen->add_option("--pad-max", gen_opt.pad_max, "max silence pad frames");
  gen->add_option("--seed", gen_opt.seed, "dataset seed");
  gen->add_option("--out", gen_opt.out, "output directory")->required();
  gen->callback([&gen_opt] { run_gen(gen_opt); });

  TrainEvalOptions train_opt;
  auto* train = app.add_subcommand("train", "train a decoder on a manifest");
  add_decoder_options(train, train_opt.decoder, true);
  train->add_option("--manifest", train_opt.manifest, "dataset manifest")
      ->required();
  train->add_option("--model", train_opt.model, "output model file")
      ->required();
  train->callback([&train_opt] { run_train(train_opt); });

  TrainEvalOptions eval_opt;
  auto* eval = app.add_subcommand("eval", "evaluate a model on a manifest");
  add_decoder_options(eval, eval_opt.decoder, true);
  eval->add_option("--manifest", eval_opt.manifest, "dataset manifest")
      ->required();
  eval->add_option("--model", eval_opt.model, "model file")->required();
  eval->callback([&eval_opt] { run_eval(eval_opt); });

  CurveOptions curve_opt;
  auto* curve = app.add_subcommand("curve", "run the learning-curve protocol");
  add_decoder_options(curve, curve_opt.decoder, true);
  curve->add_option("--manifest", curve_opt.manifest, "dataset manifest")
      ->required();
  curve->add_option("--out", curve_opt.out, "output directory")->required();
  curve->add_option("--blocks", curve_opt.blocks,
                    "number of blocks (0 = grammar default)");
  curve->add_option("--folds", curve_opt.folds, "number of folds");
  curve->add_option("--curve-seed", curve_opt.seed, "protocol seed");
  curve->add_option("--jobs", curve_opt.jobs, "parallel harness jobs");
  curve->add_option("--train-sizes", curve_opt.train_sizes,
                    "comma list of m values (default all)");
  curve->add_flag("--plot", curve_opt.plot, "emit an SVG chart");
  curve->callback([&curve_opt] { run_curve(curve_opt); });

  CurveOptions ablate_opt;
  auto* ablate =
      app.add_subcommand("ablate", "paired HAC delay-set comparison (nmf)");
  add_decoder_options(ablate, ablate_opt.decoder, false);
  ablate->add_option("--manifest", ablate_opt.manifest, "dataset manifest")
      ->required();
  ablate->add_option("--out", ablate_opt.out, "output directory")->required();
  ablate
      ->add_option("--delay-sets", ablate_opt.delay_sets,
                   "semicolon-separated delay lists, e.g. 1;1,2,3,5")
      ->required();
  ablate->add_option("--blocks", ablate_opt.blocks,
                     "number of blocks (0 = grammar default)");
  ablate->add_option("--folds", ablate_opt.folds, "number of folds");
  ablate->add_option("--curve-seed", ablate_opt.seed, "protocol seed");
  ablate->add_option("--jobs", ablate_opt.jobs, "parallel harness jobs");
  ablate->add_flag("--plot", ablate_opt.plot, "emit an SVG chart");
  ablate->callback([&ablate_opt] { run_ablate(ablate_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << category(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
