// src/harness.cpp

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

#include "s2i/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <json.hpp>

namespace s2i {

namespace {

using Json = nlohmann::ordered_json;

std::string multiset_key(std::vector<std::string> words) {
  std::sort(words.begin(), words.end());
  std::string key;
  for (const auto& w : words) key += w + "|";
  return key;
}

std::string label_key(const TaskLabel& label) {
  std::string key;
  for (const auto& [slot, value] : label.assignments)
    key += slot + "=" + value + ";";
  return key;
}

// Picks `target` labels from `all` with every slot value covered, then
// returns them in canonical (sorted) order.
std::vector<TaskLabel> select_inventory(std::vector<TaskLabel> all,
                                        std::size_t target,
                                        const SlotSchema& schema,
                                        std::uint64_t seed) {
  require(target <= all.size(), ErrorCode::kConfig,
          "inventory target exceeds number of valid combinations");
  Rng rng(mix_seed(seed, "inventory"));
  rng.shuffle(all);

  std::set<std::string> uncovered;
  for (const auto& slot : schema.slots)
    for (const auto& v : slot.values) uncovered.insert(slot.name + "=" + v);

  std::vector<TaskLabel> selected;
  std::vector<bool> taken(all.size(), false);
  for (std::size_t i = 0; i < all.size() && !uncovered.empty(); ++i) {
    bool helps = false;
    for (const auto& [slot, value] : all[i].assignments)
      if (uncovered.count(slot + "=" + value)) helps = true;
    if (!helps) continue;
    for (const auto& [slot, value] : all[i].assignments)
      uncovered.erase(slot + "=" + value);
    selected.push_back(all[i]);
    taken[i] = true;
  }
  require(uncovered.empty(), ErrorCode::kConfig,
          "inventory cannot cover every slot value");
  require(selected.size() <= target, ErrorCode::kConfig,
          "inventory target too small to cover every slot value");
  for (std::size_t i = 0; i < all.size() && selected.size() < target; ++i) {
    if (!taken[i]) selected.push_back(all[i]);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

Json label_to_json(const TaskLabel& label) {
  Json j = Json::object();
  for (const auto& [slot, value] : label.assignments) j[slot] = value;
  return j;
}

TaskLabel label_from_json(const Json& j) {
  TaskLabel label;
  for (const auto& [slot, value] : j.items())
    label.assignments[slot] = value.get<std::string>();
  return label;
}

}  // namespace

std::string to_string(GrammarKind kind) {
  return kind == GrammarKind::kOrderInsensitive ? "order_insensitive"
                                                : "order_sensitive";
}

GrammarKind grammar_kind_from_string(const std::string& s) {
  if (s == "order_insensitive") return GrammarKind::kOrderInsensitive;
  if (s == "order_sensitive") return GrammarKind::kOrderSensitive;
  throw Error(ErrorCode::kParse, "unknown grammar kind: " + s);
}

void Grammar::validate() const {
  schema.validate();
  require(!inventory.empty(), ErrorCode::kConfig, "grammar has no tasks");

  std::set<std::string> label_keys;
  for (const auto& label : inventory) {
    encode_semantics(label, schema);  // throws on schema violations
    require(label_keys.insert(label_key(label)).second, ErrorCode::kConfig,
            "duplicate task in inventory");
  }

  for (const auto& slot : schema.slots)
    for (const auto& value : slot.values)
      require(lexicon.count({slot.name, value}) == 1 &&
                  !lexicon.at({slot.name, value}).empty(),
              ErrorCode::kConfig,
              "missing word for " + slot.name + "=" + value);
  for (const auto& [key, word] : lexicon)
    require(word.find(silence) == std::string::npos, ErrorCode::kConfig,
            "word contains the silence symbol: " + word);

  if (kind == GrammarKind::kOrderSensitive) {
    require(!template_tokens.empty(), ErrorCode::kConfig,
            "order-sensitive grammar needs a template");
    std::set<std::string> slots_seen;
    for (const auto& tok : template_tokens)
      if (tok.starts_with("$")) slots_seen.insert(tok.substr(1));
    require(slots_seen.size() == schema.slots.size(), ErrorCode::kConfig,
            "template must reference every slot exactly once");
    // Word order must carry meaning: some word multiset names >= 2 tasks.
    std::map<std::string, std::size_t> counts;
    bool ambiguous = false;
    for (const auto& label : inventory)
      if (++counts[multiset_key(words_for(label))] >= 2) ambiguous = true;
    require(ambiguous, ErrorCode::kConfig,
            "order-sensitive grammar has no order-distinguished task pair");
  } else {
    std::set<std::string> multisets;
    for (const auto& label : inventory)
      require(multisets.insert(multiset_key(words_for(label))).second,
              ErrorCode::kConfig,
              "order-insensitive grammar has colliding word multisets");
  }
}

CharacterAlphabet Grammar::alphabet() const {
  std::set<char> chars;
  for (const auto& [key, word] : lexicon)
    for (const char c : word) chars.insert(c);
  for (const auto& tok : template_tokens)
    if (!tok.starts_with("$"))
      for (const char c : tok) chars.insert(c);
  for (const auto& w : filler_words)
    for (const char c : w) chars.insert(c);
  CharacterAlphabet out;
  out.symbols.push_back(silence);
  out.silence_index = 0;
  for (const char c : chars) out.symbols.push_back(c);
  out.validate();
  return out;
}

const std::string& Grammar::word_for(const std::string& slot,
                                     const std::string& value) const {
  const auto it = lexicon.find({slot, value});
  require(it != lexicon.end(), ErrorCode::kConfig,
          "no word for " + slot + "=" + value);
  return it->second;
}

std::vector<std::string> Grammar::words_for(const TaskLabel& label) const {
  std::vector<std::string> words;
  if (kind == GrammarKind::kOrderSensitive) {
    for (const auto& tok : template_tokens) {
      if (tok.starts_with("$")) {
        const auto it = label.assignments.find(tok.substr(1));
        require(it != label.assignments.end(), ErrorCode::kConfig,
                "label missing template slot " + tok);
        words.push_back(word_for(tok.substr(1), it->second));
      } else {
        words.push_back(tok);
      }
    }
  } else {
    for (const auto& slot : schema.slots) {
      const auto it = label.assignments.find(slot.name);
      require(it != label.assignments.end(), ErrorCode::kConfig,
              "label missing slot " + slot.name);
      words.push_back(word_for(slot.name, it->second));
    }
  }
  return words;
}

std::string Grammar::transcript_for(const TaskLabel& label, Rng& rng) const {
  std::vector<std::string> words = words_for(label);
  if (kind == GrammarKind::kOrderInsensitive) {
    rng.shuffle(words);
    if (!filler_words.empty() &&
        rng.uniform(0.0, 1.0) < filler_probability) {
      const std::string& filler = filler_words[rng.index(filler_words.size())];
      const std::size_t pos = rng.index(words.size() + 1);
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), filler);
    }
  }
  std::string transcript;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) transcript.push_back(silence);
    transcript += words[i];
  }
  return transcript;
}

Grammar make_robot_grammar(std::uint64_t seed) {
  Grammar g;
  g.kind = GrammarKind::kOrderInsensitive;
  g.seed = seed;
  g.schema.slots = {
      {"action", {"drive", "turn", "stop", "grab", "point"}},
      {"speed", {"quick", "slow", "steady"}},
      {"direction", {"left", "right", "forward", "back"}},
  };
  const std::vector<std::pair<std::string, std::string>> words = {
      {"drive", "rin"},  {"turn", "tupa"},    {"stop", "senk"},
      {"grab", "moti"},  {"point", "kura"},   {"quick", "epa"},
      {"slow", "usi"},   {"steady", "anto"},  {"left", "mak"},
      {"right", "piru"}, {"forward", "okem"}, {"back", "tisu"},
  };
  for (const auto& slot : g.schema.slots)
    for (const auto& value : slot.values)
      for (const auto& [v, w] : words)
        if (v == value) g.lexicon[{slot.name, value}] = w;
  g.filler_words = {"nam"};

  std::vector<TaskLabel> all;
  for (const auto& a : g.schema.slots[0].values)
    for (const auto& s : g.schema.slots[1].values)
      for (const auto& d : g.schema.slots[2].values)
        all.push_back(
            TaskLabel{{{"action", a}, {"speed", s}, {"direction", d}}});
  g.inventory = select_inventory(std::move(all), 33, g.schema, seed);
  g.validate();
  return g;
}

Grammar make_card_grammar(std::uint64_t seed) {
  Grammar g;
  g.kind = GrammarKind::kOrderSensitive;
  g.seed = seed;
  const std::vector<std::string> cards = {"ace",  "two", "three",
                                          "four", "five", "six"};
  std::vector<std::string> targets = cards;
  targets.push_back("home");
  targets.push_back("side");
  g.schema.slots = {{"source", cards}, {"target", targets}};
  const std::vector<std::pair<std::string, std::string>> card_words = {
      {"ace", "as"},   {"two", "peto"}, {"three", "tiru"},
      {"four", "kuna"}, {"five", "simo"}, {"six", "rem"},
  };
  for (const auto& [value, word] : card_words) {
    g.lexicon[{"source", value}] = word;  // shared pool: the same word
    g.lexicon[{"target", value}] = word;  // names the card in either slot
  }
  g.lexicon[{"target", "home"}] = "uma";
  g.lexicon[{"target", "side"}] = "eki";
  g.template_tokens = {"pon", "$source", "eta", "$target"};

  std::vector<TaskLabel> all;
  for (const auto& src : cards)
    for (const auto& tgt : targets)
      if (src != tgt)
        all.push_back(TaskLabel{{{"source", src}, {"target", tgt}}});
  g.inventory = select_inventory(std::move(all), 38, g.schema, seed);
  g.validate();
  return g;
}

void DatasetManifest::validate() const {
  alphabet.validate();
  schema.validate();
  require(!inventory.empty(), ErrorCode::kConfig, "manifest has no tasks");
  require(!utterances.empty(), ErrorCode::kConfig,
          "manifest has no utterances");
  std::set<std::string> ids;
  for (const auto& utt : utterances) {
    require(ids.insert(utt.id).second, ErrorCode::kConfig,
            "duplicate utterance id: " + utt.id);
    require(task_index(utt.label).has_value(), ErrorCode::kConfig,
            "utterance label not in the task inventory: " + utt.id);
  }
}

std::uint64_t DatasetManifest::inventory_digest() const {
  std::string canon = hex16(schema.digest()) + "#";
  for (const auto& label : inventory) canon += label_key(label) + "/";
  return fnv1a(canon);
}

std::optional<std::size_t> DatasetManifest::task_index(
    const TaskLabel& label) const {
  for (std::size_t i = 0; i < inventory.size(); ++i)
    if (inventory[i] == label) return i;
  return std::nullopt;
}

std::vector<std::string> DatasetManifest::speakers() const {
  std::vector<std::string> out;
  for (const auto& utt : utterances)
    if (std::find(out.begin(), out.end(), utt.speaker) == out.end())
      out.push_back(utt.speaker);
  return out;
}

DatasetManifest generate_dataset(const Grammar& grammar,
                                 const GenerationConfig& cfg,
                                 const std::filesystem::path& out_dir) {
  grammar.validate();
  require(cfg.n_speakers >= 1 && cfg.utterances_per_speaker >= 1,
          ErrorCode::kConfig, "speaker and utterance counts must be positive");

  const CharacterAlphabet alphabet = grammar.alphabet();
  cfg.synthesis.validate(alphabet.size());

  // Posteriorgrams go to a temp directory swapped in at the end, so an
  // interrupted run leaves no partial dataset behind.
  const std::filesystem::path pg_tmp = out_dir / "pg.tmp";
  std::error_code ec;
  std::filesystem::remove_all(pg_tmp, ec);
  std::filesystem::create_directories(pg_tmp, ec);
  require(!ec, ErrorCode::kConfig,
          "cannot create output directory: " + pg_tmp.string());

  DatasetManifest manifest;
  manifest.grammar_kind = grammar.kind;
  manifest.alphabet = alphabet;
  manifest.schema = grammar.schema;
  manifest.inventory = grammar.inventory;
  manifest.synthesis_digest = hex16(cfg.synthesis.digest(alphabet.size()));

  const std::uint64_t base = cfg.synthesis.seed;
  for (int s = 0; s < cfg.n_speakers; ++s) {
    char spk[16];
    std::snprintf(spk, sizeof spk, "spk%02d", s);

    // Speaker-specific confusion: random off-diagonal weights.
    Matrix confusion(alphabet.size(), alphabet.size(), 0.0);
    {
      Rng rng(mix_seed(base, "speaker-confusion",
                       static_cast<std::uint64_t>(s)));
      for (std::size_t r = 0; r < alphabet.size(); ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < alphabet.size(); ++c) {
          if (r == c) continue;
          confusion(r, c) = rng.uniform(0.5, 1.5);
          sum += confusion(r, c);
        }
        for (std::size_t c = 0; c < alphabet.size(); ++c) confusion(r, c) /= sum;
      }
    }

    for (int u = 0; u < cfg.utterances_per_speaker; ++u) {
      Rng rng(mix_seed(base, "utterance", static_cast<std::uint64_t>(s),
                       static_cast<std::uint64_t>(u)));
      const TaskLabel& task = grammar.inventory[rng.index(grammar.inventory.size())];
      const std::string transcript = grammar.transcript_for(task, rng);

      SynthesisConfig synth = cfg.synthesis;
      synth.confusion = confusion;
      synth.seed = mix_seed(base, "synthesis", static_cast<std::uint64_t>(s),
                            static_cast<std::uint64_t>(u));
      const Posteriorgram pg =
          synthesize_posteriorgram(transcript, alphabet, synth);

      char uid[32];
      std::snprintf(uid, sizeof uid, "%s_u%04d", spk, u);
      const std::string rel = std::string("pg/") + uid + ".pg";
      save_posteriorgram(pg, pg_tmp / (std::string(uid) + ".pg"));
      manifest.utterances.push_back(
          Utterance{uid, spk, transcript, task, rel});
    }
  }

  manifest.validate();
  std::filesystem::remove_all(out_dir / "pg", ec);
  std::filesystem::rename(pg_tmp, out_dir / "pg", ec);
  require(!ec, ErrorCode::kConfig,
          "cannot finalize output directory: " + (out_dir / "pg").string());
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  Json j;
  j["format"] = "s2i-dataset-v1";
  j["grammar_kind"] = to_string(manifest.grammar_kind);
  j["alphabet"] = {{"symbols", manifest.alphabet.symbols},
                   {"silence_index", manifest.alphabet.silence_index}};
  j["frame_period"] = manifest.frame_period;
  Json schema = Json::array();
  for (const auto& slot : manifest.schema.slots)
    schema.push_back({{"name", slot.name}, {"values", slot.values}});
  j["schema"] = schema;
  Json inventory = Json::array();
  for (const auto& label : manifest.inventory)
    inventory.push_back(label_to_json(label));
  j["inventory"] = inventory;
  j["synthesis_digest"] = manifest.synthesis_digest;
  Json utts = Json::array();
  for (const auto& utt : manifest.utterances) {
    utts.push_back({{"id", utt.id},
                    {"speaker", utt.speaker},
                    {"transcript", utt.transcript},
                    {"label", label_to_json(utt.label)},
                    {"pg", utt.pg_path}});
  }
  j["utterances"] = utts;
  write_file_atomic(path.string(), j.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path.string()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse,
                std::string("manifest parse error: ") + e.what());
  }
  try {
    DatasetManifest manifest;
    manifest.grammar_kind =
        grammar_kind_from_string(j.at("grammar_kind").get<std::string>());
    manifest.alphabet.symbols =
        j.at("alphabet").at("symbols").get<std::string>();
    manifest.alphabet.silence_index =
        j.at("alphabet").at("silence_index").get<std::size_t>();
    manifest.frame_period = j.at("frame_period").get<double>();
    for (const auto& slot : j.at("schema")) {
      SlotSchema::Slot s;
      s.name = slot.at("name").get<std::string>();
      s.values = slot.at("values").get<std::vector<std::string>>();
      manifest.schema.slots.push_back(std::move(s));
    }
    for (const auto& label : j.at("inventory"))
      manifest.inventory.push_back(label_from_json(label));
    manifest.synthesis_digest = j.at("synthesis_digest").get<std::string>();
    for (const auto& utt : j.at("utterances")) {
      manifest.utterances.push_back(Utterance{
          utt.at("id").get<std::string>(),
          utt.at("speaker").get<std::string>(),
          utt.at("transcript").get<std::string>(),
          label_from_json(utt.at("label")),
          utt.at("pg").get<std::string>(),
      });
    }
    manifest.validate();
    return manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse,
                std::string("manifest field error: ") + e.what());
  }
}

}  // namespace s2i
