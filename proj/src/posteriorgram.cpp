// src/posteriorgram.cpp

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

#include "s2i/posteriorgram.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace s2i {

namespace {

constexpr double kRowLseTolerance = 1e-4;  // load-time rejection threshold

double log_sum_exp(std::span<const double> row) {
  double max = -std::numeric_limits<double>::infinity();
  for (const double v : row) max = std::max(max, v);
  if (!std::isfinite(max)) return max;
  double acc = 0.0;
  for (const double v : row) acc += std::exp(v - max);
  return max + std::log(acc);
}

double parse_double(std::string_view token, const std::string& context) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  require(ec == std::errc() && ptr == last, ErrorCode::kParse,
          "posteriorgram " + context + ": bad number '" + std::string(token) +
              "'");
  return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::optional<std::size_t> CharacterAlphabet::index_of(char c) const {
  const auto pos = symbols.find(c);
  if (pos == std::string::npos) return std::nullopt;
  return pos;
}

void CharacterAlphabet::validate() const {
  require(symbols.size() >= 2, ErrorCode::kConfig,
          "alphabet needs at least 2 symbols");
  std::set<char> seen(symbols.begin(), symbols.end());
  require(seen.size() == symbols.size(), ErrorCode::kConfig,
          "alphabet symbols must be distinct");
  require(silence_index < symbols.size(), ErrorCode::kConfig,
          "silence index out of range");
}

std::uint64_t CharacterAlphabet::digest() const {
  std::uint64_t h = fnv1a(symbols);
  h = splitmix64(h ^ silence_index);
  return h;
}

void Posteriorgram::validate() const {
  require(log_frames.rows() >= 1, ErrorCode::kConfig,
          "posteriorgram needs at least one frame");
  require(frame_period > 0.0, ErrorCode::kConfig,
          "frame period must be positive");
  for (std::size_t t = 0; t < log_frames.rows(); ++t) {
    const auto row = log_frames.row(t);
    for (const double v : row)
      require(v <= 0.0, ErrorCode::kConfig, "log probability above zero");
    const double lse = log_sum_exp(row);
    require(std::abs(lse) <= 1e-5, ErrorCode::kConfig,
            "frame row is not a normalized distribution");
  }
}

Matrix Posteriorgram::probabilities() const {
  Matrix probs(log_frames.rows(), log_frames.cols());
  for (std::size_t i = 0; i < log_frames.size(); ++i)
    probs.data()[i] = std::exp(log_frames.data()[i]);
  return probs;
}

void SynthesisConfig::validate(std::size_t alphabet_size) const {
  require(frames_per_char_min >= 1 && frames_per_char_max >= frames_per_char_min,
          ErrorCode::kConfig, "frames_per_char range invalid");
  require(confusion_noise >= 0.0 && confusion_noise < 1.0, ErrorCode::kConfig,
          "confusion_noise out of range");
  require(silence_pad_min >= 0 && silence_pad_max >= silence_pad_min,
          ErrorCode::kConfig, "silence pad range invalid");
  if (!confusion.empty()) {
    require(confusion.rows() == alphabet_size &&
                confusion.cols() == alphabet_size,
            ErrorCode::kConfig, "confusion matrix shape mismatch");
    for (std::size_t r = 0; r < confusion.rows(); ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < confusion.cols(); ++c) {
        require(confusion(r, c) >= 0.0, ErrorCode::kConfig,
                "confusion matrix entries must be nonnegative");
        sum += confusion(r, c);
      }
      require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::kConfig,
              "confusion matrix row does not sum to 1");
    }
  }
}

std::uint64_t SynthesisConfig::digest(std::size_t alphabet_size) const {
  std::string canon;
  canon += std::to_string(frames_per_char_min) + "," +
           std::to_string(frames_per_char_max) + ",";
  canon += format_g17(confusion_noise) + ",";
  canon += std::to_string(silence_pad_min) + "," +
           std::to_string(silence_pad_max) + ",";
  canon += std::to_string(seed) + ",";
  canon += std::to_string(alphabet_size) + ";";
  for (std::size_t i = 0; i < confusion.size(); ++i)
    canon += format_g17(confusion.data()[i]) + " ";
  return fnv1a(canon);
}

Matrix uniform_offdiagonal_confusion(std::size_t alphabet_size) {
  Matrix m(alphabet_size, alphabet_size, 0.0);
  const double share = 1.0 / static_cast<double>(alphabet_size - 1);
  for (std::size_t r = 0; r < alphabet_size; ++r)
    for (std::size_t c = 0; c < alphabet_size; ++c)
      if (r != c) m(r, c) = share;
  return m;
}

Posteriorgram synthesize_posteriorgram(std::string_view transcript,
                                       const CharacterAlphabet& alphabet,
                                       const SynthesisConfig& cfg) {
  alphabet.validate();
  cfg.validate(alphabet.size());
  require(!transcript.empty(), ErrorCode::kConfig, "transcript is empty");

  const std::size_t c_dim = alphabet.size();
  std::vector<std::size_t> indices;
  indices.reserve(transcript.size());
  for (const char ch : transcript) {
    const auto idx = alphabet.index_of(ch);
    require(idx.has_value(), ErrorCode::kConfig,
            std::string("unknown character '") + ch + "' in transcript");
    indices.push_back(*idx);
  }

  const Matrix confusion =
      cfg.confusion.empty() ? uniform_offdiagonal_confusion(c_dim)
                            : cfg.confusion;
  const double eps = cfg.confusion_noise;

  // One log-distribution per character; frames of the same character are
  // identical, all randomness is in durations.
  Matrix char_logs(c_dim, c_dim);
  for (std::size_t c = 0; c < c_dim; ++c) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c_dim; ++j) {
      const double p = (c == j ? 1.0 - eps : 0.0) + eps * confusion(c, j);
      char_logs(c, j) = p;
      sum += p;
    }
    for (std::size_t j = 0; j < c_dim; ++j)
      char_logs(c, j) = std::log(char_logs(c, j) / sum);
  }

  Rng rng(cfg.seed);
  const int lead = static_cast<int>(
      rng.uniform_int(cfg.silence_pad_min, cfg.silence_pad_max));
  std::vector<int> durations(indices.size());
  for (auto& d : durations)
    d = static_cast<int>(
        rng.uniform_int(cfg.frames_per_char_min, cfg.frames_per_char_max));
  const int trail = static_cast<int>(
      rng.uniform_int(cfg.silence_pad_min, cfg.silence_pad_max));

  std::vector<std::size_t> frame_chars;
  for (int i = 0; i < lead; ++i) frame_chars.push_back(alphabet.silence_index);
  for (std::size_t k = 0; k < indices.size(); ++k)
    for (int i = 0; i < durations[k]; ++i) frame_chars.push_back(indices[k]);
  for (int i = 0; i < trail; ++i) frame_chars.push_back(alphabet.silence_index);

  Posteriorgram pg;
  pg.frame_period = kDefaultFramePeriod;
  pg.log_frames = Matrix(frame_chars.size(), c_dim);
  for (std::size_t t = 0; t < frame_chars.size(); ++t) {
    const auto src = char_logs.row(frame_chars[t]);
    std::copy(src.begin(), src.end(), pg.log_frames.row(t).begin());
  }
  return pg;
}

void save_posteriorgram(const Posteriorgram& pg,
                        const std::filesystem::path& path) {
  std::string out;
  out.reserve(pg.log_frames.size() * 24 + 64);
  out += std::to_string(pg.num_frames()) + " " +
         std::to_string(pg.num_symbols()) + " " + format_g17(pg.frame_period) +
         "\n";
  for (std::size_t t = 0; t < pg.num_frames(); ++t) {
    const auto row = pg.log_frames.row(t);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ' ';
      out += format_g17(row[c]);
    }
    out += '\n';
  }
  write_file_atomic(path.string(), out);
}

Posteriorgram load_posteriorgram(const std::filesystem::path& path) {
  const std::string content = read_file(path.string());
  std::istringstream in(content);
  std::string line;

  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
          "posteriorgram header malformed: empty file");
  const auto header = split_ws(line);
  require(header.size() == 3, ErrorCode::kParse,
          "posteriorgram header malformed: expected 'T C frame_period'");
  long t_decl = 0;
  long c_decl = 0;
  {
    const auto [p1, e1] = std::from_chars(
        header[0].data(), header[0].data() + header[0].size(), t_decl);
    const auto [p2, e2] = std::from_chars(
        header[1].data(), header[1].data() + header[1].size(), c_decl);
    require(e1 == std::errc() && p1 == header[0].data() + header[0].size() &&
                e2 == std::errc() &&
                p2 == header[1].data() + header[1].size(),
            ErrorCode::kParse, "posteriorgram header malformed: bad counts");
  }
  const double period = parse_double(header[2], "header");
  require(t_decl >= 1 && c_decl >= 2 && period > 0.0, ErrorCode::kParse,
          "posteriorgram header malformed: out-of-range fields");

  Posteriorgram pg;
  pg.frame_period = period;
  pg.log_frames =
      Matrix(static_cast<std::size_t>(t_decl), static_cast<std::size_t>(c_decl));
  std::size_t rows_read = 0;
  while (std::getline(in, line)) {
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    require(rows_read < static_cast<std::size_t>(t_decl), ErrorCode::kParse,
            "posteriorgram row count mismatch: more rows than declared");
    require(tokens.size() == static_cast<std::size_t>(c_decl),
            ErrorCode::kParse,
            "posteriorgram row " + std::to_string(rows_read + 1) +
                " malformed: wrong column count");
    for (std::size_t c = 0; c < tokens.size(); ++c)
      pg.log_frames(rows_read, c) =
          parse_double(tokens[c], "row " + std::to_string(rows_read + 1));
    ++rows_read;
  }
  require(rows_read == static_cast<std::size_t>(t_decl), ErrorCode::kParse,
          "posteriorgram row count mismatch: declared " +
              std::to_string(t_decl) + ", found " + std::to_string(rows_read));

  for (std::size_t t = 0; t < pg.num_frames(); ++t) {
    auto row = pg.log_frames.row(t);
    const double lse = log_sum_exp(row);
    require(std::isfinite(lse) && std::abs(lse) <= kRowLseTolerance,
            ErrorCode::kParse,
            "posteriorgram row " + std::to_string(t + 1) +
                " not normalized: log-sum-exp " + format_g17(lse));
    // Snap the row back onto the simplex so downstream invariants are exact.
    for (double& v : row) v -= lse;
  }
  return pg;
}

}  // namespace s2i
