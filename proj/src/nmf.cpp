// src/nmf.cpp

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

#include "s2i/nmf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "s2i/kernels.hpp"

namespace s2i {

namespace {

void seed_uniform(Matrix& m, Rng& rng, double lo, double hi) {
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
}

// H <- H .* (W^T P) ./ colsum(W), floored.
void update_h(const Matrix& w, const Matrix& p, double floor, Matrix& h,
              Matrix& h_num, Vector& w_col) {
  kernels::matmul_tn(w, p, h_num);
  kernels::col_sums(w, w_col);
  const std::int64_t k_dim = static_cast<std::int64_t>(h.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < k_dim; ++k) {
    const double den = std::max(w_col[static_cast<std::size_t>(k)], floor);
    double* h_row = h.data() + static_cast<std::size_t>(k) * h.cols();
    const double* n_row = h_num.data() + static_cast<std::size_t>(k) * h.cols();
    // Ratio first: at an exact factorization num == den bitwise, so the
    // multiplier is exactly 1 and the fixed point is exactly stationary.
    for (std::size_t n = 0; n < h.cols(); ++n)
      h_row[n] = std::max(h_row[n] * (n_row[n] / den), floor);
  }
}

// W <- W .* (P H^T) ./ rowsum(H), floored.
void update_w(const Matrix& p, const Matrix& h, double floor, Matrix& w,
              Matrix& w_num, Vector& h_row_sums) {
  kernels::matmul_nt(p, h, w_num);
  kernels::row_sums(h, h_row_sums);
  const std::int64_t r_dim = static_cast<std::int64_t>(w.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < r_dim; ++r) {
    double* w_row = w.data() + static_cast<std::size_t>(r) * w.cols();
    const double* n_row = w_num.data() + static_cast<std::size_t>(r) * w.cols();
    for (std::size_t k = 0; k < w.cols(); ++k)
      w_row[k] = std::max(
          w_row[k] * (n_row[k] / std::max(h_row_sums[k], floor)), floor);
  }
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

double parse_double_or_throw(std::string_view token, const char* what) {
  double v = 0.0;
  const auto [p, e] =
      std::from_chars(token.data(), token.data() + token.size(), v);
  require(e == std::errc() && p == token.data() + token.size(),
          ErrorCode::kParse, std::string("nmf model: bad ") + what);
  return v;
}

long parse_long_or_throw(std::string_view token, const char* what) {
  long v = 0;
  const auto [p, e] =
      std::from_chars(token.data(), token.data() + token.size(), v);
  require(e == std::errc() && p == token.data() + token.size(),
          ErrorCode::kParse, std::string("nmf model: bad ") + what);
  return v;
}

std::uint64_t parse_u64_or_throw(std::string_view token, const char* what) {
  std::uint64_t v = 0;
  const auto [p, e] =
      std::from_chars(token.data(), token.data() + token.size(), v);
  require(e == std::errc() && p == token.data() + token.size(),
          ErrorCode::kParse, std::string("nmf model: bad ") + what);
  return v;
}

}  // namespace

void NmfConfig::validate() const {
  require(train_iters >= 1 && infer_iters >= 1, ErrorCode::kConfig,
          "nmf iteration counts must be >= 1");
  require(floor > 0.0, ErrorCode::kConfig, "nmf floor must be positive");
  require(semantic_weight > 0.0, ErrorCode::kConfig,
          "semantic weight must be positive");
  require(restarts >= 1, ErrorCode::kConfig, "restarts must be >= 1");
}

void kl_nmf_iterate(const Matrix& v, Matrix& w, Matrix& h, int iters,
                    double floor, std::vector<double>* history) {
  Matrix wh;
  Matrix p;
  Matrix h_num;
  Matrix w_num;
  Vector w_col;
  Vector h_rows;
  kernels::matmul(w, h, wh);
  for (int it = 0; it < iters; ++it) {
    kernels::ratio_floored(v, wh, floor, p);
    update_h(w, p, floor, h, h_num, w_col);
    kernels::matmul(w, h, wh);
    kernels::ratio_floored(v, wh, floor, p);
    update_w(p, h, floor, w, w_num, h_rows);
    kernels::matmul(w, h, wh);
    if (history) history->push_back(kernels::kl_divergence(v, wh, floor));
  }
}

void kl_nmf_iterate_h(const Matrix& v, const Matrix& w, Matrix& h, int iters,
                      double floor) {
  Matrix wh;
  Matrix p;
  Matrix h_num;
  Vector w_col;
  for (int it = 0; it < iters; ++it) {
    kernels::matmul(w, h, wh);
    kernels::ratio_floored(v, wh, floor, p);
    update_h(w, p, floor, h, h_num, w_col);
  }
}

NmfModel nmf_train(
    const std::vector<std::pair<SemanticVector, HacVector>>& pairs,
    const NmfConfig& cfg, const SlotSchema& schema) {
  cfg.validate();
  schema.validate();
  require(!pairs.empty(), ErrorCode::kConfig, "nmf_train: no training pairs");

  const std::size_t d_dim = pairs.front().first.size();
  const std::size_t a_dim = pairs.front().second.size();
  const HacConfig& hac = pairs.front().second.config;
  require(d_dim == schema.dimension(), ErrorCode::kConfig,
          "semantic vector length does not match schema");
  for (const auto& [sem, ac] : pairs) {
    require(sem.size() == d_dim && ac.size() == a_dim && ac.config == hac,
            ErrorCode::kConfig,
            "nmf_train: inconsistent pair dimensions or HAC config");
  }

  const std::size_t n = pairs.size();
  const std::size_t k = cfg.k != 0 ? cfg.k : d_dim + 5;
  if (k > n)
    warn("nmf_train: latent dimension " + std::to_string(k) +
         " exceeds number of pairs " + std::to_string(n) +
         " (over-parameterized)");

  Matrix v(d_dim + a_dim, n, 0.0);
  std::size_t zero_columns = 0;
  for (std::size_t col = 0; col < n; ++col) {
    const auto& [sem, ac] = pairs[col];
    for (std::size_t i = 0; i < d_dim; ++i)
      v(i, col) = cfg.semantic_weight * static_cast<double>(sem.bits[i]);
    double sum = 0.0;
    for (const double x : ac.values) sum += x;
    if (sum <= 0.0) {
      ++zero_columns;
      continue;  // leave the acoustic block zero
    }
    for (std::size_t i = 0; i < a_dim; ++i)
      v(d_dim + i, col) = ac.values[i] / sum;
  }
  if (zero_columns > 0)
    warn("nmf_train: " + std::to_string(zero_columns) +
         " all-zero acoustic column(s)");

  Matrix best_w;
  std::vector<double> best_history;
  for (int restart = 0; restart < cfg.restarts; ++restart) {
    Rng rng(mix_seed(cfg.seed, "nmf-train", static_cast<std::uint64_t>(restart)));
    Matrix w(d_dim + a_dim, k);
    Matrix h(k, n);
    seed_uniform(w, rng, cfg.floor, 1.0);
    seed_uniform(h, rng, cfg.floor, 1.0);
    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(cfg.train_iters));
    kl_nmf_iterate(v, w, h, cfg.train_iters, cfg.floor, &history);
    if (restart == 0 || history.back() < best_history.back()) {
      best_w = std::move(w);
      best_history = std::move(history);
    }
  }

  // Absorb column scales into H (discarded) so stacked columns sum to 1.
  for (std::size_t col = 0; col < k; ++col) {
    double sum = 0.0;
    for (std::size_t r = 0; r < best_w.rows(); ++r) sum += best_w(r, col);
    for (std::size_t r = 0; r < best_w.rows(); ++r) best_w(r, col) /= sum;
  }

  NmfModel model;
  model.config = cfg;
  model.config.k = k;
  model.hac = hac;
  model.schema_digest = schema.digest();
  model.objective_history = std::move(best_history);
  model.w_semantic = Matrix(d_dim, k);
  model.w_acoustic = Matrix(a_dim, k);
  for (std::size_t r = 0; r < d_dim; ++r)
    for (std::size_t c = 0; c < k; ++c) model.w_semantic(r, c) = best_w(r, c);
  for (std::size_t r = 0; r < a_dim; ++r)
    for (std::size_t c = 0; c < k; ++c)
      model.w_acoustic(r, c) = best_w(d_dim + r, c);
  return model;
}

Matrix nmf_infer_batch(const NmfModel& model,
                       const std::vector<const HacVector*>& tests,
                       std::vector<std::uint8_t>* degenerate) {
  const std::size_t a_dim = model.w_acoustic.rows();
  const std::size_t k = model.latent_dim();
  const std::size_t n = tests.size();
  require(n > 0, ErrorCode::kConfig, "nmf_infer: no test vectors");
  if (degenerate) degenerate->assign(n, 0);

  Matrix v(a_dim, n, 0.0);
  for (std::size_t col = 0; col < n; ++col) {
    require(tests[col]->size() == a_dim, ErrorCode::kIncompatible,
            "nmf_infer: HAC length does not match the acoustic dictionary");
    double sum = 0.0;
    for (const double x : tests[col]->values) sum += x;
    if (sum <= 0.0) {
      warn("nmf_infer: all-zero acoustic input (degenerate)");
      if (degenerate) (*degenerate)[col] = 1;
      continue;
    }
    for (std::size_t i = 0; i < a_dim; ++i)
      v(i, col) = tests[col]->values[i] / sum;
  }

  // All columns share one seeded init so batched and single-item inference
  // produce identical activations.
  Rng rng(mix_seed(model.config.seed, "nmf-infer"));
  Vector init(k);
  for (auto& x : init) x = rng.uniform(model.config.floor, 1.0);
  Matrix h(k, n);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < n; ++c) h(r, c) = init[r];

  kl_nmf_iterate_h(v, model.w_acoustic, h, model.config.infer_iters,
                   model.config.floor);
  return h;
}

NmfActivation nmf_infer(const NmfModel& model, const HacVector& test) {
  std::vector<std::uint8_t> degenerate;
  const Matrix h = nmf_infer_batch(model, {&test}, &degenerate);
  NmfActivation out;
  out.degenerate = degenerate[0] != 0;
  out.h.resize(h.rows());
  for (std::size_t r = 0; r < h.rows(); ++r) out.h[r] = h(r, 0);
  return out;
}

Vector nmf_predict(const NmfModel& model, const Vector& h) {
  require(h.size() == model.latent_dim(), ErrorCode::kIncompatible,
          "nmf_predict: activation length mismatch");
  Vector out(model.w_semantic.rows(), 0.0);
  for (std::size_t r = 0; r < model.w_semantic.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < model.w_semantic.cols(); ++c)
      acc += model.w_semantic(r, c) * h[c];
    out[r] = acc;
  }
  return out;
}

void save_nmf_model(const NmfModel& model, const std::filesystem::path& path) {
  std::string out;
  const std::size_t d = model.w_semantic.rows();
  const std::size_t a = model.w_acoustic.rows();
  const std::size_t k = model.latent_dim();
  out += "NMF " + std::to_string(d) + " " + std::to_string(a) + " " +
         std::to_string(k) + " " + format_g17(model.config.semantic_weight) +
         "\n";
  out += "delays";
  for (const int dl : model.hac.delays) out += " " + std::to_string(dl);
  out += "\n";
  out += "schema " + hex16(model.schema_digest) + "\n";
  out += "infer " + std::to_string(model.config.infer_iters) + " " +
         format_g17(model.config.floor) + " " +
         std::to_string(model.config.seed) + "\n";
  const auto dump = [&out](const Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto row = m.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out += ' ';
        out += format_g17(row[c]);
      }
      out += '\n';
    }
  };
  dump(model.w_semantic);
  dump(model.w_acoustic);
  write_file_atomic(path.string(), out);
}

NmfModel load_nmf_model(const std::filesystem::path& path) {
  std::istringstream in(read_file(path.string()));
  std::string line;

  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
          "nmf model: empty file");
  auto header = split_ws(line);
  require(header.size() == 5 && header[0] == "NMF", ErrorCode::kParse,
          "nmf model: malformed header");
  const std::size_t d =
      static_cast<std::size_t>(parse_long_or_throw(header[1], "D"));
  const std::size_t a =
      static_cast<std::size_t>(parse_long_or_throw(header[2], "A"));
  const std::size_t k =
      static_cast<std::size_t>(parse_long_or_throw(header[3], "K"));
  const double beta = parse_double_or_throw(header[4], "beta");

  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
          "nmf model: missing delays line");
  auto delay_tokens = split_ws(line);
  require(delay_tokens.size() >= 2 && delay_tokens[0] == "delays",
          ErrorCode::kParse, "nmf model: malformed delays line");
  HacConfig hac;
  hac.delays.clear();
  for (std::size_t i = 1; i < delay_tokens.size(); ++i)
    hac.delays.push_back(
        static_cast<int>(parse_long_or_throw(delay_tokens[i], "delay")));
  hac.validate();

  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
          "nmf model: missing schema line");
  auto schema_tokens = split_ws(line);
  require(schema_tokens.size() == 2 && schema_tokens[0] == "schema",
          ErrorCode::kParse, "nmf model: malformed schema line");
  std::uint64_t digest = 0;
  {
    const auto tok = schema_tokens[1];
    const auto [p, e] =
        std::from_chars(tok.data(), tok.data() + tok.size(), digest, 16);
    require(e == std::errc() && p == tok.data() + tok.size(),
            ErrorCode::kParse, "nmf model: bad schema digest");
  }

  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
          "nmf model: missing infer line");
  auto infer_tokens = split_ws(line);
  require(infer_tokens.size() == 4 && infer_tokens[0] == "infer",
          ErrorCode::kParse, "nmf model: malformed infer line");

  NmfModel model;
  model.config.k = k;
  model.config.semantic_weight = beta;
  model.config.infer_iters =
      static_cast<int>(parse_long_or_throw(infer_tokens[1], "infer_iters"));
  model.config.floor = parse_double_or_throw(infer_tokens[2], "floor");
  model.config.seed = parse_u64_or_throw(infer_tokens[3], "seed");
  model.hac = hac;
  model.schema_digest = digest;

  const auto read_matrix = [&](std::size_t rows, std::size_t cols,
                               const char* what) {
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
              std::string("nmf model: truncated ") + what);
      const auto tokens = split_ws(line);
      require(tokens.size() == cols, ErrorCode::kParse,
              std::string("nmf model: bad row width in ") + what);
      for (std::size_t c = 0; c < cols; ++c)
        m(r, c) = parse_double_or_throw(tokens[c], what);
    }
    return m;
  };
  model.w_semantic = read_matrix(d, k, "W_s");
  model.w_acoustic = read_matrix(a, k, "W_a");
  return model;
}

}  // namespace s2i
