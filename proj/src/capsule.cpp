// src/capsule.cpp

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

#include "s2i/capsule.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "s2i/common.hpp"

namespace s2i {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void softmax_inplace(std::span<double> row) {
  double max = row[0];
  for (const double v : row) max = std::max(max, v);
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v - max);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

// grad_in = s * (grad - dot(grad, s)) for s = softmax output.
void softmax_backward(std::span<const double> s, std::span<const double> grad,
                      std::span<double> out) {
  double dot = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) dot += s[i] * grad[i];
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] * (grad[i] - dot);
}

// Backward of squash given its input s: with n = |s|, f(n) = n/(1+n^2),
// dv/ds = f * Id + (f'(n)/n) * s s^T and f'(n) = (1-n^2)/(1+n^2)^2.
void squash_backward(std::span<const double> s, std::span<const double> grad,
                     std::span<double> out) {
  double n2 = 0.0;
  for (const double v : s) n2 += v * v;
  if (n2 == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double n = std::sqrt(n2);
  const double denom = 1.0 + n2;
  const double f = n / denom;
  const double fp_over_n = (1.0 - n2) / (denom * denom * n);
  double sdotg = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) sdotg += s[i] * grad[i];
  for (std::size_t i = 0; i < s.size(); ++i)
    out[i] = f * grad[i] + sdotg * fp_over_n * s[i];
}

}  // namespace

void CapsuleConfig::validate() const {
  require(n_primary >= 1 && d_primary >= 1 && d_output >= 1,
          ErrorCode::kConfig, "capsule dimensions must be positive");
  require(routing_iters >= 1, ErrorCode::kConfig,
          "routing iterations must be >= 1");
  require(0.0 < margin_neg && margin_neg < margin_pos && margin_pos < 1.0,
          ErrorCode::kConfig, "margins must satisfy 0 < m- < m+ < 1");
  require(down_weight > 0.0, ErrorCode::kConfig,
          "down-weight must be positive");
  require(step_size > 0.0, ErrorCode::kConfig, "step size must be positive");
  require(epochs >= 1, ErrorCode::kConfig, "epochs must be >= 1");
  require(batch_size >= 1, ErrorCode::kConfig, "batch size must be >= 1");
}

void CapsuleParams::resize(std::size_t c, std::size_t i, std::size_t p,
                           std::size_t o, std::size_t l) {
  attention_w.assign(c, 0.0);
  attention_b = 0.0;
  distributor_w = Matrix(i, c);
  distributor_b.assign(i, 0.0);
  squash_w.assign(i * p * c, 0.0);
  routing_w.assign(i * l * o * p, 0.0);
}

void CapsuleParams::fill(double v) {
  std::fill(attention_w.begin(), attention_w.end(), v);
  attention_b = v;
  distributor_w.fill(v);
  std::fill(distributor_b.begin(), distributor_b.end(), v);
  std::fill(squash_w.begin(), squash_w.end(), v);
  std::fill(routing_w.begin(), routing_w.end(), v);
}

std::vector<std::span<double>> CapsuleParams::views() {
  return {
      {attention_w.data(), attention_w.size()},
      {&attention_b, 1},
      {distributor_w.data(), distributor_w.size()},
      {distributor_b.data(), distributor_b.size()},
      {squash_w.data(), squash_w.size()},
      {routing_w.data(), routing_w.size()},
  };
}

void squash(std::span<const double> s, std::span<double> out) {
  double n2 = 0.0;
  for (const double v : s) n2 += v * v;
  if (n2 == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double scale = std::sqrt(n2) / (1.0 + n2);
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = scale * s[i];
}

CapsuleForward capsule_forward(const CapsuleModel& model,
                               const Posteriorgram& pg, CapsuleTrace* trace) {
  const std::size_t c_dim = model.alphabet_size;
  const std::size_t i_dim = model.config.n_primary;
  const std::size_t p_dim = model.config.d_primary;
  const std::size_t o_dim = model.config.d_output;
  const std::size_t l_dim = model.n_labels;
  const std::size_t t_dim = pg.num_frames();
  require(pg.num_symbols() == c_dim, ErrorCode::kIncompatible,
          "capsule_forward: posteriorgram symbol count mismatch");

  CapsuleTrace local;
  CapsuleTrace& tr = trace ? *trace : local;

  tr.inputs = Matrix(t_dim, c_dim);
  for (std::size_t t = 0; t < t_dim; ++t)
    for (std::size_t c = 0; c < c_dim; ++c)
      tr.inputs(t, c) =
          std::max(pg.log_frames(t, c), model.config.input_log_floor);

  // Attention and distributor weights per frame.
  tr.alpha.assign(t_dim, 0.0);
  tr.delta = Matrix(t_dim, i_dim);
  for (std::size_t t = 0; t < t_dim; ++t) {
    const double* f = tr.inputs.data() + t * c_dim;
    double a = model.params.attention_b;
    for (std::size_t c = 0; c < c_dim; ++c)
      a += model.params.attention_w[c] * f[c];
    tr.alpha[t] = sigmoid(a);
    auto drow = tr.delta.row(t);
    for (std::size_t i = 0; i < i_dim; ++i) {
      double z = model.params.distributor_b[i];
      const double* wrow = model.params.distributor_w.data() + i * c_dim;
      for (std::size_t c = 0; c < c_dim; ++c) z += wrow[c] * f[c];
      drow[i] = z;
    }
    softmax_inplace(drow);
  }

  // Attention/distributor-weighted frame pooling per primary capsule.
  tr.pooled = Matrix(i_dim, c_dim, 0.0);
  const std::int64_t i_count = static_cast<std::int64_t>(i_dim);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < i_count; ++i) {
    double* grow = tr.pooled.data() + static_cast<std::size_t>(i) * c_dim;
    for (std::size_t t = 0; t < t_dim; ++t) {
      const double wt = tr.alpha[t] * tr.delta(t, static_cast<std::size_t>(i));
      const double* f = tr.inputs.data() + t * c_dim;
      for (std::size_t c = 0; c < c_dim; ++c) grow[c] += wt * f[c];
    }
  }

  // Primary capsules: per-capsule projection then squash.
  tr.s_pre = Matrix(i_dim, p_dim);
  tr.s_caps = Matrix(i_dim, p_dim);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < i_count; ++i) {
    const std::size_t iu = static_cast<std::size_t>(i);
    const double* grow = tr.pooled.data() + iu * c_dim;
    for (std::size_t p = 0; p < p_dim; ++p) {
      const double* wrow =
          model.params.squash_w.data() + (iu * p_dim + p) * c_dim;
      double acc = 0.0;
      for (std::size_t c = 0; c < c_dim; ++c) acc += wrow[c] * grow[c];
      tr.s_pre(iu, p) = acc;
    }
    squash(tr.s_pre.row(iu), tr.s_caps.row(iu));
  }

  // Predictions u_hat(i,j) = W_route^(i,j) * S_i.
  tr.u_hat.assign(i_dim * l_dim * o_dim, 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < i_count; ++i) {
    const std::size_t iu = static_cast<std::size_t>(i);
    const double* s = tr.s_caps.data() + iu * p_dim;
    for (std::size_t j = 0; j < l_dim; ++j) {
      for (std::size_t o = 0; o < o_dim; ++o) {
        const double* wrow =
            model.params.routing_w.data() + ((iu * l_dim + j) * o_dim + o) * p_dim;
        double acc = 0.0;
        for (std::size_t p = 0; p < p_dim; ++p) acc += wrow[p] * s[p];
        tr.u_hat[(iu * l_dim + j) * o_dim + o] = acc;
      }
    }
  }

  // Routing by agreement.
  const int r_iters = model.config.routing_iters;
  tr.coupling.assign(static_cast<std::size_t>(r_iters), Matrix());
  tr.sigma.assign(static_cast<std::size_t>(r_iters), Matrix());
  tr.v.assign(static_cast<std::size_t>(r_iters), Matrix());
  Matrix logits(i_dim, l_dim, 0.0);
  for (int r = 0; r < r_iters; ++r) {
    Matrix& coup = tr.coupling[static_cast<std::size_t>(r)];
    coup = logits;
    for (std::size_t i = 0; i < i_dim; ++i) softmax_inplace(coup.row(i));

    Matrix& sig = tr.sigma[static_cast<std::size_t>(r)];
    sig = Matrix(l_dim, o_dim, 0.0);
    for (std::size_t j = 0; j < l_dim; ++j) {
      double* srow = sig.data() + j * o_dim;
      for (std::size_t i = 0; i < i_dim; ++i) {
        const double cij = coup(i, j);
        const double* u = tr.u_hat.data() + (i * l_dim + j) * o_dim;
        for (std::size_t o = 0; o < o_dim; ++o) srow[o] += cij * u[o];
      }
    }

    Matrix& vout = tr.v[static_cast<std::size_t>(r)];
    vout = Matrix(l_dim, o_dim);
    for (std::size_t j = 0; j < l_dim; ++j) squash(sig.row(j), vout.row(j));

    if (r + 1 < r_iters) {
      for (std::size_t i = 0; i < i_dim; ++i) {
        for (std::size_t j = 0; j < l_dim; ++j) {
          const double* u = tr.u_hat.data() + (i * l_dim + j) * o_dim;
          const double* vj = vout.data() + j * o_dim;
          double agree = 0.0;
          for (std::size_t o = 0; o < o_dim; ++o) agree += u[o] * vj[o];
          logits(i, j) += agree;
        }
      }
    }
  }

  CapsuleForward out;
  out.outputs = tr.v.back();
  out.lengths.assign(l_dim, 0.0);
  for (std::size_t j = 0; j < l_dim; ++j) {
    double n2 = 0.0;
    for (const double v : out.outputs.row(j)) n2 += v * v;
    out.lengths[j] = std::sqrt(n2);
  }
  return out;
}

double capsule_loss(const Vector& lengths, std::size_t true_label,
                    const CapsuleConfig& cfg) {
  require(true_label < lengths.size(), ErrorCode::kConfig,
          "capsule_loss: label out of range");
  double loss = 0.0;
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    if (k == true_label) {
      const double hinge = std::max(0.0, cfg.margin_pos - lengths[k]);
      loss += hinge * hinge;
    } else {
      const double hinge = std::max(0.0, lengths[k] - cfg.margin_neg);
      loss += cfg.down_weight * hinge * hinge;
    }
  }
  return loss;
}

double capsule_loss_and_gradients(const CapsuleModel& model,
                                  const Posteriorgram& pg, std::size_t label,
                                  CapsuleParams& grad) {
  const std::size_t c_dim = model.alphabet_size;
  const std::size_t i_dim = model.config.n_primary;
  const std::size_t p_dim = model.config.d_primary;
  const std::size_t o_dim = model.config.d_output;
  const std::size_t l_dim = model.n_labels;

  CapsuleTrace tr;
  const CapsuleForward fwd = capsule_forward(model, pg, &tr);
  const double loss = capsule_loss(fwd.lengths, label, model.config);
  const std::size_t t_dim = tr.inputs.rows();
  const int r_iters = model.config.routing_iters;

  // d loss / d final v.
  Matrix grad_v(l_dim, o_dim, 0.0);
  for (std::size_t j = 0; j < l_dim; ++j) {
    const double len = fwd.lengths[j];
    if (len <= 0.0) continue;
    double dl;
    if (j == label) {
      dl = -2.0 * std::max(0.0, model.config.margin_pos - len);
    } else {
      dl = 2.0 * model.config.down_weight *
           std::max(0.0, len - model.config.margin_neg);
    }
    if (dl == 0.0) continue;
    const double* vj = fwd.outputs.data() + j * o_dim;
    double* g = grad_v.data() + j * o_dim;
    for (std::size_t o = 0; o < o_dim; ++o) g[o] = dl * vj[o] / len;
  }

  // Backprop through the unrolled routing iterations.
  Vector grad_u(i_dim * l_dim * o_dim, 0.0);
  Matrix carry_b;  // gradient flowing into earlier routing logits
  Vector grad_sigma_row(o_dim);
  for (int r = r_iters - 1; r >= 0; --r) {
    const Matrix& sig = tr.sigma[static_cast<std::size_t>(r)];
    const Matrix& coup = tr.coupling[static_cast<std::size_t>(r)];
    Matrix grad_sigma(l_dim, o_dim);
    for (std::size_t j = 0; j < l_dim; ++j) {
      squash_backward(sig.row(j), grad_v.row(j), grad_sigma_row);
      std::copy(grad_sigma_row.begin(), grad_sigma_row.end(),
                grad_sigma.row(j).begin());
    }

    Matrix grad_c(i_dim, l_dim, 0.0);
    for (std::size_t i = 0; i < i_dim; ++i) {
      for (std::size_t j = 0; j < l_dim; ++j) {
        const double* u = tr.u_hat.data() + (i * l_dim + j) * o_dim;
        const double* gs = grad_sigma.data() + j * o_dim;
        const double cij = coup(i, j);
        double dot = 0.0;
        double* gu = grad_u.data() + (i * l_dim + j) * o_dim;
        for (std::size_t o = 0; o < o_dim; ++o) {
          dot += gs[o] * u[o];
          gu[o] += cij * gs[o];
        }
        grad_c(i, j) = dot;
      }
    }

    if (r == 0) break;  // the first coupling comes from constant zero logits

    // Total gradient into the logits behind coupling[r]: softmax backward
    // plus the identity chain from later iterations.
    Matrix gb(i_dim, l_dim);
    for (std::size_t i = 0; i < i_dim; ++i)
      softmax_backward(coup.row(i), grad_c.row(i), gb.row(i));
    if (!carry_b.empty())
      for (std::size_t idx = 0; idx < gb.size(); ++idx)
        gb.data()[idx] += carry_b.data()[idx];

    // Those logits were bumped by dot(u_hat, v[r-1]).
    const Matrix& v_prev = tr.v[static_cast<std::size_t>(r - 1)];
    Matrix grad_v_prev(l_dim, o_dim, 0.0);
    for (std::size_t i = 0; i < i_dim; ++i) {
      for (std::size_t j = 0; j < l_dim; ++j) {
        const double g = gb(i, j);
        if (g == 0.0) continue;
        const double* u = tr.u_hat.data() + (i * l_dim + j) * o_dim;
        const double* vp = v_prev.data() + j * o_dim;
        double* gu = grad_u.data() + (i * l_dim + j) * o_dim;
        double* gvp = grad_v_prev.data() + j * o_dim;
        for (std::size_t o = 0; o < o_dim; ++o) {
          gu[o] += g * vp[o];
          gvp[o] += g * u[o];
        }
      }
    }
    carry_b = std::move(gb);
    grad_v = std::move(grad_v_prev);
  }

  // u_hat(i,j) = W_route^(i,j) S_i.
  Matrix grad_s(i_dim, p_dim, 0.0);
  const std::int64_t i_count = static_cast<std::int64_t>(i_dim);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < i_count; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    const double* s = tr.s_caps.data() + i * p_dim;
    double* gs = grad_s.data() + i * p_dim;
    for (std::size_t j = 0; j < l_dim; ++j) {
      for (std::size_t o = 0; o < o_dim; ++o) {
        const double gu = grad_u[(i * l_dim + j) * o_dim + o];
        if (gu == 0.0) continue;
        const std::size_t base = ((i * l_dim + j) * o_dim + o) * p_dim;
        double* gw = grad.routing_w.data() + base;
        const double* w = model.params.routing_w.data() + base;
        for (std::size_t p = 0; p < p_dim; ++p) {
          gw[p] += gu * s[p];
          gs[p] += gu * w[p];
        }
      }
    }
  }

  // S_i = squash(s_pre_i), s_pre_i = W_s^i pooled_i.
  Matrix grad_pooled(i_dim, c_dim, 0.0);
  Vector grad_spre(p_dim);
#pragma omp parallel for schedule(static) private(grad_spre)
  for (std::int64_t ii = 0; ii < i_count; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    grad_spre.assign(p_dim, 0.0);
    squash_backward(tr.s_pre.row(i), grad_s.row(i),
                    {grad_spre.data(), p_dim});
    const double* pooled = tr.pooled.data() + i * c_dim;
    double* gpool = grad_pooled.data() + i * c_dim;
    for (std::size_t p = 0; p < p_dim; ++p) {
      const double g = grad_spre[p];
      if (g == 0.0) continue;
      double* gw = grad.squash_w.data() + (i * p_dim + p) * c_dim;
      const double* w = model.params.squash_w.data() + (i * p_dim + p) * c_dim;
      for (std::size_t c = 0; c < c_dim; ++c) {
        gw[c] += g * pooled[c];
        gpool[c] += g * w[c];
      }
    }
  }

  // pooled_i = sum_t alpha_t delta(t,i) F_t.
  Vector grad_delta_row(i_dim);
  Vector grad_z(i_dim);
  for (std::size_t t = 0; t < t_dim; ++t) {
    const double* f = tr.inputs.data() + t * c_dim;
    double grad_alpha = 0.0;
    for (std::size_t i = 0; i < i_dim; ++i) {
      const double* gpool = grad_pooled.data() + i * c_dim;
      double q = 0.0;
      for (std::size_t c = 0; c < c_dim; ++c) q += gpool[c] * f[c];
      grad_alpha += tr.delta(t, i) * q;
      grad_delta_row[i] = tr.alpha[t] * q;
    }
    const double a = tr.alpha[t];
    const double grad_a = grad_alpha * a * (1.0 - a);
    for (std::size_t c = 0; c < c_dim; ++c)
      grad.attention_w[c] += grad_a * f[c];
    grad.attention_b += grad_a;

    softmax_backward(tr.delta.row(t), grad_delta_row, grad_z);
    for (std::size_t i = 0; i < i_dim; ++i) {
      const double gz = grad_z[i];
      if (gz == 0.0) continue;
      double* gw = grad.distributor_w.data() + i * c_dim;
      for (std::size_t c = 0; c < c_dim; ++c) gw[c] += gz * f[c];
      grad.distributor_b[i] += gz;
    }
  }

  return loss;
}

CapsuleModel capsule_train(const std::vector<const Posteriorgram*>& inputs,
                           const std::vector<std::size_t>& labels,
                           std::size_t n_labels, const CapsuleConfig& cfg,
                           std::size_t alphabet_size,
                           std::uint64_t inventory_digest) {
  cfg.validate();
  require(!inputs.empty(), ErrorCode::kConfig, "capsule_train: empty dataset");
  require(inputs.size() == labels.size(), ErrorCode::kConfig,
          "capsule_train: inputs/labels size mismatch");
  require(n_labels >= 1, ErrorCode::kConfig, "capsule_train: no labels");
  for (const std::size_t l : labels)
    require(l < n_labels, ErrorCode::kConfig,
            "capsule_train: label out of range");
  for (const Posteriorgram* pg : inputs)
    require(pg->num_symbols() == alphabet_size, ErrorCode::kIncompatible,
            "capsule_train: posteriorgram symbol count mismatch");

  const std::size_t c_dim = alphabet_size;
  const std::size_t i_dim = cfg.n_primary;
  const std::size_t p_dim = cfg.d_primary;
  const std::size_t o_dim = cfg.d_output;

  CapsuleModel model;
  model.config = cfg;
  model.alphabet_size = c_dim;
  model.n_labels = n_labels;
  model.inventory_digest = inventory_digest;
  model.params.resize(c_dim, i_dim, p_dim, o_dim, n_labels);

  {
    Rng rng(mix_seed(cfg.seed, "capsule-init"));
    for (auto view : model.params.views())
      for (double& p : view) p = rng.uniform(-0.05, 0.05);
  }

  // Adam moments.
  CapsuleParams m1;
  CapsuleParams m2;
  m1.resize(c_dim, i_dim, p_dim, o_dim, n_labels);
  m2.resize(c_dim, i_dim, p_dim, o_dim, n_labels);
  CapsuleParams grad;
  grad.resize(c_dim, i_dim, p_dim, o_dim, n_labels);
  const double beta1 = 0.9;
  const double beta2 = 0.999;
  const double adam_eps = 1e-8;
  long step = 0;

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);

  model.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle_each_epoch) {
      Rng rng(mix_seed(cfg.seed, "capsule-epoch",
                       static_cast<std::uint64_t>(epoch)));
      rng.shuffle(order);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      grad.fill(0.0);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b)
        batch_loss += capsule_loss_and_gradients(model, *inputs[order[b]],
                                                 labels[order[b]], grad);
      const double inv = 1.0 / static_cast<double>(end - start);
      batch_loss *= inv;
      require(std::isfinite(batch_loss), ErrorCode::kNumeric,
              "capsule training diverged: non-finite loss "
              "(step size too large)");
      epoch_loss += batch_loss * static_cast<double>(end - start);

      ++step;
      const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      auto pv = model.params.views();
      auto gv = grad.views();
      auto m1v = m1.views();
      auto m2v = m2.views();
      for (std::size_t group = 0; group < pv.size(); ++group) {
        double* p = pv[group].data();
        double* g = gv[group].data();
        double* a = m1v[group].data();
        double* b2 = m2v[group].data();
        const std::int64_t count =
            static_cast<std::int64_t>(pv[group].size());
#pragma omp parallel for schedule(static)
        for (std::int64_t idx = 0; idx < count; ++idx) {
          const double gi = g[idx] * inv;
          a[idx] = beta1 * a[idx] + (1.0 - beta1) * gi;
          b2[idx] = beta2 * b2[idx] + (1.0 - beta2) * gi * gi;
          const double mh = a[idx] / corr1;
          const double vh = b2[idx] / corr2;
          p[idx] -= cfg.step_size * mh / (std::sqrt(vh) + adam_eps);
        }
      }
    }
    model.epoch_loss.push_back(epoch_loss /
                               static_cast<double>(order.size()));
  }

  for (auto view : model.params.views())
    for (const double p : view)
      require(std::isfinite(p), ErrorCode::kNumeric,
              "capsule training diverged: non-finite parameter");
  return model;
}

std::size_t capsule_classify(const CapsuleModel& model,
                             const Posteriorgram& pg) {
  const CapsuleForward fwd = capsule_forward(model, pg);
  std::size_t best = 0;
  double best_len = -1.0;
  for (std::size_t j = 0; j < fwd.lengths.size(); ++j) {
    if (fwd.lengths[j] > best_len) {
      best_len = fwd.lengths[j];
      best = j;
    }
  }
  return best;
}

namespace {

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

double parse_d(std::string_view token, const char* what) {
  double v = 0.0;
  const auto [p, e] =
      std::from_chars(token.data(), token.data() + token.size(), v);
  require(e == std::errc() && p == token.data() + token.size(),
          ErrorCode::kParse, std::string("capsule model: bad ") + what);
  return v;
}

long parse_l(std::string_view token, const char* what) {
  long v = 0;
  const auto [p, e] =
      std::from_chars(token.data(), token.data() + token.size(), v);
  require(e == std::errc() && p == token.data() + token.size(),
          ErrorCode::kParse, std::string("capsule model: bad ") + what);
  return v;
}

void dump_values(std::string& out, std::span<const double> values,
                 std::size_t per_line) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += format_g17(values[i]);
    out += (i % per_line == per_line - 1) ? '\n' : ' ';
  }
  if (values.size() % per_line != 0) out += '\n';
}

}  // namespace

void save_capsule_model(const CapsuleModel& model,
                        const std::filesystem::path& path) {
  const std::size_t c = model.alphabet_size;
  const std::size_t i = model.config.n_primary;
  const std::size_t p = model.config.d_primary;
  const std::size_t o = model.config.d_output;
  const std::size_t l = model.n_labels;
  std::string out;
  out += "CAPS " + std::to_string(c) + " " + std::to_string(i) + " " +
         std::to_string(p) + " " + std::to_string(o) + " " +
         std::to_string(l) + "\n";
  out += "routing_iters " + std::to_string(model.config.routing_iters) + "\n";
  out += "input_log_floor " + format_g17(model.config.input_log_floor) + "\n";
  out += "inventory " + hex16(model.inventory_digest) + "\n";
  dump_values(out, model.params.attention_w, c);
  dump_values(out, {&model.params.attention_b, 1}, 1);
  dump_values(out, model.params.distributor_w.storage(), c);
  dump_values(out, model.params.distributor_b, i);
  dump_values(out, model.params.squash_w, c);
  dump_values(out, model.params.routing_w, p);
  write_file_atomic(path.string(), out);
}

CapsuleModel load_capsule_model(const std::filesystem::path& path) {
  std::istringstream in(read_file(path.string()));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
          "capsule model: empty file");
  const auto header = split_ws(line);
  require(header.size() == 6 && header[0] == "CAPS", ErrorCode::kParse,
          "capsule model: malformed header");
  const std::size_t c = static_cast<std::size_t>(parse_l(header[1], "C"));
  const std::size_t i = static_cast<std::size_t>(parse_l(header[2], "I"));
  const std::size_t p = static_cast<std::size_t>(parse_l(header[3], "P"));
  const std::size_t o = static_cast<std::size_t>(parse_l(header[4], "O"));
  const std::size_t l = static_cast<std::size_t>(parse_l(header[5], "L"));
  require(c >= 2 && i >= 1 && p >= 1 && o >= 1 && l >= 1, ErrorCode::kParse,
          "capsule model: bad dimensions");

  CapsuleModel model;
  model.alphabet_size = c;
  model.n_labels = l;
  model.config.n_primary = i;
  model.config.d_primary = p;
  model.config.d_output = o;

  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
          "capsule model: missing routing_iters");
  auto tokens = split_ws(line);
  require(tokens.size() == 2 && tokens[0] == "routing_iters",
          ErrorCode::kParse, "capsule model: malformed routing_iters");
  model.config.routing_iters = static_cast<int>(parse_l(tokens[1], "iters"));

  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
          "capsule model: missing input_log_floor");
  tokens = split_ws(line);
  require(tokens.size() == 2 && tokens[0] == "input_log_floor",
          ErrorCode::kParse, "capsule model: malformed input_log_floor");
  model.config.input_log_floor = parse_d(tokens[1], "floor");

  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
          "capsule model: missing inventory digest");
  tokens = split_ws(line);
  require(tokens.size() == 2 && tokens[0] == "inventory", ErrorCode::kParse,
          "capsule model: malformed inventory line");
  {
    const auto tok = tokens[1];
    const auto [ptr, ec] = std::from_chars(
        tok.data(), tok.data() + tok.size(), model.inventory_digest, 16);
    require(ec == std::errc() && ptr == tok.data() + tok.size(),
            ErrorCode::kParse, "capsule model: bad inventory digest");
  }

  model.params.resize(c, i, p, o, l);
  const auto read_block = [&](std::span<double> dst, const char* what) {
    std::size_t filled = 0;
    while (filled < dst.size()) {
      require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
              std::string("capsule model: truncated ") + what);
      for (const auto tok : split_ws(line)) {
        require(filled < dst.size(), ErrorCode::kParse,
                std::string("capsule model: excess values in ") + what);
        dst[filled++] = parse_d(tok, what);
      }
    }
  };
  read_block(model.params.attention_w, "attention_w");
  read_block({&model.params.attention_b, 1}, "attention_b");
  read_block(model.params.distributor_w.storage(), "distributor_w");
  read_block(model.params.distributor_b, "distributor_b");
  read_block(model.params.squash_w, "squash_w");
  read_block(model.params.routing_w, "routing_w");
  return model;
}

}  // namespace s2i
