// src/kernels.cpp

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

#include "s2i/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace s2i::kernels {

namespace {
void resize(Matrix& m, std::size_t rows, std::size_t cols) {
  if (m.rows() != rows || m.cols() != cols) m = Matrix(rows, cols);
}
}  // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::int64_t rows = static_cast<std::int64_t>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t cols = b.cols();
  resize(out, a.rows(), cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    double* out_row = out.data() + static_cast<std::size_t>(i) * cols;
    std::fill(out_row, out_row + cols, 0.0);
    const double* a_row = a.data() + static_cast<std::size_t>(i) * inner;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a_row[k];
      const double* b_row = b.data() + k * cols;
      for (std::size_t j = 0; j < cols; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::int64_t k_dim = static_cast<std::int64_t>(a.cols());
  const std::size_t r_dim = a.rows();
  const std::size_t n_dim = b.cols();
  resize(out, a.cols(), n_dim);
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < k_dim; ++k) {
    double* out_row = out.data() + static_cast<std::size_t>(k) * n_dim;
    std::fill(out_row, out_row + n_dim, 0.0);
    for (std::size_t r = 0; r < r_dim; ++r) {
      const double ark = a(r, static_cast<std::size_t>(k));
      const double* b_row = b.data() + r * n_dim;
      for (std::size_t n = 0; n < n_dim; ++n) out_row[n] += ark * b_row[n];
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::int64_t r_dim = static_cast<std::int64_t>(a.rows());
  const std::size_t n_dim = a.cols();
  const std::size_t k_dim = b.rows();
  resize(out, a.rows(), k_dim);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < r_dim; ++r) {
    const double* a_row = a.data() + static_cast<std::size_t>(r) * n_dim;
    double* out_row = out.data() + static_cast<std::size_t>(r) * k_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const double* b_row = b.data() + k * n_dim;
      double acc = 0.0;
      for (std::size_t n = 0; n < n_dim; ++n) acc += a_row[n] * b_row[n];
      out_row[k] = acc;
    }
  }
}

void ratio_floored(const Matrix& v, const Matrix& wh, double floor,
                   Matrix& out) {
  resize(out, v.rows(), v.cols());
  const std::int64_t total = static_cast<std::int64_t>(v.size());
  const double* vp = v.data();
  const double* wp = wh.data();
  double* op = out.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < total; ++i)
    op[i] = vp[i] / std::max(wp[i], floor);
}

double kl_divergence(const Matrix& v, const Matrix& wh, double floor) {
  const std::int64_t rows = static_cast<std::int64_t>(v.rows());
  const std::size_t cols = v.cols();
  Vector partial(v.rows(), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* vp = v.data() + static_cast<std::size_t>(r) * cols;
    const double* wp = wh.data() + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double val = vp[c];
      const double fit = wp[c];
      if (val > 0.0) acc += val * std::log(val / std::max(fit, floor)) - val;
      acc += fit;
    }
    partial[static_cast<std::size_t>(r)] = acc;
  }
  double total = 0.0;
  for (const double p : partial) total += p;
  return total;
}

void col_sums(const Matrix& m, Vector& out) {
  out.assign(m.cols(), 0.0);
  const std::int64_t cols = static_cast<std::int64_t>(m.cols());
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r)
      acc += m(r, static_cast<std::size_t>(c));
    out[static_cast<std::size_t>(c)] = acc;
  }
}

void row_sums(const Matrix& m, Vector& out) {
  out.assign(m.rows(), 0.0);
  const std::int64_t rows = static_cast<std::int64_t>(m.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* p = m.data() + static_cast<std::size_t>(r) * m.cols();
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += p[c];
    out[static_cast<std::size_t>(r)] = acc;
  }
}

void hac_accumulate(const Matrix& probs, const std::vector<int>& delays,
                    Vector& out) {
  const std::size_t t_dim = probs.rows();
  const std::size_t c_dim = probs.cols();
  const std::size_t block = c_dim * c_dim;
  out.assign(delays.size() * block, 0.0);
  const std::int64_t n_delays = static_cast<std::int64_t>(delays.size());
  const std::int64_t c_count = static_cast<std::int64_t>(c_dim);
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t di = 0; di < n_delays; ++di) {
    for (std::int64_t i = 0; i < c_count; ++i) {
      const std::size_t d =
          static_cast<std::size_t>(delays[static_cast<std::size_t>(di)]);
      if (t_dim <= d) continue;
      double* out_row = out.data() + static_cast<std::size_t>(di) * block +
                        static_cast<std::size_t>(i) * c_dim;
      for (std::size_t t = 0; t + d < t_dim; ++t) {
        const double pti = probs(t, static_cast<std::size_t>(i));
        const double* later = probs.data() + (t + d) * c_dim;
        for (std::size_t j = 0; j < c_dim; ++j) out_row[j] += pti * later[j];
      }
    }
  }
}

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  resize(out, a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  resize(out, a.cols(), b.cols());
  for (std::size_t k = 0; k < a.cols(); ++k) {
    for (std::size_t n = 0; n < b.cols(); ++n) {
      double acc = 0.0;
      for (std::size_t r = 0; r < a.rows(); ++r) acc += a(r, k) * b(r, n);
      out(k, n) = acc;
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  resize(out, a.rows(), b.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t k = 0; k < b.rows(); ++k) {
      double acc = 0.0;
      for (std::size_t n = 0; n < a.cols(); ++n) acc += a(r, n) * b(k, n);
      out(r, k) = acc;
    }
  }
}

void ratio_floored(const Matrix& v, const Matrix& wh, double floor,
                   Matrix& out) {
  resize(out, v.rows(), v.cols());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.data()[i] = v.data()[i] / std::max(wh.data()[i], floor);
}

double kl_divergence(const Matrix& v, const Matrix& wh, double floor) {
  double total = 0.0;
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < v.cols(); ++c) {
      const double val = v(r, c);
      const double fit = wh(r, c);
      if (val > 0.0) acc += val * std::log(val / std::max(fit, floor)) - val;
      acc += fit;
    }
    total += acc;
  }
  return total;
}

void col_sums(const Matrix& m, Vector& out) {
  out.assign(m.cols(), 0.0);
  for (std::size_t c = 0; c < m.cols(); ++c)
    for (std::size_t r = 0; r < m.rows(); ++r) out[c] += m(r, c);
}

void row_sums(const Matrix& m, Vector& out) {
  out.assign(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r] += m(r, c);
}

void hac_accumulate(const Matrix& probs, const std::vector<int>& delays,
                    Vector& out) {
  const std::size_t c_dim = probs.cols();
  const std::size_t block = c_dim * c_dim;
  out.assign(delays.size() * block, 0.0);
  for (std::size_t di = 0; di < delays.size(); ++di) {
    const std::size_t d = static_cast<std::size_t>(delays[di]);
    for (std::size_t i = 0; i < c_dim; ++i) {
      for (std::size_t j = 0; j < c_dim; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t + d < probs.rows(); ++t)
          acc += probs(t, i) * probs(t + d, j);
        out[di * block + i * c_dim + j] = acc;
      }
    }
  }
}

}  // namespace serial

}  // namespace s2i::kernels
