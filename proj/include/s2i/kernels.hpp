// include/s2i/kernels.hpp

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

#ifndef S2I_KERNELS_HPP_
#define S2I_KERNELS_HPP_

#include <vector>

#include "s2i/matrix.hpp"

namespace s2i::kernels {

// OpenMP kernels. Work is split over independent output elements and every
// element accumulates its terms in a fixed index order, so results are
// bitwise identical to the serial reference below for any thread count.

// out = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& out);

// out = a^T * b  (a is R x K, b is R x N, out is K x N)
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);

// out = a * b^T  (a is R x N, b is K x N, out is R x K)
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);

// out = v / max(wh, floor), elementwise
void ratio_floored(const Matrix& v, const Matrix& wh, double floor,
                   Matrix& out);

// Generalized KL divergence sum(v*log(v/wh) - v + wh) with wh floored
// inside the log; 0*log(0) = 0. Row partial sums are reduced serially so
// the value does not depend on the thread count.
double kl_divergence(const Matrix& v, const Matrix& wh, double floor);

// Column sums (length cols) / row sums (length rows).
void col_sums(const Matrix& m, Vector& out);
void row_sums(const Matrix& m, Vector& out);

// Delayed co-occurrence accumulation: for each delay d (block index in
// `delays` order) and cell (i, j),
//   out[block(d) + i*C + j] = sum_t probs(t, i) * probs(t + d, j).
// `out` must be sized delays.size() * C * C; it is overwritten.
void hac_accumulate(const Matrix& probs, const std::vector<int>& delays,
                    Vector& out);

namespace serial {
// Plain-loop reference implementations used by the parity tests and the
// benchmark.
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void ratio_floored(const Matrix& v, const Matrix& wh, double floor,
                   Matrix& out);
double kl_divergence(const Matrix& v, const Matrix& wh, double floor);
void col_sums(const Matrix& m, Vector& out);
void row_sums(const Matrix& m, Vector& out);
void hac_accumulate(const Matrix& probs, const std::vector<int>& delays,
                    Vector& out);
}  // namespace serial

}  // namespace s2i::kernels

#endif  // S2I_KERNELS_HPP_
