// tests/test_kernels.cpp

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

#include <doctest.h>
#include <omp.h>

#include "s2i/common.hpp"
#include "s2i/kernels.hpp"

using namespace s2i;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.data()[i] = rng.uniform(0.01, 2.0);
  return m;
}

}  // namespace

TEST_SUITE("kernels") {

// The OpenMP kernels must be bitwise identical to the serial reference for
// any thread count: work is split over output elements only.
TEST_CASE("parallel kernels match the serial reference bitwise") {
  Rng rng(42);
  const Matrix a = random_matrix(17, 9, rng);
  const Matrix b = random_matrix(9, 23, rng);
  const Matrix c = random_matrix(17, 23, rng);
  const Matrix d = random_matrix(9, 23, rng);

  for (const int threads : {1, 2, 5}) {
    omp_set_num_threads(threads);
    CAPTURE(threads);

    Matrix out_p, out_s;
    kernels::matmul(a, b, out_p);
    kernels::serial::matmul(a, b, out_s);
    CHECK(out_p == out_s);

    kernels::matmul_tn(a, c, out_p);  // a^T c: (9x17)(17x23)
    kernels::serial::matmul_tn(a, c, out_s);
    CHECK(out_p == out_s);

    kernels::matmul_nt(b, d, out_p);
    kernels::serial::matmul_nt(b, d, out_s);
    CHECK(out_p == out_s);

    Matrix ratio_p, ratio_s;
    kernels::ratio_floored(c, c, 1e-12, ratio_p);
    kernels::serial::ratio_floored(c, c, 1e-12, ratio_s);
    CHECK(ratio_p == ratio_s);

    CHECK(kernels::kl_divergence(c, c, 1e-12) ==
          kernels::serial::kl_divergence(c, c, 1e-12));

    Vector v_p, v_s;
    kernels::col_sums(a, v_p);
    kernels::serial::col_sums(a, v_s);
    CHECK(v_p == v_s);
    kernels::row_sums(a, v_p);
    kernels::serial::row_sums(a, v_s);
    CHECK(v_p == v_s);

    const Matrix probs = random_matrix(14, 5, rng);
    Vector hac_p, hac_s;
    kernels::hac_accumulate(probs, {1, 2, 3, 5}, hac_p);
    kernels::serial::hac_accumulate(probs, {1, 2, 3, 5}, hac_s);
    CHECK(hac_p == hac_s);
  }
  omp_set_num_threads(1);
}

TEST_CASE("matmul against a hand-computed product") {
  Matrix a(2, 3);
  a(0, 0) = 1; a(0, 1) = 2; a(0, 2) = 3;
  a(1, 0) = 4; a(1, 1) = 5; a(1, 2) = 6;
  Matrix b(3, 2);
  b(0, 0) = 7; b(0, 1) = 8;
  b(1, 0) = 9; b(1, 1) = 10;
  b(2, 0) = 11; b(2, 1) = 12;
  Matrix out;
  kernels::matmul(a, b, out);
  CHECK(out(0, 0) == doctest::Approx(58));
  CHECK(out(0, 1) == doctest::Approx(64));
  CHECK(out(1, 0) == doctest::Approx(139));
  CHECK(out(1, 1) == doctest::Approx(154));
}

TEST_CASE("kl divergence of a matrix against itself is zero") {
  Rng rng(1);
  const Matrix m = random_matrix(6, 8, rng);
  CHECK(kernels::kl_divergence(m, m, 1e-12) == doctest::Approx(0.0));
}

TEST_CASE("kl divergence handles zero entries") {
  Matrix v(1, 2, 0.0);
  v(0, 1) = 2.0;
  Matrix wh(1, 2, 1.0);
  // The 0*log(0) term drops: total = (0 - 0 + 1) + (2*log(2) - 2 + 1).
  const double expected = 1.0 + 2.0 * std::log(2.0) - 1.0;
  CHECK(kernels::kl_divergence(v, wh, 1e-12) ==
        doctest::Approx(expected).epsilon(1e-12));
}

}  // TEST_SUITE
