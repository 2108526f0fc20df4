// bench/bench_kernels.cpp

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

// Times the OpenMP kernels against the serial reference on shapes typical
// for this project (stacked NMF updates, HAC accumulation). Run manually:
//   build/bench/bench_kernels [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include <omp.h>

#include "s2i/common.hpp"
#include "s2i/kernels.hpp"

using namespace s2i;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.data()[i] = rng.uniform(0.01, 1.0);
  return m;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() /
         reps;
}

void report(const char* name, double serial_ms, double omp_ms) {
  std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx\n", name,
              serial_ms, omp_ms, serial_ms / omp_ms);
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : omp_get_max_threads();
  omp_set_num_threads(threads);
  std::printf("threads: %d\n", threads);

  Rng rng(1234);
  const int reps = 20;

  {
    // Stacked NMF shape: (D+A) x K times K x N.
    const Matrix w = random_matrix(690, 19, rng);
    const Matrix h = random_matrix(19, 80, rng);
    Matrix out;
    report("matmul 690x19 * 19x80",
           time_ms([&] { kernels::serial::matmul(w, h, out); }, reps),
           time_ms([&] { kernels::matmul(w, h, out); }, reps));
  }
  {
    const Matrix w = random_matrix(690, 19, rng);
    const Matrix p = random_matrix(690, 80, rng);
    Matrix out;
    report("matmul_tn 690^T x 80",
           time_ms([&] { kernels::serial::matmul_tn(w, p, out); }, reps),
           time_ms([&] { kernels::matmul_tn(w, p, out); }, reps));
  }
  {
    const Matrix p = random_matrix(690, 80, rng);
    const Matrix h = random_matrix(19, 80, rng);
    Matrix out;
    report("matmul_nt 690x80 * 19x80^T",
           time_ms([&] { kernels::serial::matmul_nt(p, h, out); }, reps),
           time_ms([&] { kernels::matmul_nt(p, h, out); }, reps));
  }
  {
    const Matrix v = random_matrix(690, 80, rng);
    const Matrix wh = random_matrix(690, 80, rng);
    Matrix out;
    report("ratio_floored 690x80",
           time_ms([&] { kernels::serial::ratio_floored(v, wh, 1e-12, out); },
                   reps),
           time_ms([&] { kernels::ratio_floored(v, wh, 1e-12, out); }, reps));
    report("kl_divergence 690x80",
           time_ms([&] { (void)kernels::serial::kl_divergence(v, wh, 1e-12); },
                   reps),
           time_ms([&] { (void)kernels::kl_divergence(v, wh, 1e-12); }, reps));
  }
  {
    // Utterance-scale HAC accumulation.
    const Matrix probs = random_matrix(40, 13, rng);
    const std::vector<int> delays = {1, 2, 3, 5};
    Vector out;
    report("hac_accumulate 40x13 d4",
           time_ms([&] { kernels::serial::hac_accumulate(probs, delays, out); },
                   200),
           time_ms([&] { kernels::hac_accumulate(probs, delays, out); }, 200));
  }

  // Parity spot check while we are here.
  const Matrix a = random_matrix(33, 21, rng);
  const Matrix b = random_matrix(21, 27, rng);
  Matrix out_s, out_p;
  kernels::serial::matmul(a, b, out_s);
  kernels::matmul(a, b, out_p);
  if (!(out_s == out_p)) {
    std::fprintf(stderr, "parity FAILED\n");
    return 1;
  }
  std::printf("parity: omp results bitwise equal to serial\n");
  return 0;
}
