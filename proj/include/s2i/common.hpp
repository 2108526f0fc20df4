// include/s2i/common.hpp

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

#ifndef S2I_COMMON_HPP_
#define S2I_COMMON_HPP_

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace s2i {

// Error categories map 1:1 onto the CLI exit codes (config/parse -> 2,
// incompatible -> 3, numeric -> 4).
enum class ErrorCode {
  kConfig,
  kParse,
  kIncompatible,
  kNumeric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

// Single-line warning on stderr. Library code never aborts on a warning.
void warn(const std::string& msg);

// FNV-1a, used for schema/delay/config digests and seed mixing.
constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = kFnvOffset) {
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a stream seed from a base seed, a purpose tag and up to three
// indices. Every consumer of randomness gets its own derived stream so
// parallel and serial execution see identical draws.
inline std::uint64_t mix_seed(std::uint64_t base, std::string_view tag,
                              std::uint64_t a = 0, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(base ^ fnv1a(tag));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

// mt19937_64 is bit-exact across platforms; the bounded draws below are
// hand-rolled because the std::uniform_* distributions are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // [lo, hi)
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

  // [lo, hi], rejection-sampled so the result is exactly uniform.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range =
        static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(gen_());
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % range;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return lo + static_cast<std::int64_t>(x % range);
  }

  std::size_t index(std::size_t size) {
    return static_cast<std::size_t>(
        uniform_int(0, static_cast<std::int64_t>(size) - 1));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

// Shortest text that round-trips a double exactly; "%.17g" keeps well over
// the 12 significant digits the file formats require.
std::string format_g17(double v);

std::string hex16(std::uint64_t v);

// Writes to `<path>.tmp` then renames, so failed runs leave no partial
// output files behind.
void write_file_atomic(const std::string& path, const std::string& content);

// Whole-file read; throws Error(kConfig) when the file cannot be opened.
std::string read_file(const std::string& path);

}  // namespace s2i

#endif  // S2I_COMMON_HPP_
