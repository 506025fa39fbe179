// include/assertkit/common.hpp

// Copyright 2025  assertkit authors

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

#ifndef ASSERTKIT_COMMON_HPP_
#define ASSERTKIT_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace assertkit {

// Domain error; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class... Args>
[[noreturn]] void fail(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  throw Error(os.str());
}

template <class... Args>
void check(bool cond, Args&&... args) {
  if (!cond) fail(std::forward<Args>(args)...);
}

// splitmix64 finalizer, used to derive substream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// All randomness in the toolkit flows through this wrapper.  mt19937_64
// output is pinned by the C++ standard; the distributions are hand-rolled
// because std::*_distribution is implementation-defined and would break
// byte-identical corpora across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) fail("Rng::below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Independent substream; stable under reordering of sibling forks.
  Rng fork(std::uint64_t stream) const { return Rng(mix64(seed_ ^ mix64(stream))); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Worker-pool width: min(hardware, ASSERTKIT_THREADS); at least 1.
std::size_t worker_threads();

// Runs fn(i) for i in [0, n) on up to worker_threads() threads with a static
// partition.  Each index is handled by exactly one thread, so any per-index
// accumulation order is fixed and results do not depend on the thread count.
// Rethrows the first worker exception.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Same, but stays serial when n * work_per_item is too small to amortize
// spawning threads.
void parallel_for(std::size_t n, std::size_t work_per_item,
                  const std::function<void(std::size_t)>& fn);

// Splits [0, n) into per-thread ranges for flat elementwise loops; serial
// below min_grain elements.
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t)>& fn,
                     std::size_t min_grain = 1 << 16);

namespace strings {

std::vector<std::string> split_ws(const std::string& line);
std::string trim(const std::string& s);
std::string lower(std::string s);

}  // namespace strings

}  // namespace assertkit

#endif  // ASSERTKIT_COMMON_HPP_
