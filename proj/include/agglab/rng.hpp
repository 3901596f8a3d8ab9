// Copyright 2026 The agglab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AGGLAB_RNG_HPP_
#define AGGLAB_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_set>
#include <vector>

namespace agglab {

using Index = std::int64_t;

// Counter-based splittable random stream.
//
// A stream is identified by a 64-bit key; the i-th output is a strong mix of
// (key, i), so outputs are random-access and independent of how many values
// were drawn before. child(i) derives a new stream keyed on (key, i) in a
// separate domain, which makes per-bag / per-trial substreams reproducible
// regardless of evaluation order or thread count.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : key_(mix(seed)), counter_(0) {}

  std::uint64_t next_u64() { return mix(key_ + kGolden * ++counter_); }

  // Uniform in the open interval (0, 1).
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Leva's ratio-of-uniforms rejection scheme. The
  // accept region is exact, so the sampler has full (untruncated) tails.
  double next_gaussian() {
    for (;;) {
      const double u = next_unit();
      const double v = 1.7156 * (next_unit() - 0.5);
      const double x = u - 0.449871;
      const double y = std::abs(v) + 0.386595;
      const double q = x * x + y * (0.19600 * y - 0.25472 * x);
      if (q < 0.27597) return v / u;
      if (q > 0.27846) continue;
      if (v * v <= -4.0 * u * u * std::log(u)) return v / u;
    }
  }

  // Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
  }

  // Derived stream for substream index `idx`; does not advance this stream.
  SplitRng child(std::uint64_t idx) const {
    SplitRng c(0);
    c.key_ = mix((key_ ^ kChildTag) + kGolden * (idx + 1));
    c.counter_ = 0;
    return c;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kChildTag = 0xA5A5B4B4C3C3D2D2ull;

  // splitmix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

// Uniform random subset of size `count` drawn from [0, n) without
// replacement, returned in draw order (a uniformly random ordered sample).
// Partial Fisher-Yates; O(n) memory.
inline std::vector<Index> sample_without_replacement(Index n, Index count,
                                                     SplitRng& rng) {
  if (count < 0 || count > n) {
    throw std::invalid_argument("sample_without_replacement: count out of range");
  }
  std::vector<Index> pool(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < count; ++i) {
    const Index j =
        i + static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

// Uniform k-subset of [0, n) via Floyd's algorithm; O(k) memory, so cheap to
// call in rejection loops where k << n. Order is not meaningful.
inline std::vector<Index> sample_subset_floyd(Index n, Index k, SplitRng& rng) {
  if (k < 0 || k > n) throw std::invalid_argument("sample_subset_floyd: k out of range");
  std::unordered_set<Index> chosen;
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(k));
  for (Index j = n - k; j < n; ++j) {
    const Index t =
        static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(j + 1)));
    if (chosen.insert(t).second) {
      out.push_back(t);
    } else {
      chosen.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

}  // namespace agglab

#endif  // AGGLAB_RNG_HPP_
