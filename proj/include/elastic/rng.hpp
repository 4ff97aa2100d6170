// Copyright 2026 The Elastic NAS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ELASTIC_RNG_HPP
#define ELASTIC_RNG_HPP

#include <cstdint>
#include <initializer_list>

namespace elastic {

/// One splitmix64 step applied to `x` as the generator state.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Folds fields into a key: k0 = seed, k(n) = splitmix64(k(n-1) ^ field(n)).
/// This is the hash used both for stream derivation and for the synthetic
/// landscape, so the field order is part of the wire contract.
constexpr std::uint64_t fold_hash(std::uint64_t seed,
                                  std::initializer_list<std::uint64_t> fields) noexcept {
  std::uint64_t k = seed;
  for (std::uint64_t f : fields) k = splitmix64(k ^ f);
  return k;
}

/// Maps a 64-bit word onto [0, 1) using its top 53 bits (never rounds to 1).
constexpr double to_unit(std::uint64_t k) noexcept {
  return static_cast<double>(k >> 11) * 0x1.0p-53;
}

/// Purpose tags mixed into derived streams so that different consumers at the
/// same (cycle, module, generation, slot) never share randomness.
enum class StreamPurpose : std::uint64_t {
  initial_assignment = 1,
  fresh_sample = 2,
  mutation = 3,
  crossover = 4,
  parent_choice = 5,
  elite_draw = 6,
  analysis = 7,
};

/// Counter-based generator: a splitmix64 sequence starting at `key`. The full
/// state is (key, position), so a stream can be recreated from integers alone.
class Rng {
 public:
  explicit constexpr Rng(std::uint64_t key, std::uint64_t position = 0) noexcept
      : key_(key), position_(position) {}

  constexpr std::uint64_t next() noexcept {
    ++position_;
    return splitmix64(key_ + (position_ - 1) * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform integer in [0, n); n must be > 0. Rejection keeps it unbiased.
  constexpr std::uint64_t uniform_index(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  constexpr double uniform01() noexcept { return to_unit(next()); }

  /// True with probability p; p <= 0 never fires, p >= 1 always fires.
  constexpr bool bernoulli(double p) noexcept { return uniform01() < p; }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t position() const noexcept { return position_; }

 private:
  std::uint64_t key_;
  std::uint64_t position_;
};

/// Identifies one phase of a search. Every random decision in that phase is
/// drawn from a stream derived from this key plus (generation, slot, purpose),
/// which keeps results independent of evaluation scheduling.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t cycle = 0;
  std::uint64_t module = 0;

  Rng stream(std::uint64_t generation, std::uint64_t slot, StreamPurpose purpose) const noexcept {
    return Rng(fold_hash(seed, {cycle, module, generation, slot,
                                static_cast<std::uint64_t>(purpose)}));
  }
};

}  // namespace elastic

#endif  // ELASTIC_RNG_HPP
