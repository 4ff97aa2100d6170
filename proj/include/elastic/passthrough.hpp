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

// Population passthrough: a per-module ranked elite memory that survives module
// alternation. When a module is searched again, part of its initial population
// is inherited from the buffer written at the end of its previous phase.

#ifndef ELASTIC_PASSTHROUGH_HPP
#define ELASTIC_PASSTHROUGH_HPP

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "elastic/candidate.hpp"
#include "elastic/rng.hpp"

namespace elastic {

/// How inherited members are chosen from the buffer.
enum class EliteDraw { top, uniform };

struct BufferEntry {
  ModuleGenome genome;
  double fitness = 0.0;  // as measured against the complement of its phase
  std::uint64_t cycle_stored = 0;

  bool operator==(const BufferEntry&) const = default;
};

class PassthroughBuffer {
 public:
  PassthroughBuffer() = default;
  PassthroughBuffer(ModuleId module, std::size_t capacity, double passthrough_ratio = 0.6);

  /// Replaces the contents with the top-`capacity` unique genomes of the
  /// phase's ranked population. Older entries are dropped, never merged: their
  /// fitness was measured against a different complement. Returns false (and
  /// leaves the buffer alone) for an empty population; throws ConfigError on a
  /// module mismatch.
  bool store(const PhaseResult& phase, std::uint64_t cycle);
  bool store(ModuleId module, std::span<const Candidate> ranked, std::uint64_t cycle);

  /// The first min(n, size) entries in rank order.
  std::vector<ModuleGenome> draw_elites(std::size_t n) const;
  /// min(n, size) distinct entries chosen uniformly, returned in rank order.
  std::vector<ModuleGenome> draw_elites_uniform(std::size_t n, Rng& rng) const;

  /// min(round(ratio * population_size), size).
  std::size_t inherit_count(std::size_t population_size) const noexcept;

  ModuleId module() const noexcept { return module_; }
  std::size_t capacity() const noexcept { return capacity_; }
  double passthrough_ratio() const noexcept { return ratio_; }
  const std::vector<BufferEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  bool operator==(const PassthroughBuffer&) const = default;

  nlohmann::json to_json() const;
  static PassthroughBuffer from_json(const nlohmann::json& j);

 private:
  ModuleId module_ = ModuleId::backbone;
  std::size_t capacity_ = 0;
  double ratio_ = 0.6;
  std::vector<BufferEntry> entries_;
};

}  // namespace elastic

#endif  // ELASTIC_PASSTHROUGH_HPP
