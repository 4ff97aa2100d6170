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

#include "elastic/passthrough.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "elastic/errors.hpp"

namespace elastic {

using nlohmann::json;

PassthroughBuffer::PassthroughBuffer(ModuleId module, std::size_t capacity,
                                     double passthrough_ratio)
    : module_(module), capacity_(capacity), ratio_(passthrough_ratio) {
  if (!(passthrough_ratio >= 0.0 && passthrough_ratio <= 1.0))
    throw ConfigError("passthrough ratio must lie in [0, 1]");
}

bool PassthroughBuffer::store(const PhaseResult& phase, std::uint64_t cycle) {
  return store(phase.module, phase.ranked_population, cycle);
}

bool PassthroughBuffer::store(ModuleId module, std::span<const Candidate> ranked,
                              std::uint64_t cycle) {
  if (module != module_)
    throw ConfigError("cannot store a " + std::string(to_string(module)) +
                      " phase into the " + std::string(to_string(module_)) + " buffer");
  if (ranked.empty()) {
    std::cerr << "warning: empty phase population; " << to_string(module_)
              << " passthrough buffer left unchanged\n";
    return false;
  }
  std::vector<Candidate> order(ranked.begin(), ranked.end());
  rank_candidates(order);
  std::vector<BufferEntry> next;
  std::set<std::vector<int>> seen;
  for (const auto& c : order) {
    if (next.size() >= capacity_) break;
    if (!seen.insert(c.module_genome.genes).second) continue;
    next.push_back({c.module_genome, c.fitness, cycle});
  }
  entries_ = std::move(next);
  return true;
}

std::vector<ModuleGenome> PassthroughBuffer::draw_elites(std::size_t n) const {
  const std::size_t k = std::min(n, entries_.size());
  std::vector<ModuleGenome> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(entries_[i].genome);
  return out;
}

std::vector<ModuleGenome> PassthroughBuffer::draw_elites_uniform(std::size_t n, Rng& rng) const {
  const std::size_t k = std::min(n, entries_.size());
  // Partial Fisher-Yates over indices, then restore rank order.
  std::vector<std::size_t> idx(entries_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<ModuleGenome> out;
  out.reserve(k);
  for (std::size_t i : idx) out.push_back(entries_[i].genome);
  return out;
}

std::size_t PassthroughBuffer::inherit_count(std::size_t population_size) const noexcept {
  const auto wanted = static_cast<std::size_t>(std::lround(ratio_ * static_cast<double>(population_size)));
  return std::min(wanted, entries_.size());
}

json PassthroughBuffer::to_json() const {
  json entries = json::array();
  for (const auto& e : entries_)
    entries.push_back({{"genes", e.genome.genes}, {"fitness", e.fitness},
                       {"cycle_stored", e.cycle_stored}});
  return {{"module", std::string(to_string(module_))},
          {"capacity", capacity_},
          {"passthrough_ratio", ratio_},
          {"entries", entries}};
}

PassthroughBuffer PassthroughBuffer::from_json(const json& j) {
  auto module = parse_module_id(j.at("module").get<std::string>());
  if (!module) throw CheckpointError("buffer has unknown module");
  PassthroughBuffer b(*module, j.at("capacity").get<std::size_t>(),
                      j.at("passthrough_ratio").get<double>());
  for (const auto& e : j.at("entries"))
    b.entries_.push_back({ModuleGenome{*module, e.at("genes").get<std::vector<int>>()},
                          e.at("fitness").get<double>(), e.at("cycle_stored").get<std::uint64_t>()});
  return b;
}

}  // namespace elastic
