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

#ifndef ELASTIC_CANDIDATE_HPP
#define ELASTIC_CANDIDATE_HPP

#include <cstdint>
#include <vector>

#include "elastic/cost_model.hpp"
#include "elastic/search_space.hpp"

namespace elastic {

/// A searched-module genome evaluated in the context of a fixed complement.
struct Candidate {
  ModuleGenome module_genome;
  Genome full_genome;
  double fitness = 0.0;
  CostReport cost;

  bool operator==(const Candidate&) const = default;
};

/// Selection order: fitness descending, then genes ascending.
inline bool ranks_before(const Candidate& a, const Candidate& b) noexcept {
  if (a.fitness != b.fitness) return a.fitness > b.fitness;
  return a.module_genome.genes < b.module_genome.genes;
}

void rank_candidates(std::vector<Candidate>& population);

struct GenerationStats {
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  std::uint64_t evaluations = 0;
  std::uint64_t feasible_rejections = 0;
  std::uint64_t fallbacks = 0;  // variation slots that fell back to a parent copy
  // Composition of a bred generation; all zero for an initial population.
  std::uint64_t parents = 0;
  std::uint64_t mutants = 0;
  std::uint64_t crossovers = 0;

  bool operator==(const GenerationStats&) const = default;
};

struct PhaseResult {
  ModuleId module = ModuleId::backbone;
  std::vector<Candidate> ranked_population;
  std::vector<GenerationStats> history;

  const Candidate& best() const { return ranked_population.front(); }
};

}  // namespace elastic

#endif  // ELASTIC_CANDIDATE_HPP
