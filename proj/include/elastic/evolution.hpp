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

// One evolutionary phase: search a single module while every other module is
// held at a fixed assignment.
//
// Each generation keeps the top round(parent_ratio * N) candidates verbatim,
// adds round(mutation_ratio * N) mutants of uniformly chosen parents, and fills
// the remainder with uniform-crossover children of two distinct parents. Every
// offspring is checked against the budget and re-drawn on failure; after
// max_variation_attempts failures the slot copies its parent.

#ifndef ELASTIC_EVOLUTION_HPP
#define ELASTIC_EVOLUTION_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "elastic/candidate.hpp"
#include "elastic/cost_model.hpp"
#include "elastic/evaluator.hpp"
#include "elastic/passthrough.hpp"
#include "elastic/rng.hpp"

namespace elastic {

struct EvolutionConfig {
  std::size_t population_size = 100;
  double parent_ratio = 0.25;
  double mutation_prob = 0.2;
  /// Fraction of each generation produced by mutation (the rest of the
  /// non-parent slots come from crossover).
  double mutation_ratio = 0.5;
  std::size_t max_variation_attempts = 100;
  std::size_t generations_per_phase = 5;

  void validate() const;
  std::size_t parent_count() const noexcept;
  std::size_t mutant_count() const noexcept;
  std::size_t crossover_count() const noexcept;

  bool operator==(const EvolutionConfig&) const = default;
  nlohmann::json to_json() const;
  static EvolutionConfig from_json(const nlohmann::json& j);
};

/// Everything a phase needs besides its population.
struct PhaseEnv {
  const DetectionSearchSpace& space;
  const ResourceBudget& budget;
  const EvolutionConfig& config;
  Evaluator& evaluator;
  ModuleId module;
  /// Supplies the genes of every module other than `module`.
  Genome fixed_complement;
  StreamKey key;

  Genome assemble(const ModuleGenome& g) const;
  /// Estimate + budget check of the assembled genome.
  bool feasible(const ModuleGenome& g, CostReport* cost = nullptr) const;
};

struct Population {
  std::vector<Candidate> members;  // ranked
  GenerationStats stats;
};

struct InitOptions {
  /// Injected as a protected member unless already inherited.
  std::optional<ModuleGenome> incumbent;
  EliteDraw elite_draw = EliteDraw::top;
};

/// Inherits min(round(ratio * N), |buffer|) elites, fills the rest with
/// feasible random samples, and evaluates every member against the current
/// complement. Throws InfeasibleError if max_variation_attempts * N draws
/// produce too few feasible samples.
Population init_population(const PhaseEnv& env, const PassthroughBuffer& buffer,
                           const InitOptions& options = {});

/// Produces generation `generation` (>= 1) of the phase from a ranked population.
Population next_generation(const PhaseEnv& env, const Population& current,
                           std::uint64_t generation);

PhaseResult run_phase(const PhaseEnv& env, const PassthroughBuffer& buffer,
                      const InitOptions& options = {});

}  // namespace elastic

#endif  // ELASTIC_EVOLUTION_HPP
