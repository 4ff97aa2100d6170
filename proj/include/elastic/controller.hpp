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

// Alternating module search.
//
// The controller cycles through the modules in `module_order`; each visit is
// a phase of `generations_per_phase` generations over that module with every
// other module frozen at its current assignment. At the end of a phase the
// module's assignment becomes the phase best and its passthrough buffer is
// rewritten. The run stops once `total_generation_budget` generations (summed
// over all phases) have executed.
//
// A generation is the atomic unit: the state after any generation can be
// checkpointed and resumed with identical results, because every random
// stream is derived from (seed, cycle, module, generation, slot, purpose).

#ifndef ELASTIC_CONTROLLER_HPP
#define ELASTIC_CONTROLLER_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "elastic/candidate.hpp"
#include "elastic/cost_model.hpp"
#include "elastic/evaluator.hpp"
#include "elastic/evolution.hpp"
#include "elastic/passthrough.hpp"

namespace elastic {

struct ScheduleConfig {
  std::vector<ModuleId> module_order{ModuleId::backbone, ModuleId::head};
  std::uint64_t total_generation_budget = 55;
  std::uint64_t seed = 0;
  double passthrough_ratio = 0.6;
  /// Buffer capacity; 0 means "population size".
  std::size_t buffer_capacity = 0;
  EliteDraw elite_draw = EliteDraw::top;
  /// Seed each phase with the module's current assignment so a phase can never
  /// end below the fitness it started from.
  bool protect_incumbent = true;

  void validate(const DetectionSearchSpace& space, const EvolutionConfig& evo) const;
  bool operator==(const ScheduleConfig&) const = default;
  nlohmann::json to_json() const;
  static ScheduleConfig from_json(const nlohmann::json& j);
};

struct HistoryRow {
  std::uint64_t cycle = 0;
  ModuleId module = ModuleId::backbone;
  std::uint64_t generation = 0;  // global index across all phases
  double best_fitness = 0.0;     // best of the current population
  double mean_fitness = 0.0;
  std::uint64_t evaluations = 0;
  std::uint64_t feasible_rejections = 0;

  bool operator==(const HistoryRow&) const = default;
};

struct BestRecord {
  Genome genome;
  double fitness = 0.0;
  std::uint64_t generation = 0;

  bool operator==(const BestRecord&) const = default;
};

struct SearchState {
  std::uint64_t cycle = 0;
  std::size_t phase_position = 0;      // index into module_order
  std::uint64_t phase_generation = 0;  // generations already run in this phase
  std::uint64_t generations_done = 0;
  std::map<ModuleId, ModuleGenome> assignment;
  std::map<ModuleId, PassthroughBuffer> buffers;
  std::vector<Candidate> population;  // ranked; empty at a phase boundary
  GenerationStats population_stats;
  std::optional<BestRecord> best;
  std::vector<HistoryRow> history;
  std::uint64_t seed = 0;
  std::uint64_t config_digest = 0;
  std::uint64_t space_hash = 0;
  std::uint64_t total_generation_budget = 0;

  bool finished() const noexcept { return generations_done >= total_generation_budget; }
  Genome assignment_genome() const;
  bool operator==(const SearchState&) const = default;
};

enum class ConvergenceMode { relative, absolute };

struct ConvergenceReport {
  std::uint64_t converged_generation = 0;
  double final_best = 0.0;
  double threshold = 0.0;
  ConvergenceMode mode = ConvergenceMode::relative;

  bool operator==(const ConvergenceReport&) const = default;
};

/// First g with best[g] >= (1 - tolerance) * best[last] (relative) or
/// best[g] >= best[last] - tolerance (absolute). Throws ConfigError when empty.
ConvergenceReport detect_convergence(std::span<const double> best_per_generation,
                                     ConvergenceMode mode = ConvergenceMode::relative,
                                     double tolerance = 0.01);
/// Convergence of a run: applied to the running best-so-far of the history.
ConvergenceReport detect_convergence(const std::vector<HistoryRow>& history,
                                     ConvergenceMode mode = ConvergenceMode::relative,
                                     double tolerance = 0.01);
nlohmann::json convergence_to_json(const ConvergenceReport& r);

/// Digest of everything that determines a trajectory besides the seed's use:
/// schedule, evolution config, budget, evaluator id, space hash.
std::uint64_t config_digest(const ScheduleConfig& schedule, const EvolutionConfig& evo,
                            const ResourceBudget& budget, const std::string& evaluator_id,
                            std::uint64_t space_hash);

/// Called after every generation with the updated state.
using GenerationObserver = std::function<void(const SearchState&)>;

class SearchController {
 public:
  SearchController(const DetectionSearchSpace& space, ScheduleConfig schedule,
                   EvolutionConfig evolution, ResourceBudget budget, Evaluator& evaluator);

  /// Draws the first feasible joint random assignment. Throws InfeasibleError.
  SearchState initial_state() const;

  /// Runs one generation. Returns false if the budget was already spent.
  bool step(SearchState& state);

  /// Steps until the budget is spent or `max_generations` more have run.
  void run(SearchState& state, const GenerationObserver& observer = {},
           std::optional<std::uint64_t> max_generations = std::nullopt);

  /// Throws CheckpointError if `state` was produced by a different space or
  /// configuration.
  void check_compatible(const SearchState& state) const;

  std::uint64_t digest() const noexcept { return digest_; }
  const ScheduleConfig& schedule() const noexcept { return schedule_; }
  const EvolutionConfig& evolution() const noexcept { return evolution_; }
  const ResourceBudget& budget() const noexcept { return budget_; }
  const CachingEvaluator& cache() const noexcept { return cache_; }

 private:
  const DetectionSearchSpace& space_;
  ScheduleConfig schedule_;
  EvolutionConfig evolution_;
  ResourceBudget budget_;
  CachingEvaluator cache_;
  std::uint64_t digest_;
};

struct SearchOutcome {
  Genome best_genome;
  double best_fitness = 0.0;
  SearchState state;
  ConvergenceReport convergence;
};

SearchOutcome run_search(const DetectionSearchSpace& space, const ScheduleConfig& schedule,
                         const EvolutionConfig& evolution, const ResourceBudget& budget,
                         Evaluator& evaluator, const GenerationObserver& observer = {});

/// Continues a (possibly finished) state to budget exhaustion.
SearchOutcome resume_search(const DetectionSearchSpace& space, const ScheduleConfig& schedule,
                            const EvolutionConfig& evolution, const ResourceBudget& budget,
                            Evaluator& evaluator, SearchState state,
                            const GenerationObserver& observer = {});

// Checkpoints.
inline constexpr int kCheckpointVersion = 1;

nlohmann::json state_to_json(const SearchState& state);
/// Costs of population members are recomputed from the space.
SearchState state_from_json(const nlohmann::json& j, const DetectionSearchSpace& space,
                            const ResourceBudget& budget);
/// Atomic: writes `<path>.tmp` then renames.
void checkpoint_save(const SearchState& state, const std::filesystem::path& path);
SearchState checkpoint_load(const std::filesystem::path& path, const DetectionSearchSpace& space,
                            const ResourceBudget& budget);

// History export.
std::string history_csv(std::span<const HistoryRow> rows);
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

}  // namespace elastic

#endif  // ELASTIC_CONTROLLER_HPP
