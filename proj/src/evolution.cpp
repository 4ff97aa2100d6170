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

#include "elastic/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "elastic/errors.hpp"

namespace elastic {

using nlohmann::json;

void rank_candidates(std::vector<Candidate>& population) {
  std::stable_sort(population.begin(), population.end(), ranks_before);
}

// ---------------------------------------------------------------------------
// Config.

namespace {

std::size_t rounded(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::lround(ratio * static_cast<double>(n)));
}

}  // namespace

std::size_t EvolutionConfig::parent_count() const noexcept {
  return rounded(parent_ratio, population_size);
}

std::size_t EvolutionConfig::mutant_count() const noexcept {
  return rounded(mutation_ratio, population_size);
}

std::size_t EvolutionConfig::crossover_count() const noexcept {
  const std::size_t used = parent_count() + mutant_count();
  return used >= population_size ? 0 : population_size - used;
}

void EvolutionConfig::validate() const {
  if (population_size < 4) throw ConfigError("population_size must be >= 4");
  if (!(parent_ratio > 0.0 && parent_ratio < 1.0))
    throw ConfigError("parent_ratio must lie in (0, 1)");
  if (!(mutation_ratio >= 0.0 && mutation_ratio <= 1.0))
    throw ConfigError("mutation_ratio must lie in [0, 1]");
  if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0))
    throw ConfigError("mutation_prob must lie in [0, 1]");
  if (parent_count() < 1) throw ConfigError("parent_ratio * population_size rounds to 0 parents");
  if (parent_count() + mutant_count() > population_size)
    throw ConfigError("parents + mutants exceed the population size");
  if (max_variation_attempts < 1) throw ConfigError("max_variation_attempts must be >= 1");
  if (generations_per_phase < 1) throw ConfigError("generations_per_phase must be >= 1");
}

json EvolutionConfig::to_json() const {
  return {{"population_size", population_size},
          {"parent_ratio", parent_ratio},
          {"mutation_prob", mutation_prob},
          {"mutation_ratio", mutation_ratio},
          {"max_variation_attempts", max_variation_attempts},
          {"generations_per_phase", generations_per_phase}};
}

EvolutionConfig EvolutionConfig::from_json(const json& j) {
  EvolutionConfig c;
  c.population_size = j.value("population_size", c.population_size);
  c.parent_ratio = j.value("parent_ratio", c.parent_ratio);
  c.mutation_prob = j.value("mutation_prob", c.mutation_prob);
  c.mutation_ratio = j.value("mutation_ratio", c.mutation_ratio);
  c.max_variation_attempts = j.value("max_variation_attempts", c.max_variation_attempts);
  c.generations_per_phase = j.value("generations_per_phase", c.generations_per_phase);
  return c;
}

// ---------------------------------------------------------------------------
// Phase environment.

Genome PhaseEnv::assemble(const ModuleGenome& g) const {
  Genome full = fixed_complement;
  full.set(g);
  return full;
}

bool PhaseEnv::feasible(const ModuleGenome& g, CostReport* cost) const {
  CostReport report = estimate(space, assemble(g), budget.bytes_per_weight);
  const bool ok = check_budget(report, budget).feasible;
  if (cost) *cost = std::move(report);
  return ok;
}

namespace {

std::string describe_infeasibility(const PhaseEnv& env, const ModuleGenome& last) {
  std::ostringstream os;
  os << "no feasible " << to_string(env.module) << " sample within "
     << env.config.max_variation_attempts * env.config.population_size << " draws";
  const CostReport r = estimate(env.space, env.assemble(last), env.budget.bytes_per_weight);
  const Verdict v = check_budget(r, env.budget);
  if (!v.violations.empty()) {
    os << "; last draw violated:";
    for (const auto& viol : v.violations)
      os << ' ' << viol.constraint << " (" << viol.measured << " > " << viol.allowed << ")";
  }
  return os.str();
}

/// Evaluates module genomes in one batch and builds ranked candidates. Every
/// member must be feasible: an infeasible insertion is a logic error.
std::vector<Candidate> evaluate_members(const PhaseEnv& env,
                                        const std::vector<ModuleGenome>& genomes) {
  std::vector<Genome> full;
  full.reserve(genomes.size());
  for (const auto& g : genomes) full.push_back(env.assemble(g));
  const std::vector<double> fitness = env.evaluator.evaluate(full);
  if (fitness.size() != genomes.size())
    throw EvaluatorError("evaluator returned the wrong number of results");
  std::vector<Candidate> out;
  out.reserve(genomes.size());
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    require_fitness_range(fitness[i], env.evaluator.id());
    Candidate c{genomes[i], std::move(full[i]), fitness[i], {}};
    c.cost = estimate(env.space, c.full_genome, env.budget.bytes_per_weight);
    if (!check_budget(c.cost, env.budget).feasible)
      throw std::logic_error("infeasible candidate inserted into a population");
    out.push_back(std::move(c));
  }
  return out;
}

void finish_stats(Population& pop) {
  rank_candidates(pop.members);
  double sum = 0.0;
  for (const auto& c : pop.members) sum += c.fitness;
  pop.stats.best_fitness = pop.members.empty() ? 0.0 : pop.members.front().fitness;
  pop.stats.mean_fitness =
      pop.members.empty() ? 0.0 : sum / static_cast<double>(pop.members.size());
}

}  // namespace

Population init_population(const PhaseEnv& env, const PassthroughBuffer& buffer,
                           const InitOptions& options) {
  const std::size_t n = env.config.population_size;
  const ModuleSpace& ms = env.space.module(env.module);
  if (buffer.module() != env.module)
    throw ConfigError("passthrough buffer belongs to module " +
                      std::string(to_string(buffer.module())));

  Population pop;
  std::vector<ModuleGenome> chosen;
  chosen.reserve(n);

  const std::size_t n_inherit = buffer.inherit_count(n);
  std::vector<ModuleGenome> inherited;
  if (options.elite_draw == EliteDraw::top) {
    inherited = buffer.draw_elites(n_inherit);
  } else {
    Rng rng = env.key.stream(0, 0, StreamPurpose::elite_draw);
    inherited = buffer.draw_elites_uniform(n_inherit, rng);
  }
  // Elites that no longer fit next to the new complement are dropped and
  // their slots refilled by fresh samples.
  for (auto& g : inherited) {
    if (env.feasible(g)) {
      chosen.push_back(std::move(g));
    } else {
      ++pop.stats.feasible_rejections;
    }
  }

  if (options.incumbent && env.feasible(*options.incumbent) &&
      std::find(chosen.begin(), chosen.end(), *options.incumbent) == chosen.end()) {
    if (chosen.size() < n) {
      chosen.push_back(*options.incumbent);
    } else {
      chosen.back() = *options.incumbent;
    }
  }

  const std::size_t fresh = n - chosen.size();
  const std::size_t cap = env.config.max_variation_attempts * n;
  std::size_t attempts = 0;
  for (std::size_t slot = 0; slot < fresh; ++slot) {
    Rng rng = env.key.stream(0, slot, StreamPurpose::fresh_sample);
    for (;;) {
      ModuleGenome g = sample_random(ms, rng);
      if (attempts++ >= cap) throw InfeasibleError(describe_infeasibility(env, g));
      if (env.feasible(g)) {
        chosen.push_back(std::move(g));
        break;
      }
      ++pop.stats.feasible_rejections;
    }
  }

  pop.members = evaluate_members(env, chosen);
  pop.stats.evaluations = pop.members.size();
  finish_stats(pop);
  return pop;
}

Population next_generation(const PhaseEnv& env, const Population& current,
                           std::uint64_t generation) {
  const ModuleSpace& ms = env.space.module(env.module);
  const EvolutionConfig& cfg = env.config;
  const std::size_t n_parents = std::min(cfg.parent_count(), current.members.size());
  if (n_parents == 0) throw ConfigError("cannot breed from an empty population");
  const std::size_t n_mut = cfg.mutant_count();
  const std::size_t n_cross = cfg.crossover_count();

  Population next;
  next.stats.parents = n_parents;
  std::vector<ModuleGenome> offspring;
  offspring.reserve(n_mut + n_cross);

  for (std::size_t slot = 0; slot < n_mut; ++slot) {
    Rng rng = env.key.stream(generation, slot, StreamPurpose::mutation);
    const ModuleGenome& parent =
        current.members[static_cast<std::size_t>(rng.uniform_index(n_parents))].module_genome;
    bool placed = false;
    for (std::size_t a = 0; a < cfg.max_variation_attempts; ++a) {
      ModuleGenome child = mutate(ms, parent, cfg.mutation_prob, rng);
      if (env.feasible(child)) {
        offspring.push_back(std::move(child));
        placed = true;
        break;
      }
      ++next.stats.feasible_rejections;
    }
    if (!placed) {
      offspring.push_back(parent);
      ++next.stats.fallbacks;
    }
    ++next.stats.mutants;
  }

  for (std::size_t slot = 0; slot < n_cross; ++slot) {
    Rng rng = env.key.stream(generation, n_mut + slot, StreamPurpose::crossover);
    const auto i = static_cast<std::size_t>(rng.uniform_index(n_parents));
    std::size_t j = i;
    if (n_parents > 1) {
      j = static_cast<std::size_t>(rng.uniform_index(n_parents - 1));
      if (j >= i) ++j;
    }
    const ModuleGenome& a = current.members[i].module_genome;
    const ModuleGenome& b = current.members[j].module_genome;
    bool placed = false;
    for (std::size_t t = 0; t < cfg.max_variation_attempts; ++t) {
      ModuleGenome child = crossover(ms, a, b, rng);
      if (env.feasible(child)) {
        offspring.push_back(std::move(child));
        placed = true;
        break;
      }
      ++next.stats.feasible_rejections;
    }
    if (!placed) {
      offspring.push_back(a);
      ++next.stats.fallbacks;
    }
    ++next.stats.crossovers;
  }

  next.members.assign(current.members.begin(),
                      current.members.begin() + static_cast<std::ptrdiff_t>(n_parents));
  auto children = evaluate_members(env, offspring);
  next.members.insert(next.members.end(), std::make_move_iterator(children.begin()),
                      std::make_move_iterator(children.end()));
  next.stats.evaluations = offspring.size();
  finish_stats(next);
  return next;
}

PhaseResult run_phase(const PhaseEnv& env, const PassthroughBuffer& buffer,
                      const InitOptions& options) {
  env.config.validate();
  PhaseResult result;
  result.module = env.module;
  Population pop = init_population(env, buffer, options);
  result.history.push_back(pop.stats);
  for (std::uint64_t g = 1; g < env.config.generations_per_phase; ++g) {
    pop = next_generation(env, pop, g);
    result.history.push_back(pop.stats);
  }
  result.ranked_population = std::move(pop.members);
  return result;
}

}  // namespace elastic
