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

#include "elastic/controller.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "elastic/errors.hpp"

namespace elastic {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// ---------------------------------------------------------------------------
// Schedule.

void ScheduleConfig::validate(const DetectionSearchSpace& space,
                              const EvolutionConfig& evo) const {
  evo.validate();
  if (total_generation_budget < evo.generations_per_phase)
    throw ConfigError("total_generation_budget must be >= generations_per_phase");
  std::set<ModuleId> seen(module_order.begin(), module_order.end());
  if (seen.size() != module_order.size())
    throw ConfigError("module_order lists a module twice");
  for (ModuleId m : space.module_ids())
    if (!seen.contains(m))
      throw ConfigError("module_order does not cover module " + std::string(to_string(m)));
  for (ModuleId m : module_order)
    if (!space.has_module(m))
      throw ConfigError("module_order names " + std::string(to_string(m)) +
                        ", which is not in the space");
  if (!(passthrough_ratio >= 0.0 && passthrough_ratio <= 1.0))
    throw ConfigError("passthrough_ratio must lie in [0, 1]");
}

json ScheduleConfig::to_json() const {
  json order = json::array();
  for (ModuleId m : module_order) order.push_back(std::string(to_string(m)));
  return {{"module_order", order},
          {"total_generation_budget", total_generation_budget},
          {"seed", seed},
          {"passthrough_ratio", passthrough_ratio},
          {"buffer_capacity", buffer_capacity},
          {"elite_draw", elite_draw == EliteDraw::top ? "top" : "uniform"},
          {"protect_incumbent", protect_incumbent}};
}

ScheduleConfig ScheduleConfig::from_json(const json& j) {
  ScheduleConfig s;
  if (j.contains("module_order")) {
    s.module_order.clear();
    for (const auto& m : j.at("module_order")) {
      auto id = parse_module_id(m.get<std::string>());
      if (!id) throw ConfigError("unknown module in module_order: " + m.get<std::string>());
      s.module_order.push_back(*id);
    }
  }
  s.total_generation_budget = j.value("total_generation_budget", s.total_generation_budget);
  s.seed = j.value("seed", s.seed);
  s.passthrough_ratio = j.value("passthrough_ratio", s.passthrough_ratio);
  s.buffer_capacity = j.value("buffer_capacity", s.buffer_capacity);
  const std::string draw = j.value("elite_draw", std::string("top"));
  if (draw == "top") {
    s.elite_draw = EliteDraw::top;
  } else if (draw == "uniform") {
    s.elite_draw = EliteDraw::uniform;
  } else {
    throw ConfigError("elite_draw must be \"top\" or \"uniform\"");
  }
  s.protect_incumbent = j.value("protect_incumbent", s.protect_incumbent);
  return s;
}

// ---------------------------------------------------------------------------
// Convergence.

ConvergenceReport detect_convergence(std::span<const double> best, ConvergenceMode mode,
                                     double tolerance) {
  if (best.empty()) throw ConfigError("convergence needs a non-empty history");
  ConvergenceReport r;
  r.mode = mode;
  r.final_best = best.back();
  r.threshold = mode == ConvergenceMode::relative ? (1.0 - tolerance) * r.final_best
                                                  : r.final_best - tolerance;
  for (std::size_t g = 0; g < best.size(); ++g) {
    if (best[g] >= r.threshold) {
      r.converged_generation = g;
      break;
    }
  }
  return r;
}

ConvergenceReport detect_convergence(const std::vector<HistoryRow>& history,
                                     ConvergenceMode mode, double tolerance) {
  std::vector<double> running;
  running.reserve(history.size());
  for (const auto& row : history)
    running.push_back(running.empty() ? row.best_fitness
                                      : std::max(running.back(), row.best_fitness));
  return detect_convergence(running, mode, tolerance);
}

json convergence_to_json(const ConvergenceReport& r) {
  return {{"converged_generation", r.converged_generation},
          {"final_best", r.final_best},
          {"threshold", r.threshold},
          {"mode", r.mode == ConvergenceMode::relative ? "relative" : "absolute"}};
}

std::uint64_t config_digest(const ScheduleConfig& schedule, const EvolutionConfig& evo,
                            const ResourceBudget& budget, const std::string& evaluator_id,
                            std::uint64_t space_hash) {
  const json doc = {{"schedule", schedule.to_json()},
                    {"evolution", evo.to_json()},
                    {"budget", budget_to_json(budget)},
                    {"evaluator", evaluator_id},
                    {"space_hash", hex64(space_hash)}};
  return fnv1a64(doc.dump());
}

// ---------------------------------------------------------------------------
// Controller.

Genome SearchState::assignment_genome() const {
  Genome g;
  for (const auto& [_, mg] : assignment) g.set(mg);
  return g;
}

SearchController::SearchController(const DetectionSearchSpace& space, ScheduleConfig schedule,
                                   EvolutionConfig evolution, ResourceBudget budget,
                                   Evaluator& evaluator)
    : space_(space),
      schedule_(std::move(schedule)),
      evolution_(evolution),
      budget_(std::move(budget)),
      cache_(evaluator, space.space_hash()),
      digest_(config_digest(schedule_, evolution_, budget_, evaluator.id(), space.space_hash())) {
  schedule_.validate(space_, evolution_);
  budget_.validate();
}

SearchState SearchController::initial_state() const {
  SearchState s;
  s.seed = schedule_.seed;
  s.config_digest = digest_;
  s.space_hash = space_.space_hash();
  s.total_generation_budget = schedule_.total_generation_budget;
  const std::size_t capacity =
      schedule_.buffer_capacity ? schedule_.buffer_capacity : evolution_.population_size;
  for (ModuleId m : space_.module_ids())
    s.buffers.emplace(m, PassthroughBuffer(m, capacity, schedule_.passthrough_ratio));

  const std::size_t cap = evolution_.max_variation_attempts * evolution_.population_size;
  for (std::size_t attempt = 0; attempt < cap; ++attempt) {
    Rng rng(fold_hash(schedule_.seed,
                      {static_cast<std::uint64_t>(StreamPurpose::initial_assignment), attempt}));
    Genome g;
    for (const auto& [id, ms] : space_.modules()) g.set(sample_random(ms, rng));
    const CostReport r = estimate(space_, g, budget_.bytes_per_weight);
    if (check_budget(r, budget_).feasible) {
      for (const auto& [id, mg] : g.parts()) s.assignment[id] = mg;
      return s;
    }
  }
  throw InfeasibleError("no feasible initial architecture within " + std::to_string(cap) +
                        " random draws; the budget may be too tight for this space");
}

void SearchController::check_compatible(const SearchState& state) const {
  if (state.space_hash != space_.space_hash())
    throw CheckpointError("checkpoint space_hash " + hex64(state.space_hash) +
                          " does not match the space (" + hex64(space_.space_hash()) + ")");
  if (state.config_digest != digest_)
    throw CheckpointError("checkpoint config digest " + hex64(state.config_digest) +
                          " does not match the current configuration (" + hex64(digest_) + ")");
}

bool SearchController::step(SearchState& s) {
  if (s.finished()) return false;
  const ModuleId module = schedule_.module_order[s.phase_position];
  PhaseEnv env{space_,
               budget_,
               evolution_,
               cache_,
               module,
               s.assignment_genome(),
               StreamKey{schedule_.seed, s.cycle, module_tag(module)}};

  Population pop;
  if (s.phase_generation == 0) {
    InitOptions opts;
    opts.elite_draw = schedule_.elite_draw;
    if (schedule_.protect_incumbent) opts.incumbent = s.assignment.at(module);
    pop = init_population(env, s.buffers.at(module), opts);
  } else {
    const Population current{s.population, s.population_stats};
    pop = next_generation(env, current, s.phase_generation);
  }

  s.history.push_back({s.cycle, module, s.generations_done, pop.stats.best_fitness,
                       pop.stats.mean_fitness, pop.stats.evaluations,
                       pop.stats.feasible_rejections});
  const Candidate& top = pop.members.front();
  const bool improves =
      !s.best || top.fitness > s.best->fitness ||
      (top.fitness == s.best->fitness && top.full_genome < s.best->genome);
  if (improves) s.best = BestRecord{top.full_genome, top.fitness, s.generations_done};

  ++s.phase_generation;
  ++s.generations_done;
  if (s.phase_generation >= evolution_.generations_per_phase || s.finished()) {
    s.assignment[module] = top.module_genome;
    s.buffers.at(module).store(module, pop.members, s.cycle);
    s.population.clear();
    s.population_stats = {};
    s.phase_generation = 0;
    if (++s.phase_position == schedule_.module_order.size()) {
      s.phase_position = 0;
      ++s.cycle;
    }
  } else {
    s.population = std::move(pop.members);
    s.population_stats = pop.stats;
  }
  return true;
}

void SearchController::run(SearchState& state, const GenerationObserver& observer,
                           std::optional<std::uint64_t> max_generations) {
  check_compatible(state);
  std::uint64_t ran = 0;
  while (!state.finished() && (!max_generations || ran < *max_generations)) {
    step(state);
    ++ran;
    if (observer) observer(state);
  }
}

namespace {

SearchOutcome finish(SearchState state) {
  SearchOutcome out;
  if (state.best) {
    out.best_genome = state.best->genome;
    out.best_fitness = state.best->fitness;
  }
  if (!state.history.empty()) out.convergence = detect_convergence(state.history);
  out.state = std::move(state);
  return out;
}

}  // namespace

SearchOutcome run_search(const DetectionSearchSpace& space, const ScheduleConfig& schedule,
                         const EvolutionConfig& evolution, const ResourceBudget& budget,
                         Evaluator& evaluator, const GenerationObserver& observer) {
  SearchController controller(space, schedule, evolution, budget, evaluator);
  SearchState state = controller.initial_state();
  controller.run(state, observer);
  return finish(std::move(state));
}

SearchOutcome resume_search(const DetectionSearchSpace& space, const ScheduleConfig& schedule,
                            const EvolutionConfig& evolution, const ResourceBudget& budget,
                            Evaluator& evaluator, SearchState state,
                            const GenerationObserver& observer) {
  SearchController controller(space, schedule, evolution, budget, evaluator);
  controller.run(state, observer);
  return finish(std::move(state));
}

// ---------------------------------------------------------------------------
// Checkpoints.

namespace {

json stats_to_json(const GenerationStats& s) {
  return {{"best_fitness", s.best_fitness},
          {"mean_fitness", s.mean_fitness},
          {"evaluations", s.evaluations},
          {"feasible_rejections", s.feasible_rejections},
          {"fallbacks", s.fallbacks},
          {"parents", s.parents},
          {"mutants", s.mutants},
          {"crossovers", s.crossovers}};
}

GenerationStats stats_from_json(const json& j) {
  return {j.at("best_fitness").get<double>(),
          j.at("mean_fitness").get<double>(),
          j.at("evaluations").get<std::uint64_t>(),
          j.at("feasible_rejections").get<std::uint64_t>(),
          j.at("fallbacks").get<std::uint64_t>(),
          j.value("parents", std::uint64_t{0}),
          j.value("mutants", std::uint64_t{0}),
          j.value("crossovers", std::uint64_t{0})};
}

ModuleId module_from(const json& j) {
  auto id = parse_module_id(j.get<std::string>());
  if (!id) throw CheckpointError("unknown module '" + j.get<std::string>() + "' in checkpoint");
  return *id;
}

}  // namespace

json state_to_json(const SearchState& s) {
  json assignment = json::object();
  for (const auto& [id, mg] : s.assignment) assignment[std::string(to_string(id))] = mg.genes;
  json buffers = json::object();
  for (const auto& [id, b] : s.buffers) buffers[std::string(to_string(id))] = b.to_json();
  json population = json::array();
  for (const auto& c : s.population)
    population.push_back({{"module", std::string(to_string(c.module_genome.module))},
                          {"genome", genome_to_json(c.full_genome)},
                          {"fitness", c.fitness}});
  json history = json::array();
  for (const auto& r : s.history)
    history.push_back({{"cycle", r.cycle},
                       {"module", std::string(to_string(r.module))},
                       {"generation", r.generation},
                       {"best_fitness", r.best_fitness},
                       {"mean_fitness", r.mean_fitness},
                       {"evaluations", r.evaluations},
                       {"feasible_rejections", r.feasible_rejections}});
  json best = nullptr;
  if (s.best)
    best = {{"genome", genome_to_json(s.best->genome)},
            {"fitness", s.best->fitness},
            {"generation", s.best->generation}};
  return {{"version", kCheckpointVersion},
          {"space_hash", hex64(s.space_hash)},
          {"config_digest", hex64(s.config_digest)},
          {"seed", s.seed},
          {"total_generation_budget", s.total_generation_budget},
          {"cycle", s.cycle},
          {"phase_position", s.phase_position},
          {"phase_generation", s.phase_generation},
          {"generations_done", s.generations_done},
          {"assignment", assignment},
          {"buffers", buffers},
          {"population", population},
          {"population_stats", stats_to_json(s.population_stats)},
          {"best", best},
          {"history", history}};
}

SearchState state_from_json(const json& j, const DetectionSearchSpace& space,
                            const ResourceBudget& budget) {
  try {
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version " +
                            std::to_string(j.at("version").get<int>()));
    SearchState s;
    auto hash = parse_hex64(j.at("space_hash").get<std::string>());
    auto digest = parse_hex64(j.at("config_digest").get<std::string>());
    if (!hash || !digest) throw CheckpointError("checkpoint has malformed digests");
    s.space_hash = *hash;
    s.config_digest = *digest;
    if (s.space_hash != space.space_hash())
      throw CheckpointError("checkpoint space_hash " + hex64(s.space_hash) +
                            " does not match the space (" + hex64(space.space_hash()) + ")");
    s.seed = j.at("seed").get<std::uint64_t>();
    s.total_generation_budget = j.at("total_generation_budget").get<std::uint64_t>();
    s.cycle = j.at("cycle").get<std::uint64_t>();
    s.phase_position = j.at("phase_position").get<std::size_t>();
    s.phase_generation = j.at("phase_generation").get<std::uint64_t>();
    s.generations_done = j.at("generations_done").get<std::uint64_t>();
    for (const auto& [key, genes] : j.at("assignment").items()) {
      const ModuleId id = module_from(json(key));
      s.assignment[id] = ModuleGenome{id, genes.get<std::vector<int>>()};
    }
    for (const auto& [key, b] : j.at("buffers").items())
      s.buffers.emplace(module_from(json(key)), PassthroughBuffer::from_json(b));
    for (const auto& c : j.at("population")) {
      Candidate cand;
      const ModuleId id = module_from(c.at("module"));
      cand.full_genome = genome_from_json(c.at("genome"));
      require_valid(space, cand.full_genome);
      cand.module_genome = cand.full_genome.at(id);
      cand.fitness = c.at("fitness").get<double>();
      cand.cost = estimate(space, cand.full_genome, budget.bytes_per_weight);
      s.population.push_back(std::move(cand));
    }
    s.population_stats = stats_from_json(j.at("population_stats"));
    if (!j.at("best").is_null()) {
      const json& b = j.at("best");
      s.best = BestRecord{genome_from_json(b.at("genome")), b.at("fitness").get<double>(),
                          b.at("generation").get<std::uint64_t>()};
    }
    for (const auto& r : j.at("history"))
      s.history.push_back({r.at("cycle").get<std::uint64_t>(), module_from(r.at("module")),
                           r.at("generation").get<std::uint64_t>(),
                           r.at("best_fitness").get<double>(), r.at("mean_fitness").get<double>(),
                           r.at("evaluations").get<std::uint64_t>(),
                           r.at("feasible_rejections").get<std::uint64_t>()});
    return s;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void checkpoint_save(const SearchState& state, const std::filesystem::path& path) {
  write_text_atomic(path, state_to_json(state).dump(1) + "\n");
}

SearchState checkpoint_load(const std::filesystem::path& path, const DetectionSearchSpace& space,
                            const ResourceBudget& budget) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("missing checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return state_from_json(doc, space, budget);
}

std::string history_csv(std::span<const HistoryRow> rows) {
  std::ostringstream os;
  os << "cycle,phase_module,generation,best_fitness,mean_fitness,evaluations,"
        "feasible_rejections\n";
  for (const auto& r : rows)
    os << r.cycle << ',' << to_string(r.module) << ',' << r.generation << ','
       << format_double(r.best_fitness) << ',' << format_double(r.mean_fitness) << ','
       << r.evaluations << ',' << r.feasible_rejections << '\n';
  return os.str();
}

}  // namespace elastic
