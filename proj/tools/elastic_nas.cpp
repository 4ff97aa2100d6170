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

// elastic-nas: command-line driver.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 feasibility
// verdict failure, 3 evaluator or protocol failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "elastic/analysis.hpp"
#include "elastic/controller.hpp"
#include "elastic/cost_model.hpp"
#include "elastic/errors.hpp"
#include "elastic/external_evaluator.hpp"
#include "elastic/run_config.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace elastic;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitEvaluator = 3;

constexpr int kDocumentVersion = 1;

const char* kFooter = R"(Evaluators:
  synthetic:<seed>     built-in deterministic landscape
  external:<command>   child process speaking the evaluator protocol, version 1:
      engine -> {"type":"hello","version":1,"space_hash":"<hex16>"}
      child  -> {"type":"hello","version":1,"space_hash":"<hex16>"}
      engine -> {"type":"eval","id":<n>,"genome":{"backbone":[...],"head":[...]}}
      child  -> {"type":"result","id":<n>,"fitness":<0..1>}
      engine -> {"type":"shutdown"}
    One JSON object per line; replies may arrive in any order.

Exit codes: 0 ok, 1 usage/config, 2 infeasible, 3 evaluator/protocol.)";

// Flags shared by commands that take a budget.
struct BudgetFlags {
  std::optional<std::string> device;
  std::optional<std::string> profiles;
  std::optional<std::uint64_t> tau_total;
  std::optional<std::uint64_t> tau_backbone;
  std::optional<std::uint64_t> tau_head;
  std::optional<int> bytes_per_weight;

  void add(CLI::App& cmd) {
    cmd.add_option("--budget-device", device, "Device profile (max78000, max78002, or custom)");
    cmd.add_option("--profiles", profiles, "Extra device profiles JSON")->check(CLI::ExistingFile);
    cmd.add_option("--tau-total", tau_total, "Total weight-memory budget in bytes");
    cmd.add_option("--tau-backbone", tau_backbone, "Backbone weight-memory budget in bytes");
    cmd.add_option("--tau-head", tau_head, "Head weight-memory budget in bytes");
    cmd.add_option("--bytes-per-weight", bytes_per_weight, "Bytes per stored weight");
  }

  void apply(BudgetInputs& b) const {
    if (device) b.device = *device;
    if (profiles) b.profiles = fs::path(*profiles);
    if (tau_total) b.tau_total = tau_total;
    if (tau_backbone) b.tau_backbone = tau_backbone;
    if (tau_head) b.tau_head = tau_head;
    if (bytes_per_weight) b.bytes_per_weight = bytes_per_weight;
  }
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  write_text_atomic(path, doc.dump(2) + "\n");
}

/// Accepts a bare genome object or any document with a "genome" field (such
/// as best_genome.json). A space_hash, when present, must match.
Genome read_genome(const fs::path& path, const DetectionSearchSpace& space) {
  const json doc = read_json(path);
  try {
    if (doc.contains("space_hash") &&
        parse_hex64(doc.at("space_hash").get<std::string>()) != space.space_hash())
      throw ConfigError(path.string() + " was produced for a different space");
    const Genome g = genome_from_json(doc.contains("genome") ? doc.at("genome") : doc);
    require_valid(space, g);
    return g;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json genome_document(const DetectionSearchSpace& space, const Genome& g, double fitness,
                     const ResourceBudget& budget) {
  const auto cost = estimate(space, g, budget.bytes_per_weight);
  return {{"version", kDocumentVersion},
          {"space_hash", hex64(space.space_hash())},
          {"genome", genome_to_json(g)},
          {"fitness", fitness},
          {"feasible", check_budget(cost, budget).feasible},
          {"cost", cost_report_to_json(cost)}};
}

// ---------------------------------------------------------------------------
// Run directories.

struct RunPaths {
  fs::path dir;
  fs::path config() const { return dir / "config.json"; }
  fs::path history() const { return dir / "history.csv"; }
  fs::path checkpoint() const { return dir / "checkpoint.json"; }
  fs::path best() const { return dir / "best_genome.json"; }
  fs::path convergence() const { return dir / "convergence.json"; }
};

void save_progress(const RunPaths& run, const SearchState& state) {
  checkpoint_save(state, run.checkpoint());
  write_text_atomic(run.history(), history_csv(state.history));
}

void finalize(const RunPaths& run, const DetectionSearchSpace& space, const FrozenRun& frozen,
              const SearchState& state) {
  if (!state.best) throw ConfigError("checkpoint holds no best genome");
  json best = genome_document(space, state.best->genome, state.best->fitness, frozen.budget);
  best["generation"] = state.best->generation;
  write_json(run.best(), best);
  json conv = convergence_to_json(detect_convergence(state.history));
  conv["version"] = kDocumentVersion;
  conv["space_hash"] = hex64(space.space_hash());
  write_json(run.convergence(), conv);
}

/// Steps the controller, checkpointing after every generation.
int drive(SearchController& ctl, SearchState& state, const RunPaths& run,
          const DetectionSearchSpace& space, const FrozenRun& frozen,
          std::optional<std::uint64_t> stop_after) {
  ctl.run(state, [&](const SearchState& s) { save_progress(run, s); }, stop_after);
  if (!state.finished()) {
    std::cerr << "stopped after generation " << state.generations_done << " of "
              << state.total_generation_budget << "; continue with: resume --run "
              << run.dir.string() << "\n";
    return kExitOk;
  }
  finalize(run, space, frozen, state);
  std::cout << "best fitness " << format_double(state.best->fitness) << " -> "
            << run.best().string() << "\n";
  return kExitOk;
}

DetectionSearchSpace load_frozen_space(const FrozenRun& frozen) {
  const auto space = load_space(frozen.space_path);
  if (space.space_hash() != frozen.space_hash)
    throw CheckpointError("space file " + frozen.space_path.string() +
                          " no longer matches the run's space_hash " + hex64(frozen.space_hash));
  return space;
}

// ---------------------------------------------------------------------------
// Commands.

struct SearchArgs {
  std::optional<std::string> config_file;
  std::optional<std::string> space;
  std::optional<std::string> evaluator;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> population;
  std::optional<std::uint64_t> generations;
  std::optional<std::size_t> generations_per_phase;
  std::optional<double> passthrough_ratio;
  std::optional<double> mutation_prob;
  std::optional<int> window;
  BudgetFlags budget;
  std::string out;
  int workers = 1;
  std::optional<std::uint64_t> stop_after;
};

int cmd_search(const SearchArgs& a) {
  RunConfig cfg = a.config_file ? load_run_config_file(*a.config_file) : RunConfig{};
  if (a.space) cfg.space_path = fs::path(*a.space);
  if (a.evaluator) cfg.evaluator = *a.evaluator;
  if (a.seed) cfg.schedule.seed = *a.seed;
  if (a.population) cfg.evolution.population_size = *a.population;
  if (a.generations) cfg.schedule.total_generation_budget = *a.generations;
  if (a.generations_per_phase) cfg.evolution.generations_per_phase = *a.generations_per_phase;
  if (a.passthrough_ratio) cfg.schedule.passthrough_ratio = *a.passthrough_ratio;
  if (a.mutation_prob) cfg.evolution.mutation_prob = *a.mutation_prob;
  if (a.window) cfg.window = *a.window;
  a.budget.apply(cfg.budget);
  if (!cfg.space_path) throw ConfigError("no space: pass --space or set it in --config");

  const auto space = load_space(*cfg.space_path);
  const FrozenRun frozen = freeze(cfg, space);

  const RunPaths run{a.out};
  if (fs::exists(run.dir) && !(fs::is_directory(run.dir) && fs::is_empty(run.dir)))
    throw ConfigError("refusing to write into non-empty " + run.dir.string());
  fs::create_directories(run.dir);
  write_json(run.config(), frozen_to_json(frozen));

  auto evaluator = make_evaluator(frozen.evaluator, space, a.workers, frozen.window);
  SearchController ctl(space, frozen.schedule, frozen.evolution, frozen.budget, *evaluator);
  SearchState state = ctl.initial_state();
  return drive(ctl, state, run, space, frozen, a.stop_after);
}

int cmd_resume(const std::string& dir, int workers, std::optional<std::uint64_t> stop_after) {
  const RunPaths run{dir};
  if (!fs::exists(run.config())) throw ConfigError("no config.json in " + dir);
  const FrozenRun frozen = frozen_from_json(read_json(run.config()));
  const auto space = load_frozen_space(frozen);
  if (!fs::exists(run.checkpoint())) throw ConfigError("no checkpoint.json in " + dir);

  auto evaluator = make_evaluator(frozen.evaluator, space, workers, frozen.window);
  SearchController ctl(space, frozen.schedule, frozen.evolution, frozen.budget, *evaluator);
  SearchState state = checkpoint_load(run.checkpoint(), space, frozen.budget);
  ctl.check_compatible(state);
  if (state.finished()) {
    if (!fs::exists(run.best()) || !fs::exists(run.convergence()))
      finalize(run, space, frozen, state);
    std::cerr << "run already complete (" << state.generations_done
              << " generations); nothing to do\n";
    return kExitOk;
  }
  return drive(ctl, state, run, space, frozen, stop_after);
}

int cmd_estimate(const std::string& space_path, const std::string& genome_path,
                 const BudgetFlags& flags, bool as_json) {
  const auto space = load_space(space_path);
  const Genome g = read_genome(genome_path, space);
  BudgetInputs inputs;
  flags.apply(inputs);

  std::optional<ResourceBudget> budget;
  if (!inputs.empty()) budget = inputs.resolve(space);
  const int bpw = budget ? budget->bytes_per_weight : inputs.bytes_per_weight.value_or(4);
  const auto cost = estimate(space, g, bpw);
  const Verdict verdict = budget ? check_budget(cost, *budget) : Verdict{};

  if (as_json) {
    json doc = cost_report_to_json(cost);
    doc["version"] = kDocumentVersion;
    doc["space_hash"] = hex64(space.space_hash());
    doc["bytes_per_weight"] = bpw;
    if (budget) {
      doc["feasible"] = verdict.feasible;
      json v = json::array();
      for (const auto& x : verdict.violations)
        v.push_back({{"constraint", x.constraint}, {"measured", x.measured}, {"allowed", x.allowed}});
      doc["violations"] = v;
    }
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << "params        " << cost.params << "\n"
              << "weight_bytes  " << cost.weight_bytes << "\n"
              << "macs          " << cost.macs << "\n"
              << "peak_act      " << cost.peak_activation_bytes << "\n"
              << "layers        " << cost.layer_count << "\n"
              << "max_channels  " << cost.max_channels << "\n";
    if (budget) {
      std::cout << "verdict       " << (verdict.feasible ? "feasible" : "infeasible") << "\n";
      for (const auto& x : verdict.violations)
        std::cout << "  " << x.constraint << ": " << x.measured << " > " << x.allowed << "\n";
    }
  }
  return verdict.feasible ? kExitOk : kExitInfeasible;
}

struct StatsArgs {
  std::string space;
  std::string evaluator;
  std::uint64_t seed = 0;
  std::size_t n = 100;
  std::optional<std::string> condition;
  std::optional<std::string> fix_from;
  std::string module = "head";
  std::string out = ".";
  int workers = 1;
  int window = 8;
  BudgetFlags budget;
};

int cmd_stats(const StatsArgs& a) {
  const auto space = load_space(a.space);
  const std::string condition = a.condition.value_or(a.fix_from ? "conditioned" : "joint");
  if (condition != "joint" && condition != "conditioned" && condition != "both")
    throw ConfigError("--condition must be joint, conditioned or both");
  if (condition != "joint" && !a.fix_from)
    throw ConfigError("--condition " + condition + " needs --fix-from");
  const auto module = parse_module_id(a.module);
  if (!module || !space.has_module(*module))
    throw ConfigError("--module names no module of the space: " + a.module);

  BudgetInputs inputs;
  a.budget.apply(inputs);
  ResourceBudget budget;
  if (inputs.empty()) {
    budget.tau_total = ~0ULL;
  } else {
    budget = inputs.resolve(space);
  }

  std::vector<SamplingRequest> requests;
  SamplingRequest joint;
  joint.n = a.n;
  joint.seed = a.seed;
  if (condition != "conditioned") requests.push_back(joint);
  if (condition != "joint") {
    const Genome source = read_genome(*a.fix_from, space);
    Genome complement;
    for (const auto& [id, mg] : source.parts())
      if (id != *module) complement.set(mg);
    SamplingRequest c = joint;
    c.sampled_module = *module;
    c.fixed_complement = complement;
    requests.push_back(c);
  }

  auto evaluator = make_evaluator(a.evaluator, space, a.workers, a.window);
  std::vector<SamplingReport> reports;
  for (const auto& r : requests) reports.push_back(sample_stats(space, r, budget, *evaluator));

  const fs::path out(a.out);
  fs::create_directories(out);
  write_text_atomic(out / "stats.csv", stats_csv(reports));
  write_text_atomic(out / "samples.csv", samples_csv(reports));
  if (reports.size() > 1)
    write_text_atomic(out / "comparison.csv", comparison_csv(compare_conditions(reports)));
  std::cout << stats_csv(reports);
  return kExitOk;
}

int cmd_oracle(const std::string& space_path, const std::string& evaluator_spec,
               std::uint64_t cap, int workers, int window, const BudgetFlags& flags) {
  const auto space = load_space(space_path);
  BudgetInputs inputs;
  flags.apply(inputs);
  ResourceBudget budget;
  budget.tau_total = ~0ULL;
  if (!inputs.empty()) budget = inputs.resolve(space);
  auto evaluator = make_evaluator(evaluator_spec, space, workers, window);
  const auto r = oracle_best(space, *evaluator, cap);
  json doc = genome_document(space, r.genome, r.fitness, budget);
  doc["evaluated"] = r.evaluated;
  doc["evaluator"] = evaluator->id();
  std::cout << doc.dump(2) << "\n";
  return kExitOk;
}

int cmd_extract_best(const std::string& dir, const std::optional<std::string>& out) {
  const RunPaths run{dir};
  const FrozenRun frozen = frozen_from_json(read_json(run.config()));
  const auto space = load_frozen_space(frozen);
  if (!fs::exists(run.checkpoint())) throw ConfigError("no checkpoint.json in " + dir);
  const SearchState state = checkpoint_load(run.checkpoint(), space, frozen.budget);
  if (!state.best) throw ConfigError("checkpoint holds no best genome");
  json doc = genome_document(space, state.best->genome, state.best->fitness, frozen.budget);
  doc["generation"] = state.best->generation;
  doc["generations_done"] = state.generations_done;
  if (out) write_json(*out, doc);
  std::cout << doc.dump(2) << "\n";
  return doc.at("feasible").get<bool>() ? kExitOk : kExitInfeasible;
}

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const EvaluatorError& e) {
    std::cerr << "evaluator error: " << e.what() << "\n";
    return kExitEvaluator;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alternating evolutionary search over backbone and head modules under a "
               "device memory budget."};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.set_version_flag("--version", "elastic-nas 1.0 (evaluator protocol " +
                                        std::to_string(kProtocolVersion) + ")");
  std::function<int()> action;

  SearchArgs search;
  auto* s = app.add_subcommand("search", "Run a search into a fresh run directory");
  s->add_option("--config", search.config_file, "JSON config file (flags take precedence)")
      ->check(CLI::ExistingFile);
  s->add_option("--space", search.space, "Search-space JSON")->check(CLI::ExistingFile);
  s->add_option("--evaluator", search.evaluator, "synthetic:<seed> or external:<command>");
  s->add_option("--seed", search.seed, "Master seed");
  s->add_option("--population", search.population, "Population size per generation");
  s->add_option("--generations", search.generations, "Total generation budget");
  s->add_option("--generations-per-phase", search.generations_per_phase,
                "Generations before switching module");
  s->add_option("--passthrough-ratio", search.passthrough_ratio,
                "Fraction of a phase's initial population inherited from its buffer");
  s->add_option("--mutation-prob", search.mutation_prob, "Per-gene mutation probability");
  s->add_option("--window", search.window, "Outstanding requests to an external evaluator");
  search.budget.add(*s);
  s->add_option("--out", search.out, "Run directory (absent or empty)")->required();
  s->add_option("--workers", search.workers, "Evaluation threads")->check(CLI::PositiveNumber);
  s->add_option("--stop-after", search.stop_after, "Stop after this many generations");
  s->callback([&] { action = [&] { return cmd_search(search); }; });

  std::string resume_dir;
  int resume_workers = 1;
  std::optional<std::uint64_t> resume_stop;
  auto* r = app.add_subcommand("resume", "Continue a run from its checkpoint");
  r->add_option("--run", resume_dir, "Run directory")->required();
  r->add_option("--workers", resume_workers, "Evaluation threads")->check(CLI::PositiveNumber);
  r->add_option("--stop-after", resume_stop, "Stop after this many more generations");
  r->callback([&] {
    action = [&] { return cmd_resume(resume_dir, resume_workers, resume_stop); };
  });

  std::string est_space, est_genome;
  bool est_json = false;
  BudgetFlags est_budget;
  auto* e = app.add_subcommand("estimate", "Cost report and budget verdict for one genome");
  e->add_option("--space", est_space, "Search-space JSON")->required()->check(CLI::ExistingFile);
  e->add_option("--genome", est_genome, "Genome JSON or best_genome.json")
      ->required()
      ->check(CLI::ExistingFile);
  est_budget.add(*e);
  e->add_flag("--json", est_json, "Print the report as JSON");
  e->callback([&] {
    action = [&] { return cmd_estimate(est_space, est_genome, est_budget, est_json); };
  });

  StatsArgs stats;
  auto* st = app.add_subcommand("stats", "Sampling statistics, joint or conditioned");
  st->add_option("--space", stats.space, "Search-space JSON")->required()->check(CLI::ExistingFile);
  st->add_option("--evaluator", stats.evaluator, "synthetic:<seed> or external:<command>")
      ->required();
  st->add_option("--seed", stats.seed, "Sampling seed");
  st->add_option("--n", stats.n, "Distinct samples per condition (at least 2)");
  st->add_option("--condition", stats.condition, "joint, conditioned or both");
  st->add_option("--fix-from", stats.fix_from, "Genome whose other modules stay fixed")
      ->check(CLI::ExistingFile);
  st->add_option("--module", stats.module, "Module sampled under conditioning");
  st->add_option("--out", stats.out, "Directory for stats.csv and samples.csv");
  st->add_option("--workers", stats.workers, "Evaluation threads")->check(CLI::PositiveNumber);
  st->add_option("--window", stats.window, "Outstanding requests to an external evaluator");
  stats.budget.add(*st);
  st->callback([&] { action = [&] { return cmd_stats(stats); }; });

  std::string or_space, or_eval;
  std::uint64_t or_cap = kDefaultEnumerationCap;
  int or_workers = 1, or_window = 8;
  BudgetFlags or_budget;
  auto* o = app.add_subcommand("oracle", "Exhaustive best genome of a small space");
  o->add_option("--space", or_space, "Search-space JSON")->required()->check(CLI::ExistingFile);
  o->add_option("--evaluator", or_eval, "synthetic:<seed> or external:<command>")->required();
  o->add_option("--cap", or_cap, "Refuse spaces with more joint genomes than this");
  o->add_option("--workers", or_workers, "Evaluation threads")->check(CLI::PositiveNumber);
  o->add_option("--window", or_window, "Outstanding requests to an external evaluator");
  or_budget.add(*o);
  o->callback([&] {
    action = [&] { return cmd_oracle(or_space, or_eval, or_cap, or_workers, or_window, or_budget); };
  });

  std::string ex_dir;
  std::optional<std::string> ex_out;
  auto* x = app.add_subcommand("extract-best", "Best genome recorded in a run's checkpoint");
  x->add_option("--run", ex_dir, "Run directory")->required();
  x->add_option("--out", ex_out, "Also write the document here");
  x->callback([&] { action = [&] { return cmd_extract_best(ex_dir, ex_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  return guarded(action);
}
