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

#include "elastic/run_config.hpp"

#include <charconv>
#include <set>
#include <fstream>

#include "elastic/errors.hpp"
#include "elastic/external_evaluator.hpp"

namespace elastic {

using json = nlohmann::json;

ResourceBudget BudgetInputs::resolve(const DetectionSearchSpace& space) const {
  const auto modules = space.module_ids();
  ResourceBudget b;
  if (device) {
    std::vector<DeviceProfile> extra;
    if (profiles) extra = load_profiles(*profiles);
    b = device_budget(find_profile(*device, extra), modules);
  } else if (tau_total) {
    b.tau_total = *tau_total;
    for (auto id : modules) b.tau_per_module[id] = *tau_total / modules.size();
  } else {
    throw ConfigError("no budget: pass --budget-device or --tau-total");
  }
  if (tau_total && device) {
    b.tau_total = *tau_total;
    for (auto id : modules) b.tau_per_module[id] = *tau_total / modules.size();
  }
  if (tau_backbone) b.tau_per_module[ModuleId::backbone] = *tau_backbone;
  if (tau_head) b.tau_per_module[ModuleId::head] = *tau_head;
  if (bytes_per_weight) b.bytes_per_weight = *bytes_per_weight;
  if (b.bytes_per_weight < 1) throw ConfigError("bytes_per_weight must be at least 1");
  for (const auto& [id, tau] : b.tau_per_module) {
    (void)tau;
    if (!space.has_module(id))
      throw ConfigError("budget names module '" + std::string(to_string(id)) +
                        "' which the space does not define");
  }
  b.validate();
  return b;
}

namespace {

std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

json merged(json base, const json& patch) {
  base.merge_patch(patch);
  return base;
}

}  // namespace

void RunConfig::merge_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  static const std::set<std::string> known{
      "space",     "evaluator",  "seed",     "budget_device",    "profiles", "tau_total",
      "tau_backbone", "tau_head", "bytes_per_weight", "window", "schedule", "evolution"};
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    if (doc.contains("space"))
      space_path = resolve_path(doc.at("space").get<std::string>(), base_dir);
    if (doc.contains("evaluator")) evaluator = doc.at("evaluator").get<std::string>();
    if (doc.contains("schedule"))
      schedule = ScheduleConfig::from_json(merged(schedule.to_json(), doc.at("schedule")));
    if (doc.contains("seed")) schedule.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("evolution"))
      evolution = EvolutionConfig::from_json(merged(evolution.to_json(), doc.at("evolution")));
    if (doc.contains("budget_device")) budget.device = doc.at("budget_device").get<std::string>();
    if (doc.contains("profiles"))
      budget.profiles = resolve_path(doc.at("profiles").get<std::string>(), base_dir);
    if (doc.contains("tau_total")) budget.tau_total = doc.at("tau_total").get<std::uint64_t>();
    if (doc.contains("tau_backbone"))
      budget.tau_backbone = doc.at("tau_backbone").get<std::uint64_t>();
    if (doc.contains("tau_head")) budget.tau_head = doc.at("tau_head").get<std::uint64_t>();
    if (doc.contains("bytes_per_weight"))
      budget.bytes_per_weight = doc.at("bytes_per_weight").get<int>();
    if (doc.contains("window")) window = doc.at("window").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

RunConfig load_run_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig c;
  c.merge_json(doc, path.parent_path());
  return c;
}

FrozenRun freeze(const RunConfig& config, const DetectionSearchSpace& space) {
  if (!config.space_path) throw ConfigError("no space: pass --space");
  if (config.window < 1) throw ConfigError("window must be at least 1");
  FrozenRun run;
  run.space_path = std::filesystem::absolute(*config.space_path).lexically_normal();
  run.space_hash = space.space_hash();
  run.evaluator = config.evaluator;
  run.window = config.window;
  run.device = config.budget.device;
  run.budget = config.budget.resolve(space);
  run.schedule = config.schedule;
  run.evolution = config.evolution;
  run.evolution.validate();
  run.schedule.validate(space, run.evolution);
  return run;
}

json frozen_to_json(const FrozenRun& run) {
  json j = {{"version", kRunConfigVersion},
            {"space", run.space_path.string()},
            {"space_hash", hex64(run.space_hash)},
            {"evaluator", run.evaluator},
            {"window", run.window},
            {"budget", budget_to_json(run.budget)},
            {"schedule", run.schedule.to_json()},
            {"evolution", run.evolution.to_json()}};
  j["device"] = run.device ? json(*run.device) : json(nullptr);
  return j;
}

FrozenRun frozen_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kRunConfigVersion)
      throw ConfigError("unsupported config.json version " + j.at("version").dump());
    FrozenRun run;
    run.space_path = j.at("space").get<std::string>();
    const auto hash = parse_hex64(j.at("space_hash").get<std::string>());
    if (!hash) throw ConfigError("config.json: malformed space_hash");
    run.space_hash = *hash;
    run.evaluator = j.at("evaluator").get<std::string>();
    run.window = j.at("window").get<int>();
    if (j.contains("device") && !j.at("device").is_null())
      run.device = j.at("device").get<std::string>();
    run.budget = budget_from_json(j.at("budget"));
    run.schedule = ScheduleConfig::from_json(j.at("schedule"));
    run.evolution = EvolutionConfig::from_json(j.at("evolution"));
    return run;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config.json: ") + e.what());
  }
}

std::unique_ptr<Evaluator> make_evaluator(const std::string& spec,
                                          const DetectionSearchSpace& space, int workers,
                                          int window) {
  if (spec.rfind("synthetic:", 0) == 0) {
    const std::string_view digits = std::string_view(spec).substr(10);
    std::uint64_t seed = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
    if (digits.empty() || ec != std::errc() || end != digits.data() + digits.size())
      throw ConfigError("synthetic evaluator needs an unsigned seed: " + spec);
    return std::make_unique<SyntheticEvaluator>(space, seed, workers);
  }
  if (spec.rfind("external:", 0) == 0) {
    const std::string cmd = spec.substr(9);
    if (cmd.empty()) throw ConfigError("external evaluator needs a command line");
    return std::make_unique<ExternalEvaluator>(cmd, space, window);
  }
  throw ConfigError("evaluator must be synthetic:<seed> or external:<command>, got '" + spec +
                    "'");
}

}  // namespace elastic
