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

// Run configuration for the command-line driver. A RunConfig is built from
// defaults, then a JSON config file, then flags; the resolved form (FrozenRun)
// is what lands in a run directory's config.json and what resume reads back.

#ifndef ELASTIC_RUN_CONFIG_HPP
#define ELASTIC_RUN_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "elastic/controller.hpp"
#include "elastic/cost_model.hpp"
#include "elastic/evaluator.hpp"
#include "elastic/evolution.hpp"
#include "elastic/search_space.hpp"

namespace elastic {

inline constexpr int kRunConfigVersion = 1;

/// Budget as the user states it: a device profile, explicit byte limits, or a
/// device with some limits overridden.
struct BudgetInputs {
  std::optional<std::string> device;
  std::optional<std::filesystem::path> profiles;
  std::optional<std::uint64_t> tau_total;
  std::optional<std::uint64_t> tau_backbone;
  std::optional<std::uint64_t> tau_head;
  std::optional<int> bytes_per_weight;

  bool empty() const noexcept { return !device && !tau_total; }
  /// A device gives the base budget; tau_* and bytes_per_weight override it.
  /// Without a device, tau_total is split evenly across the space's modules
  /// and weights default to 4 bytes. Throws ConfigError when neither is set.
  ResourceBudget resolve(const DetectionSearchSpace& space) const;
};

struct RunConfig {
  std::optional<std::filesystem::path> space_path;
  std::string evaluator = "synthetic:0";
  BudgetInputs budget;
  ScheduleConfig schedule;
  EvolutionConfig evolution;
  int window = 8;

  /// Applies the keys present in a config-file document. Recognised keys:
  /// space, evaluator, seed, budget_device, profiles, tau_total, tau_backbone,
  /// tau_head, bytes_per_weight, window, schedule{...}, evolution{...}.
  /// Relative paths are taken relative to `base_dir`.
  void merge_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
};

RunConfig load_run_config_file(const std::filesystem::path& path);

/// Fully resolved inputs of one run.
struct FrozenRun {
  std::filesystem::path space_path;  // absolute
  std::uint64_t space_hash = 0;
  std::string evaluator;
  int window = 8;
  std::optional<std::string> device;
  ResourceBudget budget;
  ScheduleConfig schedule;
  EvolutionConfig evolution;

  bool operator==(const FrozenRun&) const = default;
};

FrozenRun freeze(const RunConfig& config, const DetectionSearchSpace& space);
nlohmann::json frozen_to_json(const FrozenRun& run);
/// Throws ConfigError on a malformed document or unknown version.
FrozenRun frozen_from_json(const nlohmann::json& j);

/// "synthetic:<seed>" or "external:<command line>". Throws ConfigError for
/// other forms and EvaluatorError when an external process cannot start.
std::unique_ptr<Evaluator> make_evaluator(const std::string& spec,
                                          const DetectionSearchSpace& space, int workers,
                                          int window);

}  // namespace elastic

#endif  // ELASTIC_RUN_CONFIG_HPP
