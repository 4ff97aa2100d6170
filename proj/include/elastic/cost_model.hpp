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

// Analytical cost model for microcontroller CNN accelerators.
//
// A genome is decoded into concrete convolution layers using the space's
// skeleton, then parameters, MACs, weight bytes and a sequential-liveness
// activation estimate are summed. Budgets and device profiles turn the report
// into a feasibility verdict.

#ifndef ELASTIC_COST_MODEL_HPP
#define ELASTIC_COST_MODEL_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "elastic/search_space.hpp"

namespace elastic {

enum class ConvKind { standard, depthwise, pointwise };

struct LayerShape {
  ModuleId module = ModuleId::backbone;
  ConvKind kind = ConvKind::standard;
  std::int64_t c_in = 1;
  std::int64_t c_out = 1;
  int kernel = 1;
  int h_in = 1;
  int w_in = 1;
  int h_out = 1;
  int w_out = 1;
  bool has_bias = true;

  bool operator==(const LayerShape&) const = default;
};

struct LayerCost {
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

/// Standard/pointwise: params = c_in*c_out*k^2 (+c_out), macs = c_in*c_out*k^2*h*w.
/// Depthwise:          params = c_in*k^2 (+c_in),        macs = c_in*k^2*h*w.
LayerCost layer_cost(const LayerShape& layer) noexcept;

/// Decodes a validated genome into its active layers, in execution order
/// (backbone stages, then head stages). Inactive depth layers are omitted and
/// inverted-bottleneck blocks expand to (pointwise, depthwise, pointwise).
std::vector<LayerShape> instantiate_layers(const DetectionSearchSpace& space,
                                           const Genome& genome);

struct ModuleCost {
  std::uint64_t params = 0;
  std::uint64_t weight_bytes = 0;
  std::uint64_t macs = 0;

  bool operator==(const ModuleCost&) const = default;
};

struct CostReport {
  std::uint64_t params = 0;
  std::uint64_t weight_bytes = 0;
  std::uint64_t macs = 0;
  std::uint64_t peak_activation_bytes = 0;
  std::uint64_t layer_count = 0;
  std::uint64_t max_channels = 0;
  std::set<int> kernels_used;
  std::map<ModuleId, ModuleCost> per_module;

  bool operator==(const CostReport&) const = default;
};

/// Activation elements are sized like weights (`bytes_per_weight`).
CostReport estimate(const DetectionSearchSpace& space, const Genome& genome,
                    int bytes_per_weight);
CostReport estimate_layers(std::span<const LayerShape> layers, int bytes_per_weight);

nlohmann::json cost_report_to_json(const CostReport& report);

struct ResourceBudget {
  std::uint64_t tau_total = 0;
  std::map<ModuleId, std::uint64_t> tau_per_module;
  std::optional<std::uint64_t> max_macs;
  std::optional<std::uint64_t> max_layers;
  std::optional<std::uint64_t> max_channels;
  std::optional<std::uint64_t> max_activation_bytes;
  std::optional<std::set<int>> allowed_kernels;
  int bytes_per_weight = 4;

  /// Throws ConfigError unless the per-module budgets sum to at most tau_total.
  void validate() const;
  bool operator==(const ResourceBudget&) const = default;
};

nlohmann::json budget_to_json(const ResourceBudget& budget);
ResourceBudget budget_from_json(const nlohmann::json& j);

struct Violation {
  std::string constraint;  // e.g. "weight_bytes", "weight_bytes[head]", "layers"
  std::uint64_t measured = 0;
  std::uint64_t allowed = 0;
};

struct Verdict {
  bool feasible = true;
  std::vector<Violation> violations;
  explicit operator bool() const noexcept { return feasible; }
};

Verdict check_budget(const CostReport& report, const ResourceBudget& budget);

struct DeviceProfile {
  std::string name;
  std::uint64_t weight_mem_bytes = 0;
  std::uint64_t data_mem_bytes = 0;
  std::set<int> allowed_kernels;
  std::uint64_t max_layers = 0;
  std::optional<std::uint64_t> max_channels_per_layer;  // unset = unconstrained
  int bytes_per_weight = 1;

  bool operator==(const DeviceProfile&) const = default;
};

/// MAX78000 and MAX78002. The MAX78002 has no published per-layer channel
/// limit, so its profile leaves max_channels_per_layer unset.
const std::vector<DeviceProfile>& builtin_profiles();

/// Loads `{"profiles":[{name, weight_mem_bytes, ...}]}`.
std::vector<DeviceProfile> load_profiles(const std::filesystem::path& path);
DeviceProfile profile_from_json(const nlohmann::json& j);
nlohmann::json profile_to_json(const DeviceProfile& p);

/// Looks in `extra` first, then the built-ins. Throws ConfigError when unknown.
DeviceProfile find_profile(std::string_view name, std::span<const DeviceProfile> extra = {});

/// Device limits as a budget; tau_total is split evenly across `modules`.
ResourceBudget device_budget(const DeviceProfile& profile, std::span<const ModuleId> modules);

}  // namespace elastic

#endif  // ELASTIC_COST_MODEL_HPP
