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

#include "elastic/cost_model.hpp"

#include <algorithm>
#include <fstream>

#include "elastic/errors.hpp"

namespace elastic {

using nlohmann::json;

LayerCost layer_cost(const LayerShape& l) noexcept {
  const auto k2 = static_cast<std::uint64_t>(l.kernel) * static_cast<std::uint64_t>(l.kernel);
  const auto hw = static_cast<std::uint64_t>(l.h_out) * static_cast<std::uint64_t>(l.w_out);
  const auto c_in = static_cast<std::uint64_t>(l.c_in);
  const auto c_out = static_cast<std::uint64_t>(l.c_out);
  LayerCost c;
  if (l.kind == ConvKind::depthwise) {
    c.params = c_in * k2 + (l.has_bias ? c_in : 0);
    c.macs = c_in * k2 * hw;
  } else {
    c.params = c_in * c_out * k2 + (l.has_bias ? c_out : 0);
    c.macs = c_in * c_out * k2 * hw;
  }
  return c;
}

namespace {

struct Activation {
  std::int64_t channels;
  int height;
  int width;
};

struct StageGenes {
  const GeneSkeleton* skeleton = nullptr;
  std::optional<int> width, kernel, depth, expansion;
};

}  // namespace

std::vector<LayerShape> instantiate_layers(const DetectionSearchSpace& space,
                                           const Genome& genome) {
  std::vector<LayerShape> layers;
  std::map<int, Activation> backbone_out;

  for (const auto& [id, ms] : space.modules()) {
    const ModuleGenome& mg = genome.at(id);
    if (!is_valid(ms, mg))
      throw Error("internal: genome does not validate against module " +
                  std::string(to_string(id)));
    std::map<int, StageGenes> stages;
    for (std::size_t i = 0; i < ms.axes.size(); ++i) {
      StageGenes& s = stages[ms.skeleton[i].stage];
      s.skeleton = &ms.skeleton[i];
      const int value = ms.axes[i].choices[static_cast<std::size_t>(mg.genes[i])];
      switch (ms.axes[i].role()) {
        case AxisRole::width: s.width = value; break;
        case AxisRole::kernel: s.kernel = value; break;
        case AxisRole::depth: s.depth = value; break;
        case AxisRole::expansion: s.expansion = value; break;
      }
    }

    std::optional<Activation> previous;
    for (const auto& [stage, s] : stages) {
      const GeneSkeleton& sk = *s.skeleton;
      if (!s.width) throw Error("internal: stage without width gene");
      Activation source{};
      switch (sk.in_link.source) {
        case InputLink::Source::image:
          source = {sk.in_link.channels, sk.in_link.height, sk.in_link.width};
          break;
        case InputLink::Source::previous:
          if (!previous) throw Error("internal: prev link on first stage");
          source = *previous;
          break;
        case InputLink::Source::backbone_stage: {
          auto it = backbone_out.find(sk.in_link.stage);
          if (it == backbone_out.end()) throw Error("internal: dangling backbone link");
          source = it->second;
          break;
        }
      }

      const int kernel = s.kernel.value_or(3);
      const int depth = s.depth.value_or(1);
      const Activation out{*s.width, sk.height, sk.width};
      for (int d = 0; d < depth; ++d) {
        const Activation in = d == 0 ? source : out;
        if (sk.kind == LayerKind::conv) {
          layers.push_back({id, ConvKind::standard, in.channels, out.channels, kernel, in.height,
                            in.width, out.height, out.width, true});
        } else {
          if (!s.expansion) throw Error("internal: inverted bottleneck without expansion");
          const std::int64_t hidden = in.channels * *s.expansion;
          layers.push_back({id, ConvKind::pointwise, in.channels, hidden, 1, in.height, in.width,
                            in.height, in.width, true});
          layers.push_back({id, ConvKind::depthwise, hidden, hidden, kernel, in.height, in.width,
                            out.height, out.width, true});
          layers.push_back({id, ConvKind::pointwise, hidden, out.channels, 1, out.height,
                            out.width, out.height, out.width, true});
        }
      }
      previous = out;
      if (id == ModuleId::backbone) backbone_out[stage] = out;
    }
  }
  return layers;
}

CostReport estimate_layers(std::span<const LayerShape> layers, int bytes_per_weight) {
  CostReport r;
  const auto bpw = static_cast<std::uint64_t>(bytes_per_weight);
  for (const LayerShape& l : layers) {
    const LayerCost c = layer_cost(l);
    r.params += c.params;
    r.macs += c.macs;
    ModuleCost& mc = r.per_module[l.module];
    mc.params += c.params;
    mc.macs += c.macs;
    mc.weight_bytes += c.params * bpw;
    const auto act = (static_cast<std::uint64_t>(l.c_in) * l.h_in * l.w_in +
                      static_cast<std::uint64_t>(l.c_out) * l.h_out * l.w_out) *
                     bpw;
    r.peak_activation_bytes = std::max(r.peak_activation_bytes, act);
    r.max_channels = std::max<std::uint64_t>(
        r.max_channels, static_cast<std::uint64_t>(std::max(l.c_in, l.c_out)));
    r.kernels_used.insert(l.kernel);
  }
  r.layer_count = layers.size();
  r.weight_bytes = r.params * bpw;
  return r;
}

CostReport estimate(const DetectionSearchSpace& space, const Genome& genome,
                    int bytes_per_weight) {
  const auto layers = instantiate_layers(space, genome);
  CostReport r = estimate_layers(layers, bytes_per_weight);
  // A module whose layers are all inactive still gets a (zero) entry.
  for (ModuleId id : space.module_ids()) r.per_module.try_emplace(id);
  return r;
}

json cost_report_to_json(const CostReport& r) {
  json per_module = json::object();
  for (const auto& [id, mc] : r.per_module)
    per_module[std::string(to_string(id))] = {
        {"params", mc.params}, {"weight_bytes", mc.weight_bytes}, {"macs", mc.macs}};
  return {{"params", r.params},
          {"weight_bytes", r.weight_bytes},
          {"macs", r.macs},
          {"peak_activation_bytes", r.peak_activation_bytes},
          {"layer_count", r.layer_count},
          {"max_channels", r.max_channels},
          {"kernels_used", r.kernels_used},
          {"per_module", per_module}};
}

// ---------------------------------------------------------------------------
// Budgets.

void ResourceBudget::validate() const {
  std::uint64_t sum = 0;
  for (const auto& [_, tau] : tau_per_module) sum += tau;
  if (sum > tau_total)
    throw ConfigError("per-module budgets sum to " + std::to_string(sum) +
                      " bytes, more than the total budget of " + std::to_string(tau_total));
  if (bytes_per_weight <= 0) throw ConfigError("bytes_per_weight must be positive");
}

json budget_to_json(const ResourceBudget& b) {
  json per_module = json::object();
  for (const auto& [id, tau] : b.tau_per_module) per_module[std::string(to_string(id))] = tau;
  json j = {{"tau_total", b.tau_total},
            {"tau_per_module", per_module},
            {"bytes_per_weight", b.bytes_per_weight}};
  if (b.max_macs) j["max_macs"] = *b.max_macs;
  if (b.max_layers) j["max_layers"] = *b.max_layers;
  if (b.max_channels) j["max_channels"] = *b.max_channels;
  if (b.max_activation_bytes) j["max_activation_bytes"] = *b.max_activation_bytes;
  if (b.allowed_kernels) j["allowed_kernels"] = *b.allowed_kernels;
  return j;
}

ResourceBudget budget_from_json(const json& j) {
  try {
    ResourceBudget b;
    b.tau_total = j.at("tau_total").get<std::uint64_t>();
    if (j.contains("tau_per_module")) {
      for (const auto& [key, v] : j.at("tau_per_module").items()) {
        auto id = parse_module_id(key);
        if (!id) throw ConfigError("budget names unknown module '" + key + "'");
        b.tau_per_module[*id] = v.get<std::uint64_t>();
      }
    }
    b.bytes_per_weight = j.value("bytes_per_weight", 4);
    if (j.contains("max_macs")) b.max_macs = j.at("max_macs").get<std::uint64_t>();
    if (j.contains("max_layers")) b.max_layers = j.at("max_layers").get<std::uint64_t>();
    if (j.contains("max_channels")) b.max_channels = j.at("max_channels").get<std::uint64_t>();
    if (j.contains("max_activation_bytes"))
      b.max_activation_bytes = j.at("max_activation_bytes").get<std::uint64_t>();
    if (j.contains("allowed_kernels"))
      b.allowed_kernels = j.at("allowed_kernels").get<std::set<int>>();
    b.validate();
    return b;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid budget: ") + e.what());
  }
}

Verdict check_budget(const CostReport& r, const ResourceBudget& b) {
  Verdict v;
  auto check = [&](std::string name, std::uint64_t measured, std::uint64_t allowed) {
    if (measured > allowed) {
      v.feasible = false;
      v.violations.push_back({std::move(name), measured, allowed});
    }
  };
  check("weight_bytes", r.weight_bytes, b.tau_total);
  for (const auto& [id, tau] : b.tau_per_module) {
    auto it = r.per_module.find(id);
    const std::uint64_t used = it == r.per_module.end() ? 0 : it->second.weight_bytes;
    check("weight_bytes[" + std::string(to_string(id)) + "]", used, tau);
  }
  if (b.max_macs) check("macs", r.macs, *b.max_macs);
  if (b.max_layers) check("layers", r.layer_count, *b.max_layers);
  if (b.max_channels) check("channels", r.max_channels, *b.max_channels);
  if (b.max_activation_bytes)
    check("activation_bytes", r.peak_activation_bytes, *b.max_activation_bytes);
  if (b.allowed_kernels) {
    for (int k : r.kernels_used) {
      if (!b.allowed_kernels->contains(k)) {
        v.feasible = false;
        // measured = offending kernel size, allowed = largest permitted size
        v.violations.push_back({"kernel", static_cast<std::uint64_t>(k),
                                b.allowed_kernels->empty()
                                    ? 0
                                    : static_cast<std::uint64_t>(*b.allowed_kernels->rbegin())});
      }
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Device profiles.

const std::vector<DeviceProfile>& builtin_profiles() {
  static const std::vector<DeviceProfile> profiles = {
      // 432 KB weights, 32 KB data, 1x1/3x3 kernels, 32 layers, 1024 channels.
      {"max78000", 432ULL * 1024, 32ULL * 1024, {1, 3}, 32, 1024, 1},
      // 2.3 MB weights (2.3 * 2^20, truncated), 80 KB data, 128 layers.
      {"max78002", 2411724ULL, 80ULL * 1024, {1, 3}, 128, std::nullopt, 1},
  };
  return profiles;
}

DeviceProfile profile_from_json(const json& j) {
  try {
    DeviceProfile p;
    p.name = j.at("name").get<std::string>();
    p.weight_mem_bytes = j.at("weight_mem_bytes").get<std::uint64_t>();
    p.data_mem_bytes = j.at("data_mem_bytes").get<std::uint64_t>();
    p.allowed_kernels = j.at("allowed_kernels").get<std::set<int>>();
    p.max_layers = j.at("max_layers").get<std::uint64_t>();
    if (j.contains("max_channels_per_layer") && !j.at("max_channels_per_layer").is_null())
      p.max_channels_per_layer = j.at("max_channels_per_layer").get<std::uint64_t>();
    p.bytes_per_weight = j.value("bytes_per_weight", 1);
    if (p.bytes_per_weight <= 0) throw ConfigError("profile bytes_per_weight must be positive");
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid device profile: ") + e.what());
  }
}

json profile_to_json(const DeviceProfile& p) {
  json j = {{"name", p.name},
            {"weight_mem_bytes", p.weight_mem_bytes},
            {"data_mem_bytes", p.data_mem_bytes},
            {"allowed_kernels", p.allowed_kernels},
            {"max_layers", p.max_layers},
            {"bytes_per_weight", p.bytes_per_weight}};
  j["max_channels_per_layer"] =
      p.max_channels_per_layer ? json(*p.max_channels_per_layer) : json(nullptr);
  return j;
}

std::vector<DeviceProfile> load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile registry " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed profile registry " + path.string() + ": " + e.what());
  }
  if (!doc.contains("profiles") || !doc.at("profiles").is_array())
    throw ConfigError("profile registry needs a \"profiles\" array");
  std::vector<DeviceProfile> out;
  for (const auto& p : doc.at("profiles")) out.push_back(profile_from_json(p));
  return out;
}

DeviceProfile find_profile(std::string_view name, std::span<const DeviceProfile> extra) {
  for (const auto& p : extra)
    if (p.name == name) return p;
  for (const auto& p : builtin_profiles())
    if (p.name == name) return p;
  throw ConfigError("unknown device profile '" + std::string(name) + "'");
}

ResourceBudget device_budget(const DeviceProfile& profile, std::span<const ModuleId> modules) {
  ResourceBudget b;
  b.tau_total = profile.weight_mem_bytes;
  if (!modules.empty()) {
    const std::uint64_t share = profile.weight_mem_bytes / modules.size();
    for (ModuleId m : modules) b.tau_per_module[m] = share;
  }
  b.max_activation_bytes = profile.data_mem_bytes;
  b.max_layers = profile.max_layers;
  b.max_channels = profile.max_channels_per_layer;
  b.allowed_kernels = profile.allowed_kernels;
  b.bytes_per_weight = profile.bytes_per_weight;
  return b;
}

}  // namespace elastic
