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

#include "elastic/search_space.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "elastic/errors.hpp"

namespace elastic {

using nlohmann::json;

std::string_view to_string(ModuleId m) noexcept {
  switch (m) {
    case ModuleId::backbone: return "backbone";
    case ModuleId::head: return "head";
  }
  return "unknown";
}

std::optional<ModuleId> parse_module_id(std::string_view name) noexcept {
  if (name == "backbone") return ModuleId::backbone;
  if (name == "head") return ModuleId::head;
  return std::nullopt;
}

namespace {

std::optional<AxisRole> role_from_name(std::string_view name) {
  const auto dot = name.rfind('.');
  const std::string_view tail = dot == std::string_view::npos ? name : name.substr(dot + 1);
  if (tail == "width") return AxisRole::width;
  if (tail == "kernel") return AxisRole::kernel;
  if (tail == "depth") return AxisRole::depth;
  if (tail == "expand" || tail == "expansion") return AxisRole::expansion;
  return std::nullopt;
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::string_view kind_name(LayerKind k) {
  return k == LayerKind::conv ? "conv" : "ibn";
}

}  // namespace

AxisRole ChoiceAxis::role() const {
  auto r = role_from_name(name);
  if (!r) throw ConfigError("axis '" + name + "' has no recognised role suffix");
  return *r;
}

std::string InputLink::to_string() const {
  switch (source) {
    case Source::image:
      return "image:" + std::to_string(channels) + "x" + std::to_string(height) + "x" +
             std::to_string(width);
    case Source::previous: return "prev";
    case Source::backbone_stage: return "backbone:" + std::to_string(stage);
  }
  return {};
}

std::optional<InputLink> InputLink::parse(std::string_view text) {
  InputLink link;
  if (text == "prev") {
    link.source = Source::previous;
    return link;
  }
  if (text.starts_with("backbone:")) {
    auto s = parse_int(text.substr(9));
    if (!s || *s < 0) return std::nullopt;
    link.source = Source::backbone_stage;
    link.stage = *s;
    return link;
  }
  if (text.starts_with("image:")) {
    std::string_view rest = text.substr(6);
    int dims[3];
    for (int i = 0; i < 3; ++i) {
      const auto x = rest.find('x');
      const std::string_view part = i < 2 ? rest.substr(0, x) : rest;
      if (i < 2 && x == std::string_view::npos) return std::nullopt;
      auto v = parse_int(part);
      if (!v || *v <= 0) return std::nullopt;
      dims[i] = *v;
      if (i < 2) rest = rest.substr(x + 1);
    }
    link.source = Source::image;
    link.channels = dims[0];
    link.height = dims[1];
    link.width = dims[2];
    return link;
  }
  return std::nullopt;
}

std::uint64_t ModuleSpace::cardinality() const noexcept {
  std::uint64_t total = 1;
  for (const auto& a : axes) {
    const auto n = static_cast<std::uint64_t>(a.choices.size());
    if (n != 0 && total > std::numeric_limits<std::uint64_t>::max() / n)
      return std::numeric_limits<std::uint64_t>::max();
    total *= n;
  }
  return total;
}

const ModuleGenome& Genome::at(ModuleId m) const {
  auto it = parts_.find(m);
  if (it == parts_.end())
    throw ConfigError("genome has no genes for module " + std::string(to_string(m)));
  return it->second;
}

std::vector<int> Genome::flat() const {
  std::vector<int> out;
  for (const auto& [m, g] : parts_) out.insert(out.end(), g.genes.begin(), g.genes.end());
  return out;
}

// ---------------------------------------------------------------------------
// Validation of a module space. Errors carry the document path.

namespace {

void validate_module(const ModuleSpace& ms, const std::map<ModuleId, ModuleSpace>& all) {
  const std::string base = "modules." + std::string(to_string(ms.module));
  if (ms.axes.empty()) throw SpaceError(base + ".axes", "module has no axes");

  for (std::size_t i = 0; i < ms.axes.size(); ++i) {
    const auto& axis = ms.axes[i];
    const std::string path = base + ".axes[" + std::to_string(i) + "]";
    if (!role_from_name(axis.name))
      throw SpaceError(path + ".name", "axis name '" + axis.name +
                                           "' must end in width, kernel, depth or expand");
    if (axis.choices.empty()) throw SpaceError(path + ".choices", "empty axis");
    std::set<int> seen;
    for (std::size_t c = 0; c < axis.choices.size(); ++c) {
      const int v = axis.choices[c];
      const std::string cpath = path + ".choices[" + std::to_string(c) + "]";
      if (v <= 0) throw SpaceError(cpath, "option values must be positive");
      if (!seen.insert(v).second)
        throw SpaceError(cpath, "duplicate choice value " + std::to_string(v));
    }
  }

  if (ms.skeleton.size() < ms.axes.size())
    throw SpaceError(base + ".skeleton[" + std::to_string(ms.skeleton.size()) + "]",
                     "missing skeleton entry");
  if (ms.skeleton.size() > ms.axes.size())
    throw SpaceError(base + ".skeleton[" + std::to_string(ms.axes.size()) + "]",
                     "skeleton entry without a matching axis");

  // Per-stage consistency and role coverage.
  struct StageInfo {
    std::size_t first_gene;
    std::map<AxisRole, int> roles;
  };
  std::map<int, StageInfo> stages;
  for (std::size_t i = 0; i < ms.skeleton.size(); ++i) {
    const auto& sk = ms.skeleton[i];
    const std::string path = base + ".skeleton[" + std::to_string(i) + "]";
    if (sk.stage < 0) throw SpaceError(path + ".stage", "stage index must be >= 0");
    if (sk.height <= 0 || sk.width <= 0) throw SpaceError(path + ".hw", "hw must be positive");
    auto [it, inserted] = stages.try_emplace(sk.stage, StageInfo{i, {}});
    if (!inserted) {
      const auto& ref = ms.skeleton[it->second.first_gene];
      if (ref.height != sk.height || ref.width != sk.width)
        throw SpaceError(path + ".hw", "hw differs from other genes of stage " +
                                           std::to_string(sk.stage));
      if (ref.kind != sk.kind)
        throw SpaceError(path + ".kind", "kind differs from other genes of stage " +
                                             std::to_string(sk.stage));
      if (ref.in_link != sk.in_link)
        throw SpaceError(path + ".in_link", "in_link differs from other genes of stage " +
                                                std::to_string(sk.stage));
    }
    const AxisRole role = *role_from_name(ms.axes[i].name);
    if (++it->second.roles[role] > 1)
      throw SpaceError(base + ".axes[" + std::to_string(i) + "].name",
                       "stage " + std::to_string(sk.stage) + " has more than one " +
                           ms.axes[i].name + " axis");
  }

  const int first_stage = stages.begin()->first;
  for (const auto& [stage, info] : stages) {
    const auto& sk = ms.skeleton[info.first_gene];
    const std::string path = base + ".skeleton[" + std::to_string(info.first_gene) + "]";
    if (!info.roles.contains(AxisRole::width))
      throw SpaceError(path, "stage " + std::to_string(stage) + " has no width axis");
    const bool has_expand = info.roles.contains(AxisRole::expansion);
    if (sk.kind == LayerKind::inverted_bottleneck && !has_expand)
      throw SpaceError(path + ".kind", "inverted bottleneck stage " + std::to_string(stage) +
                                           " needs an expand axis");
    if (sk.kind == LayerKind::conv && has_expand)
      throw SpaceError(path + ".kind",
                       "conv stage " + std::to_string(stage) + " cannot have an expand axis");
    switch (sk.in_link.source) {
      case InputLink::Source::image: break;
      case InputLink::Source::previous:
        if (stage == first_stage)
          throw SpaceError(path + ".in_link", "first stage of a module cannot link to prev");
        break;
      case InputLink::Source::backbone_stage: {
        auto bb = all.find(ModuleId::backbone);
        if (bb == all.end())
          throw SpaceError(path + ".in_link", "links to a backbone that is not in the space");
        const bool found = std::any_of(bb->second.skeleton.begin(), bb->second.skeleton.end(),
                                       [&](const GeneSkeleton& g) {
                                         return g.stage == sk.in_link.stage;
                                       });
        if (!found)
          throw SpaceError(path + ".in_link",
                           "backbone stage " + std::to_string(sk.in_link.stage) + " not found");
        if (ms.module == ModuleId::backbone && sk.in_link.stage >= stage)
          throw SpaceError(path + ".in_link", "backbone stage may only link to earlier stages");
        break;
      }
    }
  }
}

}  // namespace

DetectionSearchSpace::DetectionSearchSpace(std::map<ModuleId, ModuleSpace> modules)
    : modules_(std::move(modules)) {
  if (modules_.empty()) throw SpaceError("modules", "space has no modules");
  for (auto& [id, ms] : modules_) {
    if (ms.module != id)
      throw SpaceError("modules." + std::string(to_string(id)), "module id mismatch");
    validate_module(ms, modules_);
  }
  hash_ = fnv1a64(serialize_space(*this));
}

const ModuleSpace& DetectionSearchSpace::module(ModuleId m) const {
  auto it = modules_.find(m);
  if (it == modules_.end())
    throw ConfigError("space has no module " + std::string(to_string(m)));
  return it->second;
}

std::vector<ModuleId> DetectionSearchSpace::module_ids() const {
  std::vector<ModuleId> ids;
  for (const auto& [id, _] : modules_) ids.push_back(id);
  return ids;
}

std::uint64_t DetectionSearchSpace::cardinality() const noexcept {
  std::uint64_t total = 1;
  for (const auto& [_, ms] : modules_) {
    const std::uint64_t c = ms.cardinality();
    if (total > std::numeric_limits<std::uint64_t>::max() / c)
      return std::numeric_limits<std::uint64_t>::max();
    total *= c;
  }
  return total;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::optional<std::uint64_t> parse_hex64(std::string_view text) noexcept {
  if (text.empty() || text.size() > 16) return std::nullopt;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, 16);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// Document parsing.

namespace {

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw SpaceError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SpaceError(path + "." + key, "missing field");
  return *it;
}

int require_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SpaceError(path, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw SpaceError(path, "integer out of range");
  return static_cast<int>(v);
}

ModuleSpace parse_module(ModuleId id, const json& doc, const std::string& base) {
  ModuleSpace ms;
  ms.module = id;
  const json& axes = require(doc, "axes", base);
  if (!axes.is_array()) throw SpaceError(base + ".axes", "expected an array");
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const std::string path = base + ".axes[" + std::to_string(i) + "]";
    ChoiceAxis axis;
    const json& name = require(axes[i], "name", path);
    if (!name.is_string()) throw SpaceError(path + ".name", "expected a string");
    axis.name = name.get<std::string>();
    const json& choices = require(axes[i], "choices", path);
    if (!choices.is_array()) throw SpaceError(path + ".choices", "expected an array");
    for (std::size_t c = 0; c < choices.size(); ++c)
      axis.choices.push_back(
          require_int(choices[c], path + ".choices[" + std::to_string(c) + "]"));
    ms.axes.push_back(std::move(axis));
  }
  const json& skeleton = require(doc, "skeleton", base);
  if (!skeleton.is_array()) throw SpaceError(base + ".skeleton", "expected an array");
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    const std::string path = base + ".skeleton[" + std::to_string(i) + "]";
    const json& e = skeleton[i];
    GeneSkeleton sk;
    sk.stage = require_int(require(e, "stage", path), path + ".stage");
    const json& hw = require(e, "hw", path);
    if (!hw.is_array() || hw.size() != 2) throw SpaceError(path + ".hw", "expected [h, w]");
    sk.height = require_int(hw[0], path + ".hw[0]");
    sk.width = require_int(hw[1], path + ".hw[1]");
    const json& kind = require(e, "kind", path);
    if (kind == "conv") {
      sk.kind = LayerKind::conv;
    } else if (kind == "ibn") {
      sk.kind = LayerKind::inverted_bottleneck;
    } else {
      throw SpaceError(path + ".kind", "expected \"conv\" or \"ibn\"");
    }
    const json& link = require(e, "in_link", path);
    if (!link.is_string()) throw SpaceError(path + ".in_link", "expected a string");
    auto parsed = InputLink::parse(link.get<std::string>());
    if (!parsed)
      throw SpaceError(path + ".in_link",
                       "expected \"prev\", \"backbone:<stage>\" or \"image:CxHxW\"");
    sk.in_link = *parsed;
    ms.skeleton.push_back(sk);
  }
  return ms;
}

}  // namespace

DetectionSearchSpace parse_space(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpaceError("$", std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object()) throw SpaceError("$", "expected an object");
  const json& version = require(doc, "version", "$");
  if (!version.is_number_integer() || version.get<int>() != kSpaceDocumentVersion)
    throw SpaceError("version", "unsupported version (expected " +
                                    std::to_string(kSpaceDocumentVersion) + ")");
  const json& modules = require(doc, "modules", "$");
  if (!modules.is_object()) throw SpaceError("modules", "expected an object");
  std::map<ModuleId, ModuleSpace> parsed;
  for (const auto& [key, value] : modules.items()) {
    auto id = parse_module_id(key);
    if (!id) throw SpaceError("modules." + key, "unknown module (expected backbone or head)");
    parsed.emplace(*id, parse_module(*id, value, "modules." + key));
  }
  return DetectionSearchSpace(std::move(parsed));
}

DetectionSearchSpace load_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open space document " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_space(ss.str());
}

json space_to_json(const DetectionSearchSpace& space) {
  json modules = json::object();
  for (const auto& [id, ms] : space.modules()) {
    json axes = json::array();
    for (const auto& a : ms.axes) axes.push_back({{"name", a.name}, {"choices", a.choices}});
    json skeleton = json::array();
    for (const auto& sk : ms.skeleton)
      skeleton.push_back({{"stage", sk.stage},
                          {"hw", {sk.height, sk.width}},
                          {"kind", kind_name(sk.kind)},
                          {"in_link", sk.in_link.to_string()}});
    modules[std::string(to_string(id))] = {{"axes", axes}, {"skeleton", skeleton}};
  }
  return {{"version", kSpaceDocumentVersion}, {"modules", modules}};
}

std::string serialize_space(const DetectionSearchSpace& space) {
  return space_to_json(space).dump();
}

// ---------------------------------------------------------------------------
// Genomes.

bool is_valid(const ModuleSpace& space, const ModuleGenome& g) noexcept {
  if (g.module != space.module || g.genes.size() != space.axes.size()) return false;
  for (std::size_t i = 0; i < g.genes.size(); ++i) {
    if (g.genes[i] < 0 || static_cast<std::size_t>(g.genes[i]) >= space.axes[i].choices.size())
      return false;
  }
  return true;
}

bool is_valid(const DetectionSearchSpace& space, const Genome& g) noexcept {
  if (g.parts().size() != space.modules().size()) return false;
  for (const auto& [id, ms] : space.modules()) {
    if (!g.contains(id) || !is_valid(ms, g.parts().at(id))) return false;
  }
  return true;
}

void require_valid(const DetectionSearchSpace& space, const Genome& g) {
  for (const auto& [id, _] : g.parts()) {
    if (!space.has_module(id))
      throw ConfigError("genome has genes for module " + std::string(to_string(id)) +
                        " which is not in the space");
  }
  for (const auto& [id, ms] : space.modules()) {
    if (!g.contains(id))
      throw ConfigError("genome is missing module " + std::string(to_string(id)));
    const auto& mg = g.parts().at(id);
    if (mg.genes.size() != ms.axes.size())
      throw ConfigError("module " + std::string(to_string(id)) + " expects " +
                        std::to_string(ms.axes.size()) + " genes, got " +
                        std::to_string(mg.genes.size()));
    for (std::size_t i = 0; i < mg.genes.size(); ++i) {
      if (mg.genes[i] < 0 || static_cast<std::size_t>(mg.genes[i]) >= ms.axes[i].choices.size())
        throw ConfigError("module " + std::string(to_string(id)) + " gene " + std::to_string(i) +
                          " = " + std::to_string(mg.genes[i]) + " is outside [0, " +
                          std::to_string(ms.axes[i].choices.size()) + ")");
    }
  }
}

std::vector<int> decode_values(const ModuleSpace& space, const ModuleGenome& g) {
  std::vector<int> values(g.genes.size());
  for (std::size_t i = 0; i < g.genes.size(); ++i)
    values[i] = space.axes.at(i).choices.at(static_cast<std::size_t>(g.genes[i]));
  return values;
}

json genome_to_json(const Genome& g) {
  json j = json::object();
  for (const auto& [id, mg] : g.parts()) j[std::string(to_string(id))] = mg.genes;
  return j;
}

Genome genome_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("genome must be a JSON object keyed by module");
  Genome g;
  for (const auto& [key, value] : j.items()) {
    auto id = parse_module_id(key);
    if (!id) throw ConfigError("genome has unknown module '" + key + "'");
    if (!value.is_array()) throw ConfigError("genome." + key + " must be an array");
    ModuleGenome mg{*id, {}};
    for (const auto& v : value) {
      if (!v.is_number_integer()) throw ConfigError("genome." + key + " must hold integers");
      mg.genes.push_back(v.get<int>());
    }
    g.set(std::move(mg));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Operators.

ModuleGenome sample_random(const ModuleSpace& space, Rng& rng) {
  ModuleGenome g{space.module, std::vector<int>(space.axes.size())};
  for (std::size_t i = 0; i < space.axes.size(); ++i)
    g.genes[i] = static_cast<int>(rng.uniform_index(space.axes[i].choices.size()));
  return g;
}

MutationOutcome mutate_traced(const ModuleSpace& space, const ModuleGenome& parent,
                              double mutation_prob, Rng& rng) {
  MutationOutcome out{parent, 0};
  for (std::size_t i = 0; i < space.axes.size(); ++i) {
    if (rng.bernoulli(mutation_prob)) {
      out.genome.genes[i] = static_cast<int>(rng.uniform_index(space.axes[i].choices.size()));
      ++out.resampled;
    }
  }
  return out;
}

ModuleGenome mutate(const ModuleSpace& space, const ModuleGenome& parent, double mutation_prob,
                    Rng& rng) {
  return mutate_traced(space, parent, mutation_prob, rng).genome;
}

ModuleGenome crossover(const ModuleSpace& space, const ModuleGenome& a, const ModuleGenome& b,
                       Rng& rng) {
  if (a.module != b.module || a.module != space.module)
    throw ConfigError("crossover parents belong to different modules");
  if (!is_valid(space, a) || !is_valid(space, b))
    throw ConfigError("crossover parents do not match the module space");
  ModuleGenome child = a;
  for (std::size_t i = 0; i < child.genes.size(); ++i) {
    if (rng.next() & 1ULL) child.genes[i] = b.genes[i];
  }
  return child;
}

// ---------------------------------------------------------------------------
// Enumeration.

namespace {

void check_cap(std::uint64_t cardinality, std::uint64_t cap) {
  if (cardinality > cap)
    throw CardinalityError("cardinality " + std::to_string(cardinality) +
                           " exceeds the enumeration cap of " + std::to_string(cap));
}

}  // namespace

ModuleEnumerator::ModuleEnumerator(const ModuleSpace& space, std::uint64_t cap)
    : space_(&space), current_{space.module, std::vector<int>(space.axes.size(), 0)} {
  check_cap(space.cardinality(), cap);
}

bool ModuleEnumerator::advance() noexcept {
  for (std::size_t i = current_.genes.size(); i-- > 0;) {
    if (static_cast<std::size_t>(++current_.genes[i]) < space_->axes[i].choices.size())
      return true;
    current_.genes[i] = 0;
  }
  return false;
}

GenomeEnumerator::GenomeEnumerator(const DetectionSearchSpace& space, std::uint64_t cap)
    : space_(&space) {
  check_cap(space.cardinality(), cap);
  for (const auto& [_, ms] : space.modules())
    for (const auto& a : ms.axes) radix_.push_back(static_cast<int>(a.choices.size()));
  flat_.assign(radix_.size(), 0);
  rebuild();
}

bool GenomeEnumerator::advance() {
  for (std::size_t i = flat_.size(); i-- > 0;) {
    if (++flat_[i] < radix_[i]) {
      rebuild();
      return true;
    }
    flat_[i] = 0;
  }
  return false;
}

void GenomeEnumerator::rebuild() {
  std::size_t pos = 0;
  for (const auto& [id, ms] : space_->modules()) {
    ModuleGenome mg{id, std::vector<int>(flat_.begin() + static_cast<std::ptrdiff_t>(pos),
                                         flat_.begin() +
                                             static_cast<std::ptrdiff_t>(pos + ms.axes.size()))};
    pos += ms.axes.size();
    current_.set(std::move(mg));
  }
}

std::vector<ModuleGenome> enumerate(const ModuleSpace& space, std::uint64_t cap) {
  ModuleEnumerator it(space, cap);
  std::vector<ModuleGenome> out;
  out.reserve(static_cast<std::size_t>(space.cardinality()));
  do {
    out.push_back(it.current());
  } while (it.advance());
  return out;
}

std::vector<Genome> enumerate(const DetectionSearchSpace& space, std::uint64_t cap) {
  GenomeEnumerator it(space, cap);
  std::vector<Genome> out;
  out.reserve(static_cast<std::size_t>(space.cardinality()));
  do {
    out.push_back(it.current());
  } while (it.advance());
  return out;
}

}  // namespace elastic
