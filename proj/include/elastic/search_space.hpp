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

// Modular search spaces, genomes, and the genetic operators over them.
//
// A genome stores choice *indices*; the option values (channel counts, kernel
// sizes, ...) live only in the axes. Each module of the detector (backbone,
// head) is searched over its own ModuleSpace.

#ifndef ELASTIC_SEARCH_SPACE_HPP
#define ELASTIC_SEARCH_SPACE_HPP

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "elastic/rng.hpp"

namespace elastic {

enum class ModuleId : std::uint8_t { backbone = 0, head = 1 };

inline constexpr ModuleId kAllModules[] = {ModuleId::backbone, ModuleId::head};

std::string_view to_string(ModuleId m) noexcept;
std::optional<ModuleId> parse_module_id(std::string_view name) noexcept;

/// Stable small integer used by the synthetic landscape: backbone = 1, head = 2.
constexpr std::uint64_t module_tag(ModuleId m) noexcept {
  return static_cast<std::uint64_t>(m) + 1;
}

/// What a gene controls, derived from the axis name (`stage0.width` -> width).
enum class AxisRole { width, kernel, depth, expansion };

struct ChoiceAxis {
  std::string name;
  std::vector<int> choices;

  AxisRole role() const;
  bool operator==(const ChoiceAxis&) const = default;
};

enum class LayerKind { conv, inverted_bottleneck };

/// Where the first layer of a stage takes its input from.
struct InputLink {
  enum class Source { image, previous, backbone_stage };
  Source source = Source::previous;
  int channels = 0;  // image only
  int height = 0;    // image only
  int width = 0;     // image only
  int stage = 0;     // backbone_stage only

  std::string to_string() const;
  static std::optional<InputLink> parse(std::string_view text);
  bool operator==(const InputLink&) const = default;
};

/// Structural metadata for one gene position. All genes of one stage carry the
/// same hw/kind/in_link; only the cost model reads this.
struct GeneSkeleton {
  int stage = 0;
  int height = 1;
  int width = 1;
  LayerKind kind = LayerKind::conv;
  InputLink in_link;

  bool operator==(const GeneSkeleton&) const = default;
};

struct ModuleSpace {
  ModuleId module = ModuleId::backbone;
  std::vector<ChoiceAxis> axes;
  std::vector<GeneSkeleton> skeleton;

  std::size_t gene_count() const noexcept { return axes.size(); }
  /// Product of axis sizes, saturating at UINT64_MAX.
  std::uint64_t cardinality() const noexcept;
  bool operator==(const ModuleSpace&) const = default;
};

struct ModuleGenome {
  ModuleId module = ModuleId::backbone;
  std::vector<int> genes;

  auto operator<=>(const ModuleGenome&) const = default;
};

/// A complete architecture: one ModuleGenome per module of the space. Ordering
/// is lexicographic with backbone genes first.
class Genome {
 public:
  Genome() = default;

  const ModuleGenome& at(ModuleId m) const;
  bool contains(ModuleId m) const noexcept { return parts_.contains(m); }
  void set(ModuleGenome g) { parts_[g.module] = std::move(g); }
  const std::map<ModuleId, ModuleGenome>& parts() const noexcept { return parts_; }

  /// All genes concatenated in module order.
  std::vector<int> flat() const;

  auto operator<=>(const Genome&) const = default;

 private:
  std::map<ModuleId, ModuleGenome> parts_;
};

class DetectionSearchSpace {
 public:
  DetectionSearchSpace() = default;
  /// Validates the modules and computes the content hash.
  explicit DetectionSearchSpace(std::map<ModuleId, ModuleSpace> modules);

  const std::map<ModuleId, ModuleSpace>& modules() const noexcept { return modules_; }
  const ModuleSpace& module(ModuleId m) const;
  bool has_module(ModuleId m) const noexcept { return modules_.contains(m); }
  std::vector<ModuleId> module_ids() const;

  std::uint64_t space_hash() const noexcept { return hash_; }
  std::uint64_t cardinality() const noexcept;

  bool operator==(const DetectionSearchSpace& o) const { return modules_ == o.modules_; }

 private:
  std::map<ModuleId, ModuleSpace> modules_;
  std::uint64_t hash_ = 0;
};

inline constexpr int kSpaceDocumentVersion = 1;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);
std::optional<std::uint64_t> parse_hex64(std::string_view text) noexcept;

DetectionSearchSpace parse_space(std::string_view text);
DetectionSearchSpace load_space(const std::filesystem::path& path);
nlohmann::json space_to_json(const DetectionSearchSpace& space);
/// Canonical form: sorted keys, no insignificant whitespace. The space hash is
/// FNV-1a over exactly these bytes.
std::string serialize_space(const DetectionSearchSpace& space);

// Validation.
bool is_valid(const ModuleSpace& space, const ModuleGenome& g) noexcept;
bool is_valid(const DetectionSearchSpace& space, const Genome& g) noexcept;
/// Throws ConfigError describing the first violation.
void require_valid(const DetectionSearchSpace& space, const Genome& g);

/// Option values selected by the genome's indices.
std::vector<int> decode_values(const ModuleSpace& space, const ModuleGenome& g);

// Genome JSON: {"backbone":[...], "head":[...]} holding choice indices.
nlohmann::json genome_to_json(const Genome& g);
Genome genome_from_json(const nlohmann::json& j);

// Genetic operators. All are pure given the Rng stream.
ModuleGenome sample_random(const ModuleSpace& space, Rng& rng);

struct MutationOutcome {
  ModuleGenome genome;
  std::size_t resampled = 0;  // positions where a resample event fired
};
MutationOutcome mutate_traced(const ModuleSpace& space, const ModuleGenome& parent,
                              double mutation_prob, Rng& rng);
ModuleGenome mutate(const ModuleSpace& space, const ModuleGenome& parent, double mutation_prob,
                    Rng& rng);

/// Uniform crossover. Throws ConfigError if the parents belong to different
/// modules or do not match the space.
ModuleGenome crossover(const ModuleSpace& space, const ModuleGenome& a, const ModuleGenome& b,
                       Rng& rng);

// Enumeration (oracle support).
inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Lexicographic odometer over a module space.
class ModuleEnumerator {
 public:
  explicit ModuleEnumerator(const ModuleSpace& space,
                            std::uint64_t cap = kDefaultEnumerationCap);
  /// Current genome; valid until `advance()` returns false.
  const ModuleGenome& current() const noexcept { return current_; }
  bool advance() noexcept;

 private:
  const ModuleSpace* space_;
  ModuleGenome current_;
};

/// Lexicographic enumeration over full genomes (backbone genes vary slowest).
class GenomeEnumerator {
 public:
  explicit GenomeEnumerator(const DetectionSearchSpace& space,
                            std::uint64_t cap = kDefaultEnumerationCap);
  const Genome& current() const noexcept { return current_; }
  bool advance();

 private:
  const DetectionSearchSpace* space_;
  std::vector<int> flat_;
  std::vector<int> radix_;
  Genome current_;
  void rebuild();
};

std::vector<ModuleGenome> enumerate(const ModuleSpace& space,
                                    std::uint64_t cap = kDefaultEnumerationCap);
std::vector<Genome> enumerate(const DetectionSearchSpace& space,
                              std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace elastic

#endif  // ELASTIC_SEARCH_SPACE_HPP
