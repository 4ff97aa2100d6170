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

// Frozen landscapes for the acceptance run. Each set is a space shape plus
// the synthetic seeds evaluated on it; none of them may change without the
// acceptance thresholds being re-argued.

#ifndef ELASTIC_TESTS_GOLDEN_HPP
#define ELASTIC_TESTS_GOLDEN_HPP

#include <array>
#include <cstdint>

namespace elastic::golden {

// Oracle optimality: shipped tiny.json (16 joint genomes).
inline constexpr std::array<std::uint64_t, 8> kOracleSeeds{42, 43, 44, 45, 46, 47, 48, 49};
inline constexpr std::size_t kOraclePopulation = 16;
inline constexpr std::uint64_t kOracleBudget = 20;

// Passthrough ablation: backbone 6 genes, head 6 genes, 3 choices each.
// 30 generations at 5 per phase gives 3 full alternation cycles.
struct Shape {
  int backbone_genes;
  int head_genes;
  int choices;
  int head_choices;  // 0 = same as choices
};
inline constexpr Shape kAblationShape{6, 6, 3, 0};
inline constexpr std::array<std::uint64_t, 8> kAblationSeeds{1, 2, 3, 4, 5, 6, 7, 8};
inline constexpr std::uint64_t kAblationBudget = 30;

// Sampling refinement: backbone 12 genes x 6 choices, head one 128-way axis.
inline constexpr Shape kSamplingShape{12, 1, 6, 128};
inline constexpr std::array<std::uint64_t, 8> kSamplingSeeds{1, 2, 3, 4, 5, 6, 7, 8};
inline constexpr std::size_t kSamplingPopulation = 30;
inline constexpr std::uint64_t kSamplingBudget = 30;

}  // namespace elastic::golden

#endif  // ELASTIC_TESTS_GOLDEN_HPP
