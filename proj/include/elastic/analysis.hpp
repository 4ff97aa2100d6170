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

// Search-space quality statistics from random sampling.
//
// Samples are distinct, budget-feasible architectures. Variance is the
// population variance (divisor n).

#ifndef ELASTIC_ANALYSIS_HPP
#define ELASTIC_ANALYSIS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "elastic/cost_model.hpp"
#include "elastic/evaluator.hpp"
#include "elastic/search_space.hpp"

namespace elastic {

struct SampleRecord {
  std::size_t index = 0;
  double fitness = 0.0;
  Genome genome;
};

struct SamplingReport {
  std::string condition;
  std::size_t n = 0;
  double mean = 0.0;
  double std_dev = 0.0;
  double variance = 0.0;
  std::vector<SampleRecord> samples;
  std::uint64_t space_hash = 0;
  std::string evaluator_id;
};

struct SamplingRequest {
  /// Module to randomise; nullopt samples every module (the joint condition).
  std::optional<ModuleId> sampled_module;
  /// Genes for the non-sampled modules; required when sampled_module is set.
  std::optional<Genome> fixed_complement;
  std::size_t n = 100;
  std::uint64_t seed = 0;
  std::size_t max_attempts_per_sample = 100;
  /// Overrides the generated condition label.
  std::optional<std::string> label;
};

/// Label used when none is given: "joint" or "fixed:<module>=<g0>-<g1>-...".
std::string condition_label(const SamplingRequest& request);

/// Throws ConfigError for n < 2 or a missing complement, InfeasibleError when
/// n distinct feasible samples cannot be drawn within the attempt cap.
SamplingReport sample_stats(const DetectionSearchSpace& space, const SamplingRequest& request,
                            const ResourceBudget& budget, Evaluator& evaluator);

struct MomentSummary {
  double mean = 0.0;
  double variance = 0.0;
};
/// Two-pass mean and population variance.
MomentSummary moments(const std::vector<double>& values);

struct ComparisonRow {
  std::string condition;
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
  double delta_mean = 0.0;      // mean - baseline mean
  double variance_ratio = 1.0;  // variance / baseline variance

  bool operator==(const ComparisonRow&) const = default;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;  // rows[0] is the baseline
  bool operator==(const ComparisonTable&) const = default;
};

/// Compares every report to the first. Throws ConfigError for fewer than two
/// reports or mismatched space hashes / evaluators.
ComparisonTable compare_conditions(const std::vector<SamplingReport>& reports);

std::string comparison_csv(const ComparisonTable& table);
ComparisonTable parse_comparison_csv(const std::string& text);

/// `condition,n,mean,std,variance`
std::string stats_csv(const std::vector<SamplingReport>& reports);
/// `condition,sample_idx,fitness,genome_json`
std::string samples_csv(const std::vector<SamplingReport>& reports);

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_field(const std::string& value);

}  // namespace elastic

#endif  // ELASTIC_ANALYSIS_HPP
