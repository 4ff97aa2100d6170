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

#ifndef ELASTIC_EVALUATOR_HPP
#define ELASTIC_EVALUATOR_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "elastic/search_space.hpp"

namespace elastic {

/// Fitness of a full genome: a value in [0, 1], higher is better.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  /// Stable identity; part of the fitness cache key and the config digest.
  virtual std::string id() const = 0;
  /// One fitness per genome, in request order.
  virtual std::vector<double> evaluate(std::span<const Genome> batch) = 0;

  double evaluate_one(const Genome& g);
};

/// Throws EvaluatorError unless `f` is finite and inside [0, 1].
void require_fitness_range(double f, std::string_view source);

inline constexpr std::uint64_t kPairTag = 0xBEEF;

/// Deterministic synthetic stand-in for a trained supernet's accuracy.
///
/// Each gene contributes a unary utility u = H(seed, module_tag, i, v) and
/// each coupled (backbone gene i, head gene j) pair, (i + j) % 3 == 0, a
/// pairwise utility p = H(seed, 0xBEEF, i, j, v_b, v_h); v is the gene's choice
/// index and H is `fold_hash` mapped to [0, 1). Fitness is
/// (sum u + 2 sum p) / (n_unary + 2 n_pairs), which stays strictly below 1.
class SyntheticLandscape {
 public:
  SyntheticLandscape(const DetectionSearchSpace& space, std::uint64_t seed);

  double fitness(const Genome& g) const;

  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const noexcept {
    return pairs_;
  }
  std::size_t n_unary() const noexcept { return n_unary_; }

 private:
  std::uint64_t seed_;
  std::size_t n_unary_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

double synthetic_fitness(const DetectionSearchSpace& space, const Genome& genome,
                         std::uint64_t seed);

/// In-process synthetic evaluator; `workers > 1` splits each batch across
/// threads (results do not depend on the worker count).
class SyntheticEvaluator final : public Evaluator {
 public:
  SyntheticEvaluator(const DetectionSearchSpace& space, std::uint64_t seed, int workers = 1);
  std::string id() const override;
  std::vector<double> evaluate(std::span<const Genome> batch) override;

 private:
  SyntheticLandscape landscape_;
  int workers_;
};

/// Wraps a callable; handy for constant or hand-built landscapes.
class FunctionEvaluator final : public Evaluator {
 public:
  FunctionEvaluator(std::string id, std::function<double(const Genome&)> fn)
      : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  std::vector<double> evaluate(std::span<const Genome> batch) override;

 private:
  std::string id_;
  std::function<double(const Genome&)> fn_;
};

/// Memoises fitness per (space_hash, evaluator id, full genome). Only genomes
/// missing from the cache reach the wrapped evaluator, deduplicated and in
/// first-seen order.
class CachingEvaluator final : public Evaluator {
 public:
  CachingEvaluator(Evaluator& inner, std::uint64_t space_hash)
      : inner_(&inner), space_hash_(space_hash) {}
  std::string id() const override { return inner_->id(); }
  std::vector<double> evaluate(std::span<const Genome> batch) override;

  std::uint64_t hits() const noexcept { return hits_; }
  std::uint64_t misses() const noexcept { return misses_; }
  std::size_t size() const noexcept { return cache_.size(); }

 private:
  struct Key {
    std::uint64_t space_hash;
    std::string evaluator_id;
    Genome genome;
    auto operator<=>(const Key&) const = default;
  };
  Evaluator* inner_;
  std::uint64_t space_hash_;
  std::map<Key, double> cache_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

struct OracleResult {
  Genome genome;
  double fitness = 0.0;
  std::uint64_t evaluated = 0;
};

/// Exhaustive maximum over the joint space; ties go to the lexicographically
/// smallest genome (backbone genes first). Throws CardinalityError over `cap`.
OracleResult oracle_best(const DetectionSearchSpace& space, Evaluator& evaluator,
                         std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace elastic

#endif  // ELASTIC_EVALUATOR_HPP
