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

#include "elastic/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "elastic/errors.hpp"

namespace elastic {

double Evaluator::evaluate_one(const Genome& g) {
  return evaluate(std::span<const Genome>(&g, 1)).at(0);
}

void require_fitness_range(double f, std::string_view source) {
  if (!std::isfinite(f) || f < 0.0 || f > 1.0)
    throw EvaluatorError(std::string(source) + ": fitness " + std::to_string(f) +
                         " is outside [0, 1]");
}

SyntheticLandscape::SyntheticLandscape(const DetectionSearchSpace& space, std::uint64_t seed)
    : seed_(seed) {
  for (const auto& [_, ms] : space.modules()) n_unary_ += ms.gene_count();
  if (space.has_module(ModuleId::backbone) && space.has_module(ModuleId::head)) {
    const std::size_t nb = space.module(ModuleId::backbone).gene_count();
    const std::size_t nh = space.module(ModuleId::head).gene_count();
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t j = 0; j < nh; ++j)
        if ((i + j) % 3 == 0) pairs_.emplace_back(i, j);
  }
}

double SyntheticLandscape::fitness(const Genome& g) const {
  // Summation order is fixed (unary terms by module then gene, then pairs) so
  // other implementations can reproduce the value bit-for-bit.
  double sum = 0.0;
  for (const auto& [id, mg] : g.parts()) {
    for (std::size_t i = 0; i < mg.genes.size(); ++i)
      sum += to_unit(fold_hash(seed_, {module_tag(id), i, static_cast<std::uint64_t>(mg.genes[i])}));
  }
  if (!pairs_.empty()) {
    const auto& b = g.at(ModuleId::backbone).genes;
    const auto& h = g.at(ModuleId::head).genes;
    double pair_sum = 0.0;
    for (const auto& [i, j] : pairs_)
      pair_sum += to_unit(fold_hash(seed_, {kPairTag, i, j, static_cast<std::uint64_t>(b[i]),
                                            static_cast<std::uint64_t>(h[j])}));
    sum += 2.0 * pair_sum;
  }
  return sum / static_cast<double>(n_unary_ + 2 * pairs_.size());
}

double synthetic_fitness(const DetectionSearchSpace& space, const Genome& genome,
                         std::uint64_t seed) {
  return SyntheticLandscape(space, seed).fitness(genome);
}

SyntheticEvaluator::SyntheticEvaluator(const DetectionSearchSpace& space, std::uint64_t seed,
                                       int workers)
    : landscape_(space, seed), workers_(std::max(1, workers)) {}

std::string SyntheticEvaluator::id() const {
  return "synthetic:" + std::to_string(landscape_.seed());
}

std::vector<double> SyntheticEvaluator::evaluate(std::span<const Genome> batch) {
  std::vector<double> out(batch.size());
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(workers_),
                                                    batch.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) out[i] = landscape_.fitness(batch[i]);
    return out;
  }
  std::vector<std::jthread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < batch.size(); i += workers)
        out[i] = landscape_.fitness(batch[i]);
    });
  }
  threads.clear();  // join
  return out;
}

std::vector<double> FunctionEvaluator::evaluate(std::span<const Genome> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& g : batch) out.push_back(fn_(g));
  return out;
}

std::vector<double> CachingEvaluator::evaluate(std::span<const Genome> batch) {
  const std::string eid = inner_->id();
  std::vector<double> out(batch.size());
  std::vector<Genome> misses;
  std::map<Genome, std::vector<std::size_t>> pending;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto it = cache_.find(Key{space_hash_, eid, batch[i]});
    if (it != cache_.end()) {
      out[i] = it->second;
      ++hits_;
      continue;
    }
    auto [slot, fresh] = pending.try_emplace(batch[i]);
    if (fresh) misses.push_back(batch[i]);
    slot->second.push_back(i);
  }
  if (!misses.empty()) {
    const auto values = inner_->evaluate(misses);
    if (values.size() != misses.size())
      throw EvaluatorError("evaluator " + eid + " returned " + std::to_string(values.size()) +
                           " results for " + std::to_string(misses.size()) + " genomes");
    for (std::size_t k = 0; k < misses.size(); ++k) {
      require_fitness_range(values[k], eid);
      for (std::size_t i : pending[misses[k]]) out[i] = values[k];
      cache_.emplace(Key{space_hash_, eid, misses[k]}, values[k]);
    }
    misses_ += misses.size();
  }
  return out;
}

OracleResult oracle_best(const DetectionSearchSpace& space, Evaluator& evaluator,
                         std::uint64_t cap) {
  GenomeEnumerator it(space, cap);
  constexpr std::size_t kChunk = 4096;
  OracleResult best;
  bool have = false;
  std::vector<Genome> chunk;
  auto flush = [&] {
    const auto values = evaluator.evaluate(chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      require_fitness_range(values[i], evaluator.id());
      // Enumeration is lexicographic, so strict > keeps the smallest on ties.
      if (!have || values[i] > best.fitness) {
        best.genome = chunk[i];
        best.fitness = values[i];
        have = true;
      }
    }
    best.evaluated += chunk.size();
    chunk.clear();
  };
  do {
    chunk.push_back(it.current());
    if (chunk.size() == kChunk) flush();
  } while (it.advance());
  if (!chunk.empty()) flush();
  return best;
}

}  // namespace elastic
