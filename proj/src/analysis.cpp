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

#include "elastic/analysis.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "elastic/controller.hpp"
#include "elastic/errors.hpp"

namespace elastic {

std::string condition_label(const SamplingRequest& request) {
  if (request.label) return *request.label;
  if (!request.sampled_module || !request.fixed_complement) return "joint";
  std::string label = "fixed:";
  bool first_module = true;
  for (const auto& [id, mg] : request.fixed_complement->parts()) {
    if (id == *request.sampled_module) continue;
    if (!first_module) label += ';';
    first_module = false;
    label += std::string(to_string(id)) + "=";
    for (std::size_t i = 0; i < mg.genes.size(); ++i) {
      if (i) label += '-';
      label += std::to_string(mg.genes[i]);
    }
  }
  return label;
}

MomentSummary moments(const std::vector<double>& values) {
  MomentSummary m;
  if (values.empty()) return m;
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - m.mean) * (v - m.mean);
  m.variance = sq / n;
  return m;
}

SamplingReport sample_stats(const DetectionSearchSpace& space, const SamplingRequest& req,
                            const ResourceBudget& budget, Evaluator& evaluator) {
  if (req.n < 2) throw ConfigError("sample_stats needs n >= 2");
  if (req.sampled_module) {
    if (!space.has_module(*req.sampled_module))
      throw ConfigError("space has no module " + std::string(to_string(*req.sampled_module)));
    if (!req.fixed_complement)
      throw ConfigError("conditioned sampling needs a fixed complement");
    for (ModuleId id : space.module_ids())
      if (id != *req.sampled_module && !req.fixed_complement->contains(id))
        throw ConfigError("fixed complement is missing module " + std::string(to_string(id)));
  }

  Rng rng(fold_hash(req.seed, {static_cast<std::uint64_t>(StreamPurpose::analysis)}));
  std::set<Genome> seen;
  std::vector<Genome> genomes;
  genomes.reserve(req.n);
  const std::size_t cap = req.max_attempts_per_sample * req.n;
  std::size_t attempts = 0;
  while (genomes.size() < req.n) {
    if (attempts++ >= cap)
      throw InfeasibleError("drew only " + std::to_string(genomes.size()) + " of " +
                            std::to_string(req.n) + " distinct feasible samples within " +
                            std::to_string(cap) + " attempts");
    Genome g;
    for (const auto& [id, ms] : space.modules()) {
      if (!req.sampled_module || id == *req.sampled_module) {
        g.set(sample_random(ms, rng));
      } else {
        g.set(req.fixed_complement->at(id));
      }
    }
    if (seen.contains(g)) continue;
    if (!check_budget(estimate(space, g, budget.bytes_per_weight), budget).feasible) continue;
    seen.insert(g);
    genomes.push_back(std::move(g));
  }
  require_valid(space, genomes.front());

  const std::vector<double> fitness = evaluator.evaluate(genomes);
  SamplingReport report;
  report.condition = condition_label(req);
  report.n = req.n;
  report.space_hash = space.space_hash();
  report.evaluator_id = evaluator.id();
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    require_fitness_range(fitness[i], evaluator.id());
    report.samples.push_back({i, fitness[i], genomes[i]});
  }
  const MomentSummary m = moments(fitness);
  report.mean = m.mean;
  report.variance = m.variance;
  report.std_dev = std::sqrt(m.variance);
  return report;
}

ComparisonTable compare_conditions(const std::vector<SamplingReport>& reports) {
  if (reports.size() < 2) throw ConfigError("compare_conditions needs at least two reports");
  const SamplingReport& base = reports.front();
  ComparisonTable table;
  for (const auto& r : reports) {
    if (r.space_hash != base.space_hash)
      throw ConfigError("report '" + r.condition + "' was sampled from a different space");
    if (r.evaluator_id != base.evaluator_id)
      throw ConfigError("report '" + r.condition + "' used a different evaluator");
    ComparisonRow row{r.condition, r.n, r.mean, r.variance, r.mean - base.mean, 1.0};
    if (base.variance > 0.0) {
      row.variance_ratio = r.variance / base.variance;
    } else {
      row.variance_ratio = r.variance == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// CSV.

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

namespace {

double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw ConfigError("bad number in CSV: " + s);
  return v;
}

std::string fmt(double v) {
  return std::isinf(v) ? std::string("inf") : format_double(v);
}

}  // namespace

std::string comparison_csv(const ComparisonTable& table) {
  std::ostringstream os;
  os << "condition,n,mean,variance,delta_mean,variance_ratio\n";
  for (const auto& r : table.rows)
    os << csv_field(r.condition) << ',' << r.n << ',' << fmt(r.mean) << ',' << fmt(r.variance)
       << ',' << fmt(r.delta_mean) << ',' << fmt(r.variance_ratio) << '\n';
  return os.str();
}

ComparisonTable parse_comparison_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "condition,n,mean,variance,delta_mean,variance_ratio")
    throw ConfigError("comparison CSV has an unexpected header");
  ComparisonTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw ConfigError("comparison CSV row has " + std::to_string(f.size()) +
                                         " fields: " + line);
    try {
      table.rows.push_back({f[0], static_cast<std::size_t>(std::stoull(f[1])), parse_double(f[2]),
                            parse_double(f[3]), parse_double(f[4]), parse_double(f[5])});
    } catch (const std::logic_error&) {
      throw ConfigError("bad number in comparison CSV row: " + line);
    }
  }
  return table;
}

std::string stats_csv(const std::vector<SamplingReport>& reports) {
  std::ostringstream os;
  os << "condition,n,mean,std,variance\n";
  for (const auto& r : reports)
    os << csv_field(r.condition) << ',' << r.n << ',' << format_double(r.mean) << ','
       << format_double(r.std_dev) << ',' << format_double(r.variance) << '\n';
  return os.str();
}

std::string samples_csv(const std::vector<SamplingReport>& reports) {
  std::ostringstream os;
  os << "condition,sample_idx,fitness,genome_json\n";
  for (const auto& r : reports)
    for (const auto& s : r.samples)
      os << csv_field(r.condition) << ',' << s.index << ',' << format_double(s.fitness) << ','
         << csv_field(genome_to_json(s.genome).dump()) << '\n';
  return os.str();
}

}  // namespace elastic
