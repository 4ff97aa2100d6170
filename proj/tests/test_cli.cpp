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

// Drives the elastic-nas executable as a subprocess.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <doctest.h>
#include <json.hpp>

#include "elastic/cost_model.hpp"
#include "elastic/errors.hpp"
#include "elastic/run_config.hpp"
#include "generators.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace elastic;
using namespace elastic::testing;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Result cli(const std::string& args) {
  const std::string cmd = quote(ELASTIC_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// Scratch directory removed at scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() /
             ("elastic_cli_" + std::to_string(::getpid()) + "_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

std::string space_arg(const std::string& name) {
  return "--space " + quote((spaces_dir() / name).string());
}

const std::string kGolden =
    space_arg("ssd_tiny.json") + " --evaluator synthetic:42 --seed 7 --budget-device max78000";

std::string fake(const std::string& mode) {
  return quote(std::string("external:") + FAKE_EVALUATOR + " " + mode + " 42");
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("search populates the run directory with a feasible best genome") {
  TempDir tmp("search");
  const auto run = tmp / "run1";
  const auto r = cli("search " + kGolden + " --out " + quote(run));
  REQUIRE(r.code == 0);
  for (const char* f : {"config.json", "history.csv", "checkpoint.json", "best_genome.json",
                        "convergence.json"})
    CHECK(fs::exists(fs::path(run) / f));

  const auto space = shipped_space("ssd_tiny.json");
  const auto best = read_json(fs::path(run) / "best_genome.json");
  const Genome g = genome_from_json(best.at("genome"));
  const auto budget = device_budget(find_profile("max78000"), space.module_ids());
  CHECK(check_budget(estimate(space, g, 1), budget).feasible);
  CHECK(best.at("feasible") == true);
  for (const char* f : {"config.json", "best_genome.json", "convergence.json"}) {
    const auto doc = read_json(fs::path(run) / f);
    CHECK(doc.at("version") == 1);
    CHECK(doc.at("space_hash") == hex64(space.space_hash()));
  }
  const auto frozen = frozen_from_json(read_json(fs::path(run) / "config.json"));
  CHECK(frozen.schedule.seed == 7);
  CHECK(frozen.evaluator == "synthetic:42");
  CHECK(frozen.budget == budget);

  SUBCASE("a non-empty output directory is refused") {
    const auto before = slurp(fs::path(run) / "history.csv");
    CHECK(cli("search " + kGolden + " --out " + quote(run)).code == 1);
    CHECK(slurp(fs::path(run) / "history.csv") == before);
  }
  SUBCASE("repeat runs and worker counts give byte-identical history") {
    CHECK(cli("search " + kGolden + " --out " + quote(tmp / "run2")).code == 0);
    CHECK(cli("search " + kGolden + " --workers 4 --out " + quote(tmp / "run4")).code == 0);
    const auto h1 = slurp(fs::path(run) / "history.csv");
    CHECK(h1 == slurp(fs::path(tmp / "run2") / "history.csv"));
    CHECK(h1 == slurp(fs::path(tmp / "run4") / "history.csv"));
  }
  SUBCASE("resume of a completed run is a no-op") {
    const auto before = slurp(fs::path(run) / "checkpoint.json");
    CHECK(cli("resume --run " + quote(run)).code == 0);
    CHECK(slurp(fs::path(run) / "checkpoint.json") == before);
  }
  SUBCASE("extract-best agrees with the recorded best") {
    const auto r2 = cli("extract-best --run " + quote(run));
    REQUIRE(r2.code == 0);
    const auto doc = json::parse(r2.out);
    CHECK(doc.at("genome") == best.at("genome"));
    CHECK(doc.at("fitness") == best.at("fitness"));
  }
  SUBCASE("stats conditioned on the run's best genome") {
    const auto out = tmp / "stats";
    const auto r2 = cli("stats " + space_arg("ssd_tiny.json") +
                        " --evaluator synthetic:42 --n 6 --fix-from " +
                        quote(fs::path(run) / "best_genome.json") + " --module head --out " +
                        quote(out));
    REQUIRE(r2.code == 0);
    const auto stats = slurp(fs::path(out) / "stats.csv");
    std::istringstream lines(stats);
    std::string header, row, extra;
    std::getline(lines, header);
    std::getline(lines, row);
    CHECK_FALSE(std::getline(lines, extra));
    std::string label = "fixed:backbone=";
    for (std::size_t i = 0; i < best.at("genome").at("backbone").size(); ++i)
      label += (i ? "-" : "") + best.at("genome").at("backbone")[i].dump();
    CHECK(row.rfind(label + ",6,", 0) == 0);
  }
}

TEST_CASE("stopping and resuming matches an uninterrupted run") {
  TempDir tmp("stop");
  const auto straight = tmp / "straight";
  const auto split = tmp / "split";
  REQUIRE(cli("search " + kGolden + " --out " + quote(straight)).code == 0);
  REQUIRE(cli("search " + kGolden + " --stop-after 12 --out " + quote(split)).code == 0);
  CHECK_FALSE(fs::exists(fs::path(split) / "best_genome.json"));
  CHECK(read_json(fs::path(split) / "checkpoint.json").at("generations_done") == 12);
  REQUIRE(cli("resume --run " + quote(split) + " --stop-after 20 --workers 3").code == 0);
  REQUIRE(cli("resume --run " + quote(split)).code == 0);
  for (const char* f : {"history.csv", "best_genome.json", "convergence.json"})
    CHECK(slurp(fs::path(split) / f) == slurp(fs::path(straight) / f));
}

TEST_CASE("a killed search resumes to the uninterrupted result") {
  TempDir tmp("kill");
  const auto reference = tmp / "reference";
  const auto victim = tmp / "victim";
  const std::string args = space_arg("ssd_tiny.json") + " --seed 7 --budget-device max78000";
  REQUIRE(cli("search " + args + " --evaluator " + fake("synthetic") + " --out " +
              quote(reference))
              .code == 0);

  const std::string cmd = "exec " + quote(ELASTIC_CLI) + " search " + args + " --evaluator " +
                          fake("slow") + " --out " + quote(victim) + " 2>/dev/null";
  const pid_t pid = ::fork();
  if (pid == 0) {
    ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  const auto ckpt = fs::path(victim) / "checkpoint.json";
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
  std::uint64_t seen = 0;
  while (std::chrono::steady_clock::now() < deadline) {
    if (fs::exists(ckpt)) {
      seen = read_json(ckpt).at("generations_done").get<std::uint64_t>();
      if (seen >= 3) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ::kill(pid, SIGKILL);
  int status = 0;
  ::waitpid(pid, &status, 0);
  REQUIRE(WIFSIGNALED(status));
  const auto at_kill = read_json(ckpt).at("generations_done").get<std::uint64_t>();
  CHECK(at_kill >= 3);
  CHECK(at_kill < 55);
  CHECK_FALSE(fs::exists(fs::path(victim) / "best_genome.json"));

  REQUIRE(cli("resume --run " + quote(victim)).code == 0);
  for (const char* f : {"history.csv", "best_genome.json", "convergence.json"})
    CHECK(slurp(fs::path(victim) / f) == slurp(fs::path(reference) / f));
}

TEST_CASE("resume refuses edited or missing inputs") {
  TempDir tmp("refuse");
  const auto space_copy = tmp / "space.json";
  fs::copy_file(spaces_dir() / "ssd_tiny.json", space_copy);
  const auto run = tmp / "run";
  REQUIRE(cli("search --space " + quote(space_copy) +
              " --evaluator synthetic:42 --seed 7 --budget-device max78000 --stop-after 4 --out " +
              quote(run))
              .code == 0);
  const auto config = fs::path(run) / "config.json";
  const auto original = slurp(config);

  SUBCASE("edited config.json") {
    auto doc = json::parse(original);
    doc["evolution"]["mutation_prob"] = 0.3;
    std::ofstream(config) << doc.dump(2);
    CHECK(cli("resume --run " + quote(run)).code == 1);
    doc = json::parse(original);
    doc["evaluator"] = "synthetic:43";
    std::ofstream(config) << doc.dump(2);
    CHECK(cli("resume --run " + quote(run)).code == 1);
  }
  SUBCASE("edited space file") {
    auto doc = read_json(space_copy);
    doc["modules"]["head"]["axes"][0]["choices"][0] = 12;
    std::ofstream(space_copy) << doc.dump();
    CHECK(cli("resume --run " + quote(run)).code == 1);
  }
  SUBCASE("missing checkpoint") {
    fs::remove(fs::path(run) / "checkpoint.json");
    CHECK(cli("resume --run " + quote(run)).code == 1);
  }
  SUBCASE("untouched run resumes") {
    CHECK(cli("resume --run " + quote(run)).code == 0);
  }
}

TEST_CASE("estimate") {
  TempDir tmp("estimate");
  std::ofstream(tmp / "unit.json") << R"({"backbone":[0,0]})";
  const auto r = cli("estimate " + space_arg("unit.json") + " --genome " + quote(tmp / "unit.json") +
                     " --json");
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc.at("params") == 2);
  CHECK(doc.at("macs") == 1);
  for (const char* key : {"weight_bytes", "peak_activation_bytes", "layer_count", "max_channels",
                          "per_module"})
    CHECK(doc.contains(key));

  // A genome of mbv2_small that does not fit the MAX78000.
  const auto space = shipped_space("mbv2_small.json");
  const auto budget = device_budget(find_profile("max78000"), space.module_ids());
  Rng rng(5);
  Genome big;
  for (int i = 0; i < 10000; ++i) {
    Genome g;
    for (const auto& [id, ms] : space.modules()) g.set(sample_random(ms, rng));
    if (!check_budget(estimate(space, g, 1), budget).feasible) {
      big = g;
      break;
    }
  }
  REQUIRE_FALSE(big.parts().empty());
  std::ofstream(tmp / "big.json") << genome_to_json(big).dump();
  const auto r2 = cli("estimate " + space_arg("mbv2_small.json") + " --genome " +
                      quote(tmp / "big.json") + " --budget-device max78000 --json");
  CHECK(r2.code == 2);
  CHECK(json::parse(r2.out).at("feasible") == false);
  CHECK(cli("estimate " + space_arg("mbv2_small.json") + " --genome " + quote(tmp / "unit.json"))
            .code == 1);
}

TEST_CASE("stats") {
  TempDir tmp("stats");
  const auto r = cli("stats " + space_arg("ssd_tiny.json") +
                     " --evaluator synthetic:42 --condition joint --n 100 --seed 3 --out " +
                     quote(tmp / "joint"));
  REQUIRE(r.code == 0);
  const auto text = slurp(fs::path(tmp / "joint") / "stats.csv");
  CHECK(text.rfind("condition,n,mean,std,variance\njoint,100,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(cli("stats " + space_arg("ssd_tiny.json") + " --evaluator synthetic:42 --n 1 --out " +
            quote(tmp / "one"))
            .code == 1);
  CHECK(cli("stats " + space_arg("ssd_tiny.json") +
            " --evaluator synthetic:42 --condition conditioned --out " + quote(tmp / "x"))
            .code == 1);
}

TEST_CASE("oracle") {
  const auto r = cli("oracle " + space_arg("tiny.json") + " --evaluator synthetic:42");
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc.at("fitness").get<double>() == 0.67150498496073163);
  CHECK(doc.at("genome").at("backbone") == json::array({1, 0}));
  CHECK(doc.at("genome").at("head") == json::array({0, 1}));
  CHECK(doc.at("evaluated") == 16);
  const auto one = cli("oracle " + space_arg("unit.json") + " --evaluator synthetic:1");
  REQUIRE(one.code == 0);
  CHECK(json::parse(one.out).at("evaluated") == 1);
  CHECK(cli("oracle " + space_arg("tiny.json") + " --evaluator synthetic:42 --cap 10").code == 1);
}

TEST_CASE("exit codes and configuration precedence") {
  TempDir tmp("codes");
  CHECK(cli("search " + space_arg("tiny.json") + " --evaluator bogus --tau-total 100000 --out " +
            quote(tmp / "a"))
            .code == 1);
  CHECK(cli("search " + space_arg("tiny.json") + " --evaluator synthetic:1 --out " +
            quote(tmp / "b"))
            .code == 1);  // no budget
  CHECK(cli("search " + space_arg("tiny.json") + " --evaluator synthetic:1 --tau-total 1 --out " +
            quote(tmp / "c"))
            .code == 2);
  CHECK(cli("search " + space_arg("tiny.json") + " --evaluator " + fake("badhash") +
            " --tau-total 100000 --out " + quote(tmp / "d"))
            .code == 3);
  CHECK(cli("search --bogus-flag").code == 1);
  CHECK(cli("").code == 1);

  const auto help = cli("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("protocol, version 1") != std::string::npos);

  std::ofstream(tmp / "cfg.json") << json{{"space", (spaces_dir() / "tiny.json").string()},
                                          {"evaluator", "synthetic:5"},
                                          {"seed", 7},
                                          {"tau_total", 100000},
                                          {"evolution", {{"population_size", 12}}},
                                          {"schedule", {{"total_generation_budget", 8}}}}
                                         .dump();
  REQUIRE(cli("search --config " + quote(tmp / "cfg.json") + " --seed 9 --population 10 --out " +
              quote(tmp / "e"))
              .code == 0);
  const auto frozen = frozen_from_json(read_json(fs::path(tmp / "e") / "config.json"));
  CHECK(frozen.schedule.seed == 9);
  CHECK(frozen.evolution.population_size == 10);
  CHECK(frozen.schedule.total_generation_budget == 8);
  CHECK(frozen.evaluator == "synthetic:5");
  CHECK(frozen.budget.tau_total == 100000);
  CHECK(frozen.budget.tau_per_module.at(ModuleId::backbone) == 50000);
  CHECK(frozen.evolution.mutation_prob == EvolutionConfig{}.mutation_prob);

  std::ofstream(tmp / "bad.json") << R"({"population": 3})";
  CHECK(cli("search --config " + quote(tmp / "bad.json") + " --out " + quote(tmp / "f")).code ==
        1);
}

TEST_CASE("budget inputs and run-config round trip") {
  const auto space = shipped_space("ssd_tiny.json");
  BudgetInputs in;
  CHECK_THROWS_AS(in.resolve(space), ConfigError);
  in.tau_total = 1000;
  auto b = in.resolve(space);
  CHECK(b.bytes_per_weight == 4);
  CHECK(b.tau_per_module.at(ModuleId::backbone) == 500);
  CHECK(b.tau_per_module.at(ModuleId::head) == 500);
  in.tau_head = 200;
  CHECK(in.resolve(space).tau_per_module.at(ModuleId::head) == 200);
  in.tau_head = 900;
  CHECK_THROWS_AS(in.resolve(space), ConfigError);  // 500 + 900 > 1000

  BudgetInputs dev;
  dev.device = "max78000";
  CHECK(dev.resolve(space) == device_budget(find_profile("max78000"), space.module_ids()));
  dev.tau_backbone = 1000;
  CHECK(dev.resolve(space).tau_per_module.at(ModuleId::backbone) == 1000);
  CHECK(dev.resolve(space).bytes_per_weight == 1);

  RunConfig cfg;
  cfg.space_path = spaces_dir() / "ssd_tiny.json";
  cfg.budget = dev;
  cfg.schedule.seed = 11;
  const auto frozen = freeze(cfg, space);
  CHECK(frozen_from_json(frozen_to_json(frozen)) == frozen);
  auto j = frozen_to_json(frozen);
  j["version"] = 2;
  CHECK_THROWS_AS(frozen_from_json(j), ConfigError);

  CHECK(make_evaluator("synthetic:42", space, 2, 8)->id() == "synthetic:42");
  for (const char* bad : {"synthetic:", "synthetic:x1", "synthetic:-1", "external:", "grid"})
    CHECK_THROWS_AS(make_evaluator(bad, space, 1, 8), ConfigError);
}

}  // TEST_SUITE
