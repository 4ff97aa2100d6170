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

#include <filesystem>
#include <fstream>

#include <doctest.h>
#include <json.hpp>

#include "elastic/errors.hpp"
#include "elastic/external_evaluator.hpp"
#include "generators.hpp"

using namespace elastic;
using namespace elastic::testing;

namespace {

std::string fake(const std::string& mode, std::uint64_t seed = 42, const std::string& log = "") {
  std::string cmd = std::string(FAKE_EVALUATOR) + " " + mode + " " + std::to_string(seed);
  if (!log.empty()) cmd += " " + log;
  return cmd;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const EvaluatorError& e) {
    return e.what();
  }
  return "<no error>";
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

std::filesystem::path temp_log(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("elastic_proto_" + std::to_string(::getpid()) + "_" + name + ".log");
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST_SUITE("protocol") {

TEST_CASE("message encoding") {
  CHECK(protocol::hello_message(0xabcULL) ==
        R"({"space_hash":"0000000000000abc","type":"hello","version":1})");
  Genome g;
  g.set({ModuleId::backbone, {1, 0}});
  g.set({ModuleId::head, {2}});
  const auto eval = nlohmann::json::parse(protocol::eval_message(7, g));
  CHECK(eval.at("type") == "eval");
  CHECK(eval.at("id") == 7);
  CHECK(eval.at("genome").dump() == R"({"backbone":[1,0],"head":[2]})");
  CHECK(nlohmann::json::parse(protocol::shutdown_message()).at("type") == "shutdown");
}

TEST_CASE("reply validation") {
  CHECK_NOTHROW(protocol::check_hello(
      R"({"type":"hello","version":1,"space_hash":"0000000000000abc","extra":true})", 0xabc));
  CHECK_THROWS_AS(
      protocol::check_hello(R"({"type":"hello","version":2,"space_hash":"0000000000000abc"})",
                            0xabc),
      EvaluatorError);
  CHECK(error_of([] {
          protocol::check_hello(R"({"type":"hello","version":1,"space_hash":"0000000000000abd"})",
                                0xabc);
        }).find("space_hash") != std::string::npos);

  const auto r = protocol::parse_result(R"({"type":"result","id":3,"fitness":0.25,"x":[]})");
  CHECK(r.id == 3);
  CHECK(r.fitness == 0.25);
  CHECK_NOTHROW(protocol::parse_result(R"({"type":"result","id":3,"fitness":1.0})"));
  CHECK_NOTHROW(protocol::parse_result(R"({"type":"result","id":3,"fitness":0})"));
  for (const char* bad : {R"(not json)", R"({"type":"result","id":3,"fitness":1.0000001})",
                          R"({"type":"result","id":3,"fitness":-0.5})",
                          R"({"type":"result","id":3,"fitness":NaN})",
                          R"({"type":"result","id":-3,"fitness":0.5})",
                          R"({"type":"result","id":3,"fitness":"0.5"})",
                          R"({"type":"hello","id":3,"fitness":0.5})",
                          R"({"type":"error","message":"boom"})", R"([1,2])"}) {
    const auto msg = error_of([&] { protocol::parse_result(bad); });
    CHECK_MESSAGE(msg.find(bad) != std::string::npos, msg);
  }
}

TEST_CASE("external synthetic evaluator is bit-identical to the built-in landscape") {
  const auto space = shipped_space("tiny.json");
  ExternalEvaluator ext(fake("synthetic", 42), space);
  SyntheticEvaluator local(space, 42);
  const auto all = enumerate(space);
  CHECK(ext.evaluate(all) == local.evaluate(all));
  CHECK(ext.id() == "external:" + fake("synthetic", 42));
}

TEST_CASE("responses out of order are matched by id") {
  const auto space = shipped_space("ssd_tiny.json");
  const auto all = enumerate(space);
  const std::vector<Genome> batch(all.begin(), all.begin() + 37);
  SyntheticEvaluator local(space, 9);
  const auto expected = local.evaluate(batch);
  for (int window : {1, 3, 8, 64}) {
    ExternalEvaluator ext(fake("shuffle", 9), space, window);
    CHECK(ext.evaluate(batch) == expected);
  }
}

TEST_CASE("ids increase strictly across batches and shutdown is sent") {
  const auto space = shipped_space("tiny.json");
  const auto log = temp_log("ids");
  {
    ExternalEvaluator ext(fake("synthetic", 42, log.string()), space, 4);
    const auto all = enumerate(space);
    ext.evaluate(all);
    ext.evaluate(all);
    CHECK(ext.requests_sent() == 32);
    ext.shutdown();
    ext.shutdown();
  }
  const auto lines = read_lines(log);
  REQUIRE(lines.size() == 34);
  CHECK(nlohmann::json::parse(lines.front()).at("type") == "hello");
  CHECK(nlohmann::json::parse(lines.back()).at("type") == "shutdown");
  std::uint64_t last = 0;
  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    const auto id = nlohmann::json::parse(lines[i]).at("id").get<std::uint64_t>();
    CHECK(id > last);
    last = id;
  }
  std::filesystem::remove(log);
}

TEST_CASE("constant evaluator: oracle falls back to lexicographic order") {
  const auto space = shipped_space("tiny.json");
  ExternalEvaluator ext(fake("constant"), space);
  const auto r = oracle_best(space, ext);
  CHECK(r.fitness == 0.5);
  CHECK(r.genome.flat() == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("hash mismatch fails the handshake before any evaluation") {
  const auto space = shipped_space("tiny.json");
  const auto log = temp_log("hash");
  const auto msg = error_of([&] { ExternalEvaluator ext(fake("badhash", 42, log.string()), space); });
  CHECK(msg.find("space_hash mismatch") != std::string::npos);
  CHECK(read_lines(log).size() == 1);
  std::filesystem::remove(log);
}

TEST_CASE("protocol violations abort with the offending line") {
  const auto space = shipped_space("tiny.json");
  const auto all = enumerate(space);
  struct Case {
    const char* mode;
    const char* needle;
  };
  for (const Case c : {Case{"badjson", "\"fitness\":"}, Case{"range", "1.5"},
                       Case{"nan", "NaN"}, Case{"unknown", "unknown id 1000001"},
                       Case{"exit", "exited"}}) {
    CAPTURE(c.mode);
    ExternalEvaluator ext(fake(c.mode), space, 1);
    const auto msg = error_of([&] { ext.evaluate(all); });
    CHECK_MESSAGE(msg.find(c.needle) != std::string::npos, msg);
  }
  CHECK(error_of([&] { ExternalEvaluator ext(fake("silent"), space); })
            .find("before the handshake") != std::string::npos);
  CHECK(error_of([&] { ExternalEvaluator ext("exec /nonexistent/evaluator", space); })
            .find("before the handshake") != std::string::npos);
}

TEST_CASE("caching in front of an external evaluator avoids repeat requests") {
  const auto space = shipped_space("tiny.json");
  ExternalEvaluator ext(fake("synthetic", 42), space);
  CachingEvaluator cache(ext, space.space_hash());
  const auto all = enumerate(space);
  const auto a = cache.evaluate(all);
  CHECK(ext.requests_sent() == 16);
  CHECK(cache.evaluate(all) == a);
  CHECK(ext.requests_sent() == 16);
}

}  // TEST_SUITE
