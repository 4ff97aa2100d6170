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

// Client for out-of-process evaluators speaking line-delimited JSON over the
// child's stdin/stdout:
//
//   engine -> {"type":"hello","version":1,"space_hash":"<hex16>"}
//   child  -> {"type":"hello","version":1,"space_hash":"<hex16>"}   (must match)
//   engine -> {"type":"eval","id":<u64>,"genome":{"backbone":[...],"head":[...]}}
//   child  -> {"type":"result","id":<u64>,"fitness":<float in [0,1]>}
//   engine -> {"type":"shutdown"}
//
// Genomes carry choice indices. Ids increase strictly over the life of the
// session; responses may arrive in any order. Unknown fields are ignored.

#ifndef ELASTIC_EXTERNAL_EVALUATOR_HPP
#define ELASTIC_EXTERNAL_EVALUATOR_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "elastic/evaluator.hpp"

namespace elastic {

inline constexpr int kProtocolVersion = 1;

namespace protocol {

std::string hello_message(std::uint64_t space_hash);
std::string eval_message(std::uint64_t id, const Genome& genome);
std::string shutdown_message();

/// Validates a hello reply; throws EvaluatorError on any mismatch.
void check_hello(const std::string& line, std::uint64_t space_hash);

struct Result {
  std::uint64_t id = 0;
  double fitness = 0.0;
};
/// Parses a result line; throws EvaluatorError (quoting the line) on bad JSON,
/// a wrong type, an `error` reply, or a fitness outside [0, 1] / NaN.
Result parse_result(const std::string& line);

}  // namespace protocol

/// Bidirectional pipe to `/bin/sh -c <command>`.
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  void write_line(const std::string& line);
  /// Next line without the newline, or nullopt at end of stream.
  std::optional<std::string> read_line();
  void close_input();
  /// Waits up to `grace_ms`, then kills. Returns the wait status.
  int wait(int grace_ms = 2000);
  bool running() const noexcept { return pid_ > 0; }

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  int status_ = 0;
};

class ExternalEvaluator final : public Evaluator {
 public:
  /// Spawns the process and performs the handshake.
  ExternalEvaluator(std::string command, const DetectionSearchSpace& space, int window = 8);
  ~ExternalEvaluator() override;

  std::string id() const override { return "external:" + command_; }
  std::vector<double> evaluate(std::span<const Genome> batch) override;

  /// Sends shutdown and reaps the child. Idempotent.
  void shutdown();
  std::uint64_t requests_sent() const noexcept { return next_id_ - 1; }

 private:
  std::string command_;
  int window_;
  std::uint64_t next_id_ = 1;
  std::unique_ptr<ChildProcess> child_;
};

}  // namespace elastic

#endif  // ELASTIC_EXTERNAL_EVALUATOR_HPP
