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

#include "elastic/external_evaluator.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <map>
#include <thread>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "elastic/errors.hpp"

namespace elastic {

using nlohmann::json;

namespace protocol {

std::string hello_message(std::uint64_t space_hash) {
  return json{{"type", "hello"}, {"version", kProtocolVersion}, {"space_hash", hex64(space_hash)}}
      .dump();
}

std::string eval_message(std::uint64_t id, const Genome& genome) {
  return json{{"type", "eval"}, {"id", id}, {"genome", genome_to_json(genome)}}.dump();
}

std::string shutdown_message() { return json{{"type", "shutdown"}}.dump(); }

namespace {

json parse_line(const std::string& line) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw EvaluatorError("protocol violation (not an object): " + line);
    return j;
  } catch (const json::parse_error&) {
    throw EvaluatorError("protocol violation (bad JSON): " + line);
  }
}

}  // namespace

void check_hello(const std::string& line, std::uint64_t space_hash) {
  const json j = parse_line(line);
  if (j.value("type", "") != "hello")
    throw EvaluatorError("protocol violation (expected hello): " + line);
  if (!j.contains("version") || j.at("version") != kProtocolVersion)
    throw EvaluatorError("protocol version mismatch (engine speaks " +
                         std::to_string(kProtocolVersion) + "): " + line);
  const auto theirs = j.value("space_hash", "");
  if (theirs != hex64(space_hash))
    throw EvaluatorError("space_hash mismatch: engine " + hex64(space_hash) + ", evaluator " +
                         theirs);
}

Result parse_result(const std::string& line) {
  const json j = parse_line(line);
  const std::string type = j.value("type", "");
  if (type == "error") throw EvaluatorError("evaluator reported an error: " + line);
  if (type != "result") throw EvaluatorError("protocol violation (expected result): " + line);
  const auto id = j.find("id");
  const auto fit = j.find("fitness");
  if (id == j.end() || !id->is_number_unsigned())
    throw EvaluatorError("protocol violation (bad id): " + line);
  if (fit == j.end() || !fit->is_number())
    throw EvaluatorError("protocol violation (bad fitness): " + line);
  Result r{id->get<std::uint64_t>(), fit->get<double>()};
  if (!(r.fitness >= 0.0 && r.fitness <= 1.0))
    throw EvaluatorError("protocol violation (fitness outside [0, 1]): " + line);
  return r;
}

}  // namespace protocol

// ---------------------------------------------------------------------------

ChildProcess::ChildProcess(const std::string& command) {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0)
    throw EvaluatorError(std::string("pipe: ") + std::strerror(errno));
  // A dead child must surface as EPIPE, not kill the engine.
  std::signal(SIGPIPE, SIG_IGN);
  pid_ = ::fork();
  if (pid_ < 0) throw EvaluatorError(std::string("fork: ") + std::strerror(errno));
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ChildProcess::~ChildProcess() {
  close_input();
  if (pid_ > 0) wait(0);
  if (from_child_ >= 0) ::close(from_child_);
}

void ChildProcess::write_line(const std::string& line) {
  if (to_child_ < 0) throw EvaluatorError("evaluator input already closed");
  std::string data = line + "\n";
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(to_child_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw EvaluatorError("evaluator process exited (write failed: " +
                           std::string(std::strerror(errno)) + ")");
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

std::optional<std::string> ChildProcess::read_line() {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw EvaluatorError(std::string("read from evaluator: ") + std::strerror(errno));
    }
    if (n == 0) {
      if (buffer_.empty()) return std::nullopt;
      std::string line;
      line.swap(buffer_);
      return line;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void ChildProcess::close_input() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
}

int ChildProcess::wait(int grace_ms) {
  if (pid_ <= 0) return status_;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(grace_ms);
  for (;;) {
    const pid_t r = ::waitpid(pid_, &status_, WNOHANG);
    if (r == pid_ || (r < 0 && errno != EINTR)) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status_, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  pid_ = -1;
  return status_;
}

// ---------------------------------------------------------------------------

ExternalEvaluator::ExternalEvaluator(std::string command, const DetectionSearchSpace& space,
                                     int window)
    : command_(std::move(command)),
      window_(window < 1 ? 1 : window),
      child_(std::make_unique<ChildProcess>(command_)) {
  child_->write_line(protocol::hello_message(space.space_hash()));
  auto reply = child_->read_line();
  if (!reply) throw EvaluatorError("evaluator process exited before the handshake");
  protocol::check_hello(*reply, space.space_hash());
}

ExternalEvaluator::~ExternalEvaluator() {
  try {
    shutdown();
  } catch (...) {
  }
}

void ExternalEvaluator::shutdown() {
  if (!child_) return;
  try {
    child_->write_line(protocol::shutdown_message());
  } catch (const EvaluatorError&) {
  }
  child_->close_input();
  child_->wait();
  child_.reset();
}

std::vector<double> ExternalEvaluator::evaluate(std::span<const Genome> batch) {
  if (!child_) throw EvaluatorError("external evaluator already shut down");
  std::vector<double> out(batch.size());
  std::map<std::uint64_t, std::size_t> in_flight;  // request id -> batch index
  std::size_t next = 0;
  std::size_t done = 0;
  while (done < batch.size()) {
    while (next < batch.size() && in_flight.size() < static_cast<std::size_t>(window_)) {
      const std::uint64_t id = next_id_++;
      child_->write_line(protocol::eval_message(id, batch[next]));
      in_flight.emplace(id, next++);
    }
    auto line = child_->read_line();
    if (!line) {
      const int status = child_->wait(0);
      throw EvaluatorError("evaluator process exited with " +
                           std::to_string(in_flight.size()) + " requests outstanding (status " +
                           std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) + ")");
    }
    const auto result = protocol::parse_result(*line);
    auto it = in_flight.find(result.id);
    if (it == in_flight.end())
      throw EvaluatorError("protocol violation (unknown id " + std::to_string(result.id) +
                           "): " + *line);
    out[it->second] = result.fitness;
    in_flight.erase(it);
    ++done;
  }
  return out;
}

}  // namespace elastic
