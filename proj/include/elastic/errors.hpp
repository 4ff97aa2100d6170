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

#ifndef ELASTIC_ERRORS_HPP
#define ELASTIC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace elastic {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid space document. `path()` names the offending field,
/// e.g. `modules.backbone.axes[2].choices`.
class SpaceError : public Error {
 public:
  SpaceError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Invalid configuration, genome file, or usage of an API precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// No feasible architecture could be drawn within the attempt cap.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Enumeration refused because the space is larger than the cap.
class CardinalityError : public Error {
 public:
  using Error::Error;
};

/// External evaluator protocol violation or process failure.
class EvaluatorError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint version, digest, or space hash mismatch.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace elastic

#endif  // ELASTIC_ERRORS_HPP
