// Copyright 2026 The dsv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace dsv {

// Base for every error the library raises. Callers that only need a
// diagnostic can catch this; the CLI maps it to a nonzero exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (bad label, empty input, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Inconsistent layer shapes, invalid config values, unknown config keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported file contents, including version mismatches.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Audio clip shorter than a single analysis frame.
class TooShortError : public Error {
 public:
  using Error::Error;
};

// Not enough speakers or material to draw the requested sample.
class SamplingError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training. `where` names the offending
// parameter, or is empty when the loss itself went non-finite; `step` is
// the epoch or iteration index.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::string where, long step)
      : Error(what), where_(std::move(where)), step_(step) {}

  const std::string& where() const noexcept { return where_; }
  long step() const noexcept { return step_; }

 private:
  std::string where_;
  long step_;
};

}  // namespace dsv
