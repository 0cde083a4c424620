// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace scalaw {

/// Exit codes shared by the CLI and error JSON.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kData = 3,
  kNonConvergence = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
  virtual const char* kind() const noexcept = 0;
};

/// Bad flags, bad config values, out-of-range arguments.
class UsageError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
  const char* kind() const noexcept override { return "usage"; }
};

/// Malformed input rows, violated record invariants, insufficient data for an
/// operation.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
  const char* kind() const noexcept override { return "data"; }
};

/// Non-finite law evaluation (exp overflow).
class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
  const char* kind() const noexcept override { return "numeric"; }
};

}  // namespace scalaw
