#pragma once

#include <stdexcept>
#include <string>

namespace emog {

// Exit codes shared by the CLI and anything that wants to map failures
// to process status.
enum class ExitCode : int {
  kOk = 0,
  kArgument = 2,
  kNumeric = 3,
  kIo = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const noexcept { return ExitCode::kArgument; }
};

/// Invalid argument or precondition violation.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes that do not fit together. The message names both shapes.
class DimensionError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class ConfigError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// A numeric routine failed (ill-conditioned input, failed square root...).
class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumeric; }
};

/// Training diverged or saw a non-finite value.
class TrainingError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A metric is undefined for its inputs (e.g. empty beat set).
class MetricError : public NumericError {
 public:
  using NumericError::NumericError;
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kIo; }
};

/// Malformed file contents. Carries the byte offset where parsing stopped.
class ParseError : public IoError {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace emog
