#pragma once

#include <stdexcept>
#include <string>

namespace fairppm {

// Root of every error thrown by the library. The CLI maps subclasses onto
// exit codes, so new error kinds should derive from the closest category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration or schema problems: missing columns, bad keys, invalid ranges.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class SpecError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// A malformed input row. `line` is 1-based and counts the header.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// An expected input file (dataset split, checkpoint, encoder) is absent or unreadable.
class ArtifactError : public Error {
 public:
  using Error::Error;
};

// A metric cannot be computed for the given data, e.g. an empty group.
class UndefinedMetricError : public Error {
 public:
  UndefinedMetricError(std::string metric, const std::string& why)
      : Error(metric + " is undefined: " + why), metric_(std::move(metric)) {}
  const std::string& metric() const { return metric_; }

 private:
  std::string metric_;
};

}  // namespace fairppm
