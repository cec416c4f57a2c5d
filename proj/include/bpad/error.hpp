#pragma once

#include <stdexcept>
#include <string>

namespace bpad {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data: unparsable files, schema violations, inconsistent labels.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Parse failure with a position (line number or element path) in the source.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, const std::string& position, const std::string& what)
      : DataError(source + ":" + position + ": " + what), position_(position) {}

  const std::string& position() const { return position_; }

 private:
  std::string position_;
};

/// Invalid configuration or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Random model generation could not satisfy its constraints.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during training (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace bpad
