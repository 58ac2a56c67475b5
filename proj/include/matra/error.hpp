#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace matra {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input that is well-formed but violates a data contract.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value; `field` names the offending setting.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A character outside the script block of the declared language.
class ScriptError : public Error {
 public:
  ScriptError(const std::string& what, std::u32string::value_type offending)
      : Error(what), offending_(offending) {}
  char32_t offending() const noexcept { return offending_; }

 private:
  char32_t offending_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace matra
