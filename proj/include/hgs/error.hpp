#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hgs {

// Base of every error the engine raises.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class RangeError : public Error {
public:
  using Error::Error;
};

// Bad generator or builder arguments.
class ParameterError : public Error {
public:
  using Error::Error;
};

// Caller broke an operation's precondition (shape mismatch, malformed batch).
class ContractError : public Error {
public:
  using Error::Error;
};

// Runtime feedback that cannot be used for rebalancing.
class MeasurementError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace hgs
