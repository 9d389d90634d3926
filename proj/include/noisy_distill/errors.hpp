#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace noisy_distill {

// Every failure surfaced by the library derives from Error so callers (the CLI
// in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or lengths disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A scalar argument is outside its domain (lambda, temperature, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// The data cannot support the request (empty split, no positives, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// An experiment or command configuration is invalid or incomplete.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A non-finite value appeared where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A named entity does not exist.
class LookupError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace noisy_distill
