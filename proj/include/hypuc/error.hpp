#pragma once

#include <stdexcept>
#include <string>

namespace hypuc {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration (sizes, hyperparameters, flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a declared schema (e.g. series length).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Tensor/series length mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Fitting a model on unusable data (empty target set, single class, ...).
class FitError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

// Non-finite value encountered during optimisation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace hypuc
