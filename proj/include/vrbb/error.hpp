#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vrbb {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string &what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedLabels : public Error {
 public:
  using Error::Error;
};

/// Zero probability mass where a positive one is required.
class DegenerateDistribution : public Error {
 public:
  using Error::Error;
};

/// A theory evaluator was asked for a value outside its domain. `margin`
/// carries the signed slack of the violated precondition.
class InfeasibleConfiguration : public Error {
 public:
  InfeasibleConfiguration(const std::string &what, double margin)
      : Error(what), margin_(margin) {}
  double margin() const noexcept { return margin_; }

 private:
  double margin_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vrbb
