#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dyna {

// Base for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// An experiment description is malformed or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Cholesky failed even after the maximum jitter escalation.
class SingularHessianError : public Error {
 public:
  using Error::Error;
};

// Backtracking exhausted its trial budget without sufficient decrease.
class StalledStepError : public Error {
 public:
  using Error::Error;
};

// Measured decrement at a stage start exceeded the abort threshold.
class HandoverViolation : public Error {
 public:
  HandoverViolation(int stage, double lambda, double eta, double limit);
  int stage() const noexcept { return stage_; }
  double lambda() const noexcept { return lambda_; }
  double eta() const noexcept { return eta_; }

 private:
  int stage_;
  double lambda_;
  double eta_;
};

}  // namespace dyna
