#pragma once

#include <stdexcept>
#include <string>

namespace tmc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (tensor files, trace files, JSON configs). Carries a
// 1-based line number when one is known, 0 otherwise.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg, long line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_ = 0;
};

// Structurally well-formed input that violates an operation's contract.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Measured access counters disagree with the analytical model.
class ReconcileError : public Error {
 public:
  using Error::Error;
};

// A design-space search ended with an empty feasible set.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A file could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tmc
