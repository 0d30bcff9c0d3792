#pragma once

#include <stdexcept>
#include <string>

namespace rsm {

// Error categories map one-to-one onto CLI exit codes:
//   input -> 1, convergence/numeric -> 2, invariant -> 3.
enum class ErrorKind { input, convergence, numeric, invariant };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::invariant: return "invariant";
  }
  return "unknown";
}

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return 1;
    case ErrorKind::convergence:
    case ErrorKind::numeric: return 2;
    case ErrorKind::invariant: return 3;
  }
  return 3;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what) : Error(ErrorKind::invariant, what) {}
};

// Thrown when an iterative solver exhausts its budget. Solvers that can
// return a usable iterate derive from this and attach it.
class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error(ErrorKind::convergence, what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InputError(what);
}

}  // namespace rsm
