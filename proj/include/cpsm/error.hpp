#pragma once

#include <stdexcept>
#include <string>

namespace cpsm {

enum class ErrorKind { Validation, Numerical, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Bad shapes, bad labels, out-of-range configuration values.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string &what)
      : Error(ErrorKind::Validation, what) {}
};

/// Non-finite values produced or consumed by a numerical routine.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string &what)
      : Error(ErrorKind::Numerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string &what) : Error(ErrorKind::Io, what) {}
};

/// Process exit code for an error class: 2 validation, 3 numerical, 4 I/O.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation:
      return 2;
    case ErrorKind::Numerical:
      return 3;
    case ErrorKind::Io:
      return 4;
  }
  return 1;
}

}  // namespace cpsm
