#pragma once

#include <stdexcept>
#include <string>

namespace stemgen {

/// Broad failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
  invalid_argument = 2,
  io = 3,
  layout_mismatch = 4,
  malformed_data = 5,
  numerical = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::invalid_argument, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class LayoutMismatch : public Error {
 public:
  explicit LayoutMismatch(const std::string& what)
      : Error(ErrorKind::layout_mismatch, what) {}
};

class MalformedData : public Error {
 public:
  explicit MalformedData(const std::string& what)
      : Error(ErrorKind::malformed_data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

}  // namespace stemgen
