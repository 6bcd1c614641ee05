#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace deepida {

enum class ErrorKind {
  InvalidInput,
  NumericalFailure,
  SingularMatrix,
  InvalidLabels,
  ShapeMismatch,
  InvalidSpec,
  InvalidBatch,
  InvalidTape,
  InvalidConfig,
  StratificationFailure,
  PairFailed,
  NoResults,
  InvalidSelection,
  IoError,
  ParseError,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable error class alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace deepida
