#pragma once

#include <stdexcept>
#include <string>

namespace voxtrack {

enum class ErrorCode {
  PointBehindCamera,
  InvalidRay,
  NonFiniteLoss,
  InsufficientSurface,
  ImageTooSmall,
  OutOfBounds,
  TooFewVisible,
  Diverged,
  DegenerateConfiguration,
  TooFewCorrespondences,
  NoConsensus,
  ColdStartFailed,
  InvalidConfig,
  ObjectOutOfFrame,
  SpecParse,
  LengthMismatch,
  Io,
  Format,
};

const char* to_string(ErrorCode code);

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(int iteration, const std::string& what)
      : Error(ErrorCode::NonFiniteLoss, what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class SpecParseError : public Error {
 public:
  SpecParseError(int line, const std::string& what)
      : Error(ErrorCode::SpecParse, "line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace voxtrack
