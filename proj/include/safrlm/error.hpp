#pragma once

#include <stdexcept>
#include <string>

namespace safrlm {

enum class ErrorCode {
  validation,
  dimension,
  sequence_too_short,
  alignment_mismatch,
  configuration,
  shape,
  io,
  divergence,
};

/// Raised by every public entry point. The code classifies the failure so the
/// CLI can map it to an exit status; the message is meant for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Runtime failures (I/O, numerical divergence) as opposed to bad input.
  bool is_runtime() const noexcept {
    return code_ == ErrorCode::io || code_ == ErrorCode::divergence;
  }

 private:
  ErrorCode code_;
};

}  // namespace safrlm
