#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace faag {

// Every failure surfaced by the library carries one of these codes. The CLI
// maps them one-to-one onto process exit codes (see exit_code()).
enum class ErrorCode {
  kInvalidInput = 1,
  kIo,
  kUnsupportedFormat,
  kSilentAudio,
  kLengthMismatch,
  kRateMismatch,
  kTooShort,
  kShapeMismatch,
  kInvalidDim,
  kDimMismatch,
  kFormatVersionMismatch,
  kChecksumMismatch,
  kUnalignable,
  kEmptyLogits,
  kTooLarge,
  kDivergence,
  kPhraseTooLong,
  kAudioTooShort,
  kNonFiniteLoss,
  kEmptyTarget,
};

std::string_view error_name(ErrorCode code);

// Process exit code used by the CLI for a given error: 10 + enum value.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace faag
