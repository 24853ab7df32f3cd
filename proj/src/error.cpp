#include "faag/error.hpp"

namespace faag {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kSilentAudio: return "SilentAudio";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kRateMismatch: return "RateMismatch";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kInvalidDim: return "InvalidDim";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kUnalignable: return "Unalignable";
    case ErrorCode::kEmptyLogits: return "EmptyLogits";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kPhraseTooLong: return "PhraseTooLong";
    case ErrorCode::kAudioTooShort: return "AudioTooShort";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEmptyTarget: return "EmptyTarget";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) { return 10 + static_cast<int>(code); }

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

}  // namespace faag
