#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace t2sgrid {

enum class Errc {
  kNoFrames,
  kResolutionMismatch,
  kDecodeError,
  kInvalidTarget,
  kParseError,
  kInvalidStride,
  kPlanMismatch,
  kCellOutOfRange,
  kInvalidCell,
  kInvalidGeometry,
  kInvalidModel,
  kEmptyPrompt,
  kEmptyQuery,
  kMissingVideo,
  kBackendError,
  kTimeoutError,
  kParseFailure,
  kInvalidSequence,
  kUnitMismatch,
  kDuplicateSample,
  kIoError,
  kSchemaError,
  kConfigError,
};

std::string_view to_string(Errc code);

// Every failure surfaced by the library is an Error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace t2sgrid
