#include "t2sgrid/error.hpp"

namespace t2sgrid {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kNoFrames: return "NoFrames";
    case Errc::kResolutionMismatch: return "ResolutionMismatch";
    case Errc::kDecodeError: return "DecodeError";
    case Errc::kInvalidTarget: return "InvalidTarget";
    case Errc::kParseError: return "ParseError";
    case Errc::kInvalidStride: return "InvalidStride";
    case Errc::kPlanMismatch: return "PlanMismatch";
    case Errc::kCellOutOfRange: return "CellOutOfRange";
    case Errc::kInvalidCell: return "InvalidCell";
    case Errc::kInvalidGeometry: return "InvalidGeometry";
    case Errc::kInvalidModel: return "InvalidModel";
    case Errc::kEmptyPrompt: return "EmptyPrompt";
    case Errc::kEmptyQuery: return "EmptyQuery";
    case Errc::kMissingVideo: return "MissingVideo";
    case Errc::kBackendError: return "BackendError";
    case Errc::kTimeoutError: return "TimeoutError";
    case Errc::kParseFailure: return "ParseFailure";
    case Errc::kInvalidSequence: return "InvalidSequence";
    case Errc::kUnitMismatch: return "UnitMismatch";
    case Errc::kDuplicateSample: return "DuplicateSample";
    case Errc::kIoError: return "IoError";
    case Errc::kSchemaError: return "SchemaError";
    case Errc::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace t2sgrid
