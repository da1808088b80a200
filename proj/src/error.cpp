#include "protoseg/error.hpp"

namespace protoseg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyClass: return "EmptyClass";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kUndefined: return "Undefined";
    case ErrorCode::kPreconditionViolation: return "PreconditionViolation";
    case ErrorCode::kTooFewUnits: return "TooFewUnits";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kShapeOverflow: return "ShapeOverflow";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kUnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kDanglingReference: return "DanglingReference";
    case ErrorCode::kIoFailure: return "IoFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

}  // namespace protoseg
