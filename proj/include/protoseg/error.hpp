#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace protoseg {

enum class ErrorCode {
  kEmptyClass,
  kDimMismatch,
  kIndexOutOfRange,
  kNonFinite,
  kEmptyInput,
  kUndefined,
  kPreconditionViolation,
  kTooFewUnits,
  kInvalidSpec,
  kMalformedHeader,
  kShapeOverflow,
  kTruncatedPayload,
  kUnsupportedDtype,
  kSchemaViolation,
  kDanglingReference,
  kIoFailure,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. The code identifies the failure
/// class; the optional detail carries the class index, field path, byte offset
/// or file path depending on the code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix that what() carries.
  const std::string& message() const noexcept { return message_; }

  /// Class index for kEmptyClass, byte offset for header/payload errors.
  std::optional<std::size_t> index() const noexcept { return index_; }
  Error& with_index(std::size_t index) {
    index_ = index;
    return *this;
  }

  /// Field path for kSchemaViolation, file path for kDanglingReference.
  const std::string& subject() const noexcept { return subject_; }
  Error& with_subject(std::string subject) {
    subject_ = std::move(subject);
    return *this;
  }

 private:
  ErrorCode code_;
  std::string message_;
  std::optional<std::size_t> index_;
  std::string subject_;
};

}  // namespace protoseg
