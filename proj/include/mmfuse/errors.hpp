#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmfuse {

enum class ErrorKind {
  kEmptyInput,
  kUnknownCategory,
  kMissingField,
  kShapeError,
  kDegenerateCrop,
  kOrphanImage,
  kUnreadableFile,
  kEmptyClass,
  kInsufficientFolds,
  kSingleClass,
  kDivergence,
  kUnknownLayer,
  kNonSpatialLayer,
  kConfigError,
  kBatchMismatch,
  kNonFinite,
  kIoError,
};

std::string_view error_kind_name(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can dispatch without string matching. `details` holds
// per-item messages when several problems are collected into one error.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::vector<std::string> details = {});

  ErrorKind kind() const noexcept { return kind_; }
  const std::vector<std::string>& details() const noexcept { return details_; }
  // The message without the kind prefix and detail lines.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
  std::vector<std::string> details_;
};

}  // namespace mmfuse
