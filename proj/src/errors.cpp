#include "mmfuse/errors.hpp"

namespace mmfuse {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kUnknownCategory: return "UnknownCategory";
    case ErrorKind::kMissingField: return "MissingField";
    case ErrorKind::kShapeError: return "ShapeError";
    case ErrorKind::kDegenerateCrop: return "DegenerateCrop";
    case ErrorKind::kOrphanImage: return "OrphanImage";
    case ErrorKind::kUnreadableFile: return "UnreadableFile";
    case ErrorKind::kEmptyClass: return "EmptyClass";
    case ErrorKind::kInsufficientFolds: return "InsufficientFolds";
    case ErrorKind::kSingleClass: return "SingleClass";
    case ErrorKind::kDivergence: return "DivergenceError";
    case ErrorKind::kUnknownLayer: return "UnknownLayer";
    case ErrorKind::kNonSpatialLayer: return "NonSpatialLayer";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kBatchMismatch: return "BatchMismatch";
    case ErrorKind::kNonFinite: return "NonFinite";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorKind kind, const std::string& message,
                    const std::vector<std::string>& details) {
  std::string out = std::string(error_kind_name(kind)) + ": " + message;
  for (const auto& d : details) out += "\n  " + d;
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message, std::vector<std::string> details)
    : std::runtime_error(compose(kind, message, details)),
      kind_(kind),
      message_(message),
      details_(std::move(details)) {}

}  // namespace mmfuse
