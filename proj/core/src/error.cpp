#include "drl/error.hpp"

namespace drl {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kEmptyCorpus: return "empty-corpus";
    case ErrorKind::kUnprojectable: return "unprojectable";
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kMetric: return "metric";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

}  // namespace drl
