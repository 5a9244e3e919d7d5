#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace drl {

enum class ErrorKind {
  kIo,               // unreadable or unwritable path
  kConfig,           // invalid configuration value or file
  kParse,            // malformed input record or serialized artifact
  kEmptyCorpus,      // preprocessing filtered every document
  kUnprojectable,    // document has no in-vocabulary tokens
  kInvalidArgument,  // precondition violated by the caller
  kMetric,           // metric undefined for the given input
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace drl
