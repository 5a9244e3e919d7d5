#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace drl {

enum class LogLevel { kInfo, kWarning };

using LogSink = std::function<void(LogLevel, std::string_view)>;

// Installs a process-wide sink and returns the previous one. The default
// sink writes warnings to stderr and drops info messages.
LogSink set_log_sink(LogSink sink);

void log_info(std::string_view message);
void log_warning(std::string_view message);

// Collects warnings for the lifetime of the object; restores the previous
// sink on destruction.
class ScopedLogCapture {
 public:
  ScopedLogCapture();
  ~ScopedLogCapture();
  ScopedLogCapture(const ScopedLogCapture&) = delete;
  ScopedLogCapture& operator=(const ScopedLogCapture&) = delete;

  std::vector<std::string> warnings() const;

 private:
  struct State;
  State* state_;
  LogSink previous_;
};

}  // namespace drl
