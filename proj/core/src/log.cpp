#include "drl/log.hpp"

#include <iostream>
#include <memory>
#include <mutex>

namespace drl {
namespace {

std::mutex& sink_mutex() {
  static std::mutex mu;
  return mu;
}

void default_sink(LogLevel level, std::string_view message) {
  if (level == LogLevel::kWarning) {
    std::cerr << "warning: " << message << '\n';
  }
}

LogSink& current_sink() {
  static LogSink sink = default_sink;
  return sink;
}

void emit(LogLevel level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(level, message);
}

}  // namespace

LogSink set_log_sink(LogSink sink) {
  std::lock_guard lock(sink_mutex());
  LogSink previous = std::move(current_sink());
  current_sink() = sink ? std::move(sink) : LogSink(default_sink);
  return previous;
}

void log_info(std::string_view message) { emit(LogLevel::kInfo, message); }
void log_warning(std::string_view message) { emit(LogLevel::kWarning, message); }

struct ScopedLogCapture::State {
  std::mutex mu;
  std::vector<std::string> warnings;
};

ScopedLogCapture::ScopedLogCapture() : state_(new State) {
  State* state = state_;
  previous_ = set_log_sink([state](LogLevel level, std::string_view message) {
    if (level != LogLevel::kWarning) return;
    std::lock_guard lock(state->mu);
    state->warnings.emplace_back(message);
  });
}

ScopedLogCapture::~ScopedLogCapture() {
  set_log_sink(std::move(previous_));
  delete state_;
}

std::vector<std::string> ScopedLogCapture::warnings() const {
  std::lock_guard lock(state_->mu);
  return state_->warnings;
}

}  // namespace drl
