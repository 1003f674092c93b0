#include "idsgp/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace idsgp::log {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink;
  return sink;
}

}  // namespace

int verbosity() {
  static const int level = [] {
    const char* env = std::getenv("IDSGP_VERBOSITY");
    if (!env || !*env) return 2;
    return std::atoi(env);
  }();
  return level;
}

Sink set_sink(Sink sink) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  Sink old = std::move(current_sink());
  current_sink() = std::move(sink);
  return old;
}

void write(Level level, const std::string& message) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  if (current_sink()) {
    current_sink()(level, message);
    return;
  }
  if (int(level) > verbosity()) return;
  const char* tag = level == Level::warn ? "warning: " : level == Level::debug ? "debug: " : "";
  std::cerr << tag << message << '\n';
}

}  // namespace idsgp::log
