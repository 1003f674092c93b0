#pragma once

#include <functional>
#include <string>

// Minimal leveled logging to stderr. The level comes from IDSGP_VERBOSITY
// (0 quiet, 1 warnings, 2 info, 3 debug; default 2).

namespace idsgp::log {

enum class Level { warn = 1, info = 2, debug = 3 };

using Sink = std::function<void(Level, const std::string&)>;

/// Replaces the output sink (tests capture messages this way); returns the old one.
Sink set_sink(Sink sink);
int verbosity();

void write(Level level, const std::string& message);
inline void warn(const std::string& message) { write(Level::warn, message); }
inline void info(const std::string& message) { write(Level::info, message); }
inline void debug(const std::string& message) { write(Level::debug, message); }

}  // namespace idsgp::log
