#pragma once

#include <string_view>

namespace deepida::log {

/// Reads DEEPIDA_LOG_LEVEL (trace, debug, info, warn, error, off). Default warn.
void init_from_env();

void debug(std::string_view message);
void info(std::string_view message);
void warn(std::string_view message);

}  // namespace deepida::log
