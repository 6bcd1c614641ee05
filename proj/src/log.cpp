#include "deepida/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>

namespace deepida::log {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("deepida");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return instance;
}

}  // namespace

void init_from_env() {
  const char* env = std::getenv("DEEPIDA_LOG_LEVEL");
  if (env == nullptr) return;
  logger()->set_level(spdlog::level::from_str(env));
}

void debug(std::string_view message) { logger()->debug("{}", message); }
void info(std::string_view message) { logger()->info("{}", message); }
void warn(std::string_view message) { logger()->warn("{}", message); }

}  // namespace deepida::log
