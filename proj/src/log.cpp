#include "mia/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace mia {

namespace {

std::atomic<LogLevel> g_level{LogLevel::Warn};
std::mutex g_sink_mutex;
LogSink g_sink = nullptr;
void* g_sink_user = nullptr;

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
    default: return "?";
  }
}

}  // namespace

void set_log_level(LogLevel level) { g_level.store(level); }
LogLevel log_level() { return g_level.load(); }

void set_log_sink(LogSink sink, void* user_data) {
  std::lock_guard lock(g_sink_mutex);
  g_sink = sink;
  g_sink_user = user_data;
}

void log_message(LogLevel level, const std::string& message) {
  if (level < g_level.load()) return;
  std::lock_guard lock(g_sink_mutex);
  if (g_sink) {
    g_sink(level, message.c_str(), g_sink_user);
  } else {
    std::fprintf(stderr, "[mia %s] %s\n", level_tag(level), message.c_str());
  }
}

}  // namespace mia
