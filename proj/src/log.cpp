// SPDX-License-Identifier: Apache-2.0
#include "mssf/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace mssf::log {

namespace {
std::atomic<Level> threshold{Level::info};
std::mutex sink_mutex;

void emit(Level l, const char* tag, const std::string& message) {
  if (l < threshold.load()) return;
  std::lock_guard lock(sink_mutex);
  std::cerr << "[" << tag << "] " << message << '\n';
}
}  // namespace

void set_level(Level l) { threshold = l; }
Level level() { return threshold.load(); }

void info(const std::string& message) { emit(Level::info, "info", message); }
void warn(const std::string& message) { emit(Level::warn, "warn", message); }
void error(const std::string& message) { emit(Level::error, "error", message); }

}  // namespace mssf::log
