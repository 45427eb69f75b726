#include "catq/warnings.hpp"

#include <iostream>
#include <mutex>

namespace catq {
namespace {

struct WarningLog {
  std::mutex mutex;
  std::vector<std::string> entries;
  bool echo = false;
};

WarningLog& log() {
  static WarningLog instance;
  return instance;
}

}  // namespace

void warn(const std::string& message) {
  auto& l = log();
  std::lock_guard lock(l.mutex);
  // identical messages are kept once; sweeps would otherwise flood the manifest
  for (const auto& e : l.entries) {
    if (e == message) return;
  }
  l.entries.push_back(message);
  if (l.echo) std::cerr << "warning: " << message << '\n';
}

std::vector<std::string> warnings() {
  auto& l = log();
  std::lock_guard lock(l.mutex);
  return l.entries;
}

void clear_warnings() {
  auto& l = log();
  std::lock_guard lock(l.mutex);
  l.entries.clear();
}

void set_warning_echo(bool echo_to_stderr) {
  auto& l = log();
  std::lock_guard lock(l.mutex);
  l.echo = echo_to_stderr;
}

}  // namespace catq
