#pragma once

#include <string>
#include <vector>

namespace catq {

// Process-wide warning log. Library code reports soft violations here
// (truncation comfort, expansion validity, regime checks); the CLI copies
// the log into the run manifest.
void warn(const std::string& message);
std::vector<std::string> warnings();
void clear_warnings();
void set_warning_echo(bool echo_to_stderr);

}  // namespace catq
