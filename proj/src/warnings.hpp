#pragma once

#include <functional>
#include <string>

namespace bsfree {

using WarningHandler = std::function<void(const std::string&)>;

/// Replaces the process-wide warning sink (default: stderr). Not thread-safe;
/// install it before starting work.
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace bsfree
