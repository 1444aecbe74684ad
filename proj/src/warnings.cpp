#include "warnings.hpp"

#include <iostream>
#include <utility>

namespace bsfree {

namespace {

WarningHandler& handler() {
  static WarningHandler h = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return h;
}

}  // namespace

void set_warning_handler(WarningHandler h) { handler() = std::move(h); }

void warn(const std::string& message) {
  if (handler()) handler()(message);
}

}  // namespace bsfree
