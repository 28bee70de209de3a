#include "ierf/log.h"

#include <iostream>
#include <string>

namespace ierf {
namespace {

WarningHandler& handler() {
  static WarningHandler h = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return h;
}

}  // namespace

void warn(std::string_view message) {
  if (handler()) handler()(message);
}

WarningHandler set_warning_handler(WarningHandler h) {
  WarningHandler previous = std::move(handler());
  handler() = std::move(h);
  return previous;
}

}  // namespace ierf
