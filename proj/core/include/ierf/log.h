#pragma once

#include <functional>
#include <string_view>

namespace ierf {

// Non-fatal diagnostics (degenerate fields, fallbacks). The default handler
// writes "warning: <msg>" to stderr.
using WarningHandler = std::function<void(std::string_view)>;

void warn(std::string_view message);

// Installs a handler and returns the previous one. Not synchronized: set it
// before starting concurrent work.
WarningHandler set_warning_handler(WarningHandler handler);

// RAII capture used by tests and by the CLI to count warnings.
class ScopedWarningCapture {
 public:
  explicit ScopedWarningCapture(WarningHandler handler)
      : previous_(set_warning_handler(std::move(handler))) {}
  ~ScopedWarningCapture() { set_warning_handler(std::move(previous_)); }
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

 private:
  WarningHandler previous_;
};

}  // namespace ierf
