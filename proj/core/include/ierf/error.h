#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ierf {

// Broad failure classes. The CLI maps them onto process exit codes.
enum class ErrorKind {
  kConfig,       // bad shapes, bad layer references, bad options
  kRange,        // reversed or empty layer ranges
  kValidation,   // manifest/shape-chain inconsistencies
  kIntegrity,    // missing or truncated weight blobs
  kParse,        // malformed files
  kInput,        // non-finite or otherwise unusable data
  kUnsupported,  // op kinds a pass does not know how to handle
  kNumerical,    // divergence, non-finite gradients
  kBuild,        // graph assembly failures
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

#define IERF_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& message) : Error(Kind, message) {} \
  };

IERF_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
IERF_DEFINE_ERROR(RangeError, ErrorKind::kRange)
IERF_DEFINE_ERROR(ValidationError, ErrorKind::kValidation)
IERF_DEFINE_ERROR(IntegrityError, ErrorKind::kIntegrity)
IERF_DEFINE_ERROR(ParseError, ErrorKind::kParse)
IERF_DEFINE_ERROR(InputError, ErrorKind::kInput)
IERF_DEFINE_ERROR(UnsupportedOperation, ErrorKind::kUnsupported)
IERF_DEFINE_ERROR(NumericalError, ErrorKind::kNumerical)
IERF_DEFINE_ERROR(BuildError, ErrorKind::kBuild)

#undef IERF_DEFINE_ERROR

}  // namespace ierf
