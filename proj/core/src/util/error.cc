#include "ierf/error.h"

namespace ierf {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kRange: return "range";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kInput: return "input";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kNumerical: return "numerical";
    case ErrorKind::kBuild: return "build";
  }
  return "unknown";
}

}  // namespace ierf
