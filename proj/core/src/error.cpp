#include "euph/error.hpp"

namespace euph {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kData: return "data";
    case ErrorKind::kBackend: return "backend";
    case ErrorKind::kCache: return "cache";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kConflict: return "conflict";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kNumeric: return "numeric";
  }
  return "unknown";
}

}  // namespace euph
