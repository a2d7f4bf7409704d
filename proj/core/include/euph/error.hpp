#pragma once

#include <stdexcept>
#include <string>

namespace euph {

// Every failure the library reports derives from Error. The CLI maps the
// category onto its exit code, the curation service onto an HTTP status.
enum class ErrorKind {
  kUsage,       // bad arguments, unknown flags, precondition violations
  kData,        // malformed or inconsistent input files
  kBackend,     // generator / encoder / language-model failures
  kCache,       // corrupted cache entries
  kNotFound,
  kConflict,    // stale optimistic-concurrency revision
  kValidation,  // rejected user edit
  kNumeric,     // divergence, degenerate statistics
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorKind::kUsage, w) {}
};
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::kData, w) {}
};
struct BackendError : Error {
  explicit BackendError(const std::string& w) : Error(ErrorKind::kBackend, w) {}
};
struct CacheCorruption : Error {
  explicit CacheCorruption(const std::string& w) : Error(ErrorKind::kCache, w) {}
};
struct NotFound : Error {
  explicit NotFound(const std::string& w) : Error(ErrorKind::kNotFound, w) {}
};
struct ConflictError : Error {
  explicit ConflictError(const std::string& w) : Error(ErrorKind::kConflict, w) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& w) : Error(ErrorKind::kValidation, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::kNumeric, w) {}
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace euph
