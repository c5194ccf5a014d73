#pragma once

#include <stdexcept>
#include <string>

namespace uivi {

enum class ErrorKind {
  kDimensionMismatch,
  kNonFinite,
  kInvalidArgument,
  kUnsupported,
  kParse,
  kConfig,
  kIo,
  kNumerical,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI)
// can report a structured diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, ErrorKind kind, const char* what) {
  if (!condition) fail(kind, what);
}

}  // namespace uivi
