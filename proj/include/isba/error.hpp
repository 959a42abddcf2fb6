#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isba {

enum class ErrorKind {
  io,           // missing or unreadable file
  format,       // bad magic, version, or malformed content
  truncated,    // payload shorter than the header promises
  non_finite,   // NaN or infinity where a finite real is required
  unknown_label,
  empty_input,
  invalid_argument,
  shape_mismatch,
  infeasible,
  numeric,      // NaN loss or non-finite activation during training/inference
  config,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::truncated: return "truncated";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::unknown_label: return "unknown_label";
    case ErrorKind::empty_input: return "empty_input";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::shape_mismatch: return "shape_mismatch";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace isba
