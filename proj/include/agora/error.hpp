#pragma once

#include <stdexcept>
#include <string>

namespace agora {

// Every throwing operation in the library reports one of these codes so
// callers (and tests) can dispatch without string matching.
enum class ErrorCode {
  BadArgs,
  NonMonotone,
  BadBreakpoints,
  OutOfDomain,
  Malformed,
  EmptyTrace,
  BwExceedsGpu,
  BadSpec,
  LengthMismatch,
  Empty,
  MissingTraceBinding,
  Sealed,
  AuthFailure,
  BadMagic,
  BadVersion,
  Truncated,
  Oversize,
  UnknownCustomer,
  ConfigError,
  JournalFull,
  IoError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::BadArgs: return "BadArgs";
    case ErrorCode::NonMonotone: return "NonMonotone";
    case ErrorCode::BadBreakpoints: return "BadBreakpoints";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::BwExceedsGpu: return "BwExceedsGpu";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::MissingTraceBinding: return "MissingTraceBinding";
    case ErrorCode::Sealed: return "Sealed";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::Oversize: return "Oversize";
    case ErrorCode::UnknownCustomer: return "UnknownCustomer";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::JournalFull: return "JournalFull";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace agora
