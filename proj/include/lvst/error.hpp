#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lvst {

enum class ErrorCode {
  ShapeMismatch,
  ChannelMismatch,
  EmptyMask,
  WeightMissing,
  BadKernel,
  NonDivisibleDims,
  CorruptFile,
  UnknownVersion,
  LengthMismatch,
  MissingFrame,
  MissingFlow,
  Config,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::WeightMissing: return "WeightMissing";
    case ErrorCode::BadKernel: return "BadKernel";
    case ErrorCode::NonDivisibleDims: return "NonDivisibleDims";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::UnknownVersion: return "UnknownVersion";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MissingFrame: return "MissingFrame";
    case ErrorCode::MissingFlow: return "MissingFlow";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Configuration problems map to exit code 2, everything else is a data error.
  bool is_config_error() const noexcept {
    return code_ == ErrorCode::Config || code_ == ErrorCode::MissingFlow;
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace lvst
