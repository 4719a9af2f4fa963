#pragma once

#include <stdexcept>
#include <string>

namespace latdiff {

enum class ErrorKind {
  MissingDirectory,
  NameMismatch,
  UnsupportedFormat,
  ShapeMismatch,
  DegenerateConfig,
  ZeroStd,
  InvalidChannelIndex,
  InvalidArch,
  ModeMismatch,
  EmptyBatch,
  EmptyDataset,
  NonFiniteLoss,
  NonFiniteGradient,
  MissingDE,
  IoError,
  VersionMismatch,
  CorruptChecksum,
  ParseError,
  UnknownKey,
  TooFewSamples,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::MissingDirectory: return "MissingDirectory";
    case ErrorKind::NameMismatch: return "NameMismatch";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DegenerateConfig: return "DegenerateConfig";
    case ErrorKind::ZeroStd: return "ZeroStd";
    case ErrorKind::InvalidChannelIndex: return "InvalidChannelIndex";
    case ErrorKind::InvalidArch: return "InvalidArch";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::MissingDE: return "MissingDE";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptChecksum: return "CorruptChecksum";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
  }
  return "Unknown";
}

// All pipeline failures surface as Error; `kind` is stable for tests and the
// CLI maps it onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace latdiff
