#pragma once

#include <stdexcept>
#include <string>

namespace qsysid {

enum class ErrorKind {
  DimensionMismatch,
  NotHurwitz,
  SingularNoise,
  NoStabilizingSolution,
  Blowup,
  NotSkew,
  SingularZ,
  SingularV,
  EmptyKappas,
  NonPositiveDuration,
  InsufficientData,
  LogUndefined,
  UnstableEstimate,
  NumericalStall,
  NoFeasiblePointFound,
  ZSingularOnPath,
  DegenerateN,
  ZeroVarianceChannel,
  MissingArtifacts,
  IoError,
  ConfigError,
  InvalidArgument,
};

const char* to_string(ErrorKind kind);

/// Exception carrying a machine-checkable error kind plus a human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool cond, ErrorKind kind, const std::string& message) {
  if (!cond) fail(kind, message);
}

}  // namespace qsysid
