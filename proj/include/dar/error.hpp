#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dar {

/// Failure categories. The CLI maps each one onto a distinct exit code.
enum class ErrorCode {
  Domain,              // argument outside the mathematical domain
  InvalidArgument,     // malformed call (dimension mismatch, bad grid, ...)
  InfeasibleLikelihood,
  DegenerateInterval,
  DegenerateProjection,
  SingularDesign,
  NonMonotone,
  InversionFailure,
  UnsupportedMetric,
  MalformedCsv,
  MalformedJson,
  InvalidModelSpec,
  UnknownScenario,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const char* what) {
  if (!ok) throw Error(code, what);
}

}  // namespace dar
