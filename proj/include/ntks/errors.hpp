#pragma once

#include <stdexcept>
#include <string>

namespace ntks {

enum class ErrorCode {
  DimensionMismatch,
  NonFinite,
  InvalidArgument,
  InvalidCutoff,
  CutoffTooLarge,
  EmptyInfoSpace,
  DivisionByZero,
  NotPsd,
  NotOrthonormal,
  StepSize,
  Divergence,
  InfeasibleSpec,
  Precondition,
  Io,
};

const char* to_string(ErrorCode code);

// Numerical failures (divergence, non-finite values, indefinite kernels) map to
// CLI exit code 3; everything else is a validation error (exit code 2).
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace ntks
