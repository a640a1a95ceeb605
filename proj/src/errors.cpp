#include "ntks/errors.hpp"

namespace ntks {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::NonFinite: return "non-finite value";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::InvalidCutoff: return "invalid cutoff";
    case ErrorCode::CutoffTooLarge: return "cutoff too large";
    case ErrorCode::EmptyInfoSpace: return "empty information space";
    case ErrorCode::DivisionByZero: return "division by zero";
    case ErrorCode::NotPsd: return "matrix not PSD";
    case ErrorCode::NotOrthonormal: return "columns not orthonormal";
    case ErrorCode::StepSize: return "step size too large";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::InfeasibleSpec: return "infeasible specification";
    case ErrorCode::Precondition: return "precondition violated";
    case ErrorCode::Io: return "i/o error";
  }
  return "unknown";
}

bool is_numerical(ErrorCode code) {
  return code == ErrorCode::NonFinite || code == ErrorCode::Divergence || code == ErrorCode::NotPsd;
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace ntks
