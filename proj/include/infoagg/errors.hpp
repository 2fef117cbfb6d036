#pragma once

#include <stdexcept>
#include <string>

namespace infoagg {

enum class ErrorCode {
  NonPositiveStdDev,
  NegativeStdDev,
  NegativePublishers,
  SingularCovariance,
  DimensionMismatch,
  ZeroPriceLoading,
  NonPositiveDeterminant,
  WrongScenario,
  DegenerateRecovery,
  InsufficientReps,
  NonInvertibleQueryMap,
  IllConditionedInversion,
  NoConvergence,
  ConfigParse,
  IoError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveStdDev: return "NonPositiveStdDev";
    case ErrorCode::NegativeStdDev: return "NegativeStdDev";
    case ErrorCode::NegativePublishers: return "NegativePublishers";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroPriceLoading: return "ZeroPriceLoading";
    case ErrorCode::NonPositiveDeterminant: return "NonPositiveDeterminant";
    case ErrorCode::WrongScenario: return "WrongScenario";
    case ErrorCode::DegenerateRecovery: return "DegenerateRecovery";
    case ErrorCode::InsufficientReps: return "InsufficientReps";
    case ErrorCode::NonInvertibleQueryMap: return "NonInvertibleQueryMap";
    case ErrorCode::IllConditionedInversion: return "IllConditionedInversion";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace infoagg
