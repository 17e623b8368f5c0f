#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mfg {

// Per-particle vectors and matrices never exceed this dimension; the bound
// keeps them on the stack inside the particle loops.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

enum class ErrorCode {
  InvalidArgument,
  InvalidCloud,
  DimensionMismatch,
  UnsupportedWeighting,
  MissingDerivative,
  NonFiniteValue,
  NoConvergence,
  SingularHessian,
  StaleMinimizer,
  SingularDvb,
  DimensionUnsupported,
  RankDeficient,
  StageFailure,
  NonPositiveDenominator,
  RiccatiBlowup,
  ConfigError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidCloud: return "InvalidCloud";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnsupportedWeighting: return "UnsupportedWeighting";
    case ErrorCode::MissingDerivative: return "MissingDerivative";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::StaleMinimizer: return "StaleMinimizer";
    case ErrorCode::SingularDvb: return "SingularDvb";
    case ErrorCode::DimensionUnsupported: return "DimensionUnsupported";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::StageFailure: return "StageFailure";
    case ErrorCode::NonPositiveDenominator: return "NonPositiveDenominator";
    case ErrorCode::RiccatiBlowup: return "RiccatiBlowup";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace mfg
