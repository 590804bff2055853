#ifndef DPADMM_ERROR_HPP
#define DPADMM_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpadmm {

enum class ErrorCode {
  DuplicateEdge,
  SelfLoop,
  Disconnected,
  IndexOutOfRange,
  BracketFailure,
  NonPositiveWeight,
  InvalidConfig,
  OrderingViolation,
  BadWeights,
  LocalityViolation,
  SingularInstance,
  NoStationaryPoint,
  ZeroOptimum,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::OrderingViolation: return "OrderingViolation";
    case ErrorCode::BadWeights: return "BadWeights";
    case ErrorCode::LocalityViolation: return "LocalityViolation";
    case ErrorCode::SingularInstance: return "SingularInstance";
    case ErrorCode::NoStationaryPoint: return "NoStationaryPoint";
    case ErrorCode::ZeroOptimum: return "ZeroOptimum";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dpadmm

#endif  // DPADMM_ERROR_HPP
