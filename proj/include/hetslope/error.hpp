#ifndef HETSLOPE_ERROR_HPP
#define HETSLOPE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace hetslope {

enum class ErrorKind {
  InvalidInput,
  DegenerateRegressor,
  InsufficientData,
  SingularDesign,
  SingularVariance,
  ZeroRankEffect,
  MissingEstimate,
  InsufficientObservation,
  ExplosivePath,
  UnbalancedPanel,
  DuplicateCell,
  ParseError,
  InvalidWindow,
  UsageError,
  DescentViolation,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::DegenerateRegressor: return "DegenerateRegressor";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::SingularVariance: return "SingularVariance";
    case ErrorKind::ZeroRankEffect: return "ZeroRankEffect";
    case ErrorKind::MissingEstimate: return "MissingEstimate";
    case ErrorKind::InsufficientObservation: return "InsufficientObservation";
    case ErrorKind::ExplosivePath: return "ExplosivePath";
    case ErrorKind::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorKind::DuplicateCell: return "DuplicateCell";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidWindow: return "InvalidWindow";
    case ErrorKind::UsageError: return "UsageError";
    case ErrorKind::DescentViolation: return "DescentViolation";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI,
/// the replication harness) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace hetslope

#endif  // HETSLOPE_ERROR_HPP
