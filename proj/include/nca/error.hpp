#ifndef NCA_ERROR_HPP
#define NCA_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace nca {

enum class Errc {
  MissingColumn,
  EmptyInput,
  EmptyResult,
  UnknownLabel,
  ConvergenceFailure,
  NotSymmetric,
  NegativeEigenvalue,
  ShapeMismatch,
  IndexOutOfRange,
  ZeroMarginal,
  RankDeficient,
  DivergenceDetected,
  EmptyValueDistribution,
  InsufficientData,
  IoFailure,
  InvalidDistribution,
  NotDiscrete,
  InvalidArgument,
  Config,
};

constexpr std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyResult: return "EmptyResult";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::ConvergenceFailure: return "ConvergenceFailure";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::NegativeEigenvalue: return "NegativeEigenvalue";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::ZeroMarginal: return "ZeroMarginal";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::DivergenceDetected: return "DivergenceDetected";
    case Errc::EmptyValueDistribution: return "EmptyValueDistribution";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InvalidDistribution: return "InvalidDistribution";
    case Errc::NotDiscrete: return "NotDiscrete";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Config: return "Config";
  }
  return "Unknown";
}

/// Library-wide exception; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace nca

#endif  // NCA_ERROR_HPP
