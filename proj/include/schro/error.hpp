#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace schro {

enum class Errc {
  InvalidArgument,
  LengthMismatch,
  QuadratureFailure,
  SingularCoupling,
  NonpositiveRadicand,
  DegenerateSpectrum,
  PositivityBreach,
  DomainViolation,
  NoConvergence,
  EigenSolverFailure,
  WrongRegime,
  InsufficientPoints,
  InitialSwitchFailed,
  KernelNotSimple,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::QuadratureFailure: return "QuadratureFailure";
    case Errc::SingularCoupling: return "SingularCoupling";
    case Errc::NonpositiveRadicand: return "NonpositiveRadicand";
    case Errc::DegenerateSpectrum: return "DegenerateSpectrum";
    case Errc::PositivityBreach: return "PositivityBreach";
    case Errc::DomainViolation: return "DomainViolation";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::EigenSolverFailure: return "EigenSolverFailure";
    case Errc::WrongRegime: return "WrongRegime";
    case Errc::InsufficientPoints: return "InsufficientPoints";
    case Errc::InitialSwitchFailed: return "InitialSwitchFailed";
    case Errc::KernelNotSimple: return "KernelNotSimple";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the Errc codes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace schro
