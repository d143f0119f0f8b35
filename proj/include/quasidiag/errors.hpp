#pragma once

#include <stdexcept>
#include <string>

namespace quasidiag {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define QUASIDIAG_ERROR(Name)                                   \
  class Name : public Error {                                   \
   public:                                                      \
    using Error::Error;                                         \
    const char* kind() const noexcept override { return #Name; } \
  };

QUASIDIAG_ERROR(MonotonicityViolation)
QUASIDIAG_ERROR(ResonantFrequency)
QUASIDIAG_ERROR(RegionOverlap)
QUASIDIAG_ERROR(InvalidAbsorptionQuery)
QUASIDIAG_ERROR(ToleranceBreach)
QUASIDIAG_ERROR(NoConvergence)
QUASIDIAG_ERROR(CardinalityMismatch)
QUASIDIAG_ERROR(DomainConditionViolated)
QUASIDIAG_ERROR(ConfigError)

#undef QUASIDIAG_ERROR

class DominanceViolation : public Error {
 public:
  DominanceViolation(double a, double b, double h, const std::string& where = "")
      : Error("diagonal dominance fails: a=" + std::to_string(a) + " b=" + std::to_string(b) +
              " h=" + std::to_string(h) + (where.empty() ? "" : " at " + where)),
        a(a), b(b), h(h) {}
  const char* kind() const noexcept override { return "DominanceViolation"; }
  double a, b, h;
};

}  // namespace quasidiag
