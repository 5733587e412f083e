#pragma once

#include <stdexcept>
#include <string>

namespace rhh {

// Invalid input: bad parameters, malformed files, out-of-range arguments.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the region where a formula is defined (e.g. a divergent
// jump integral or a kernel evaluated at t <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Price outside the no-arbitrage bounds of the Black formula.
class BoundViolation : public DomainError {
 public:
  using DomainError::DomainError;
};

// A numerical procedure failed to meet its tolerance or diverged.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double achieved = 0.0)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

}  // namespace rhh
