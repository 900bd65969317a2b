#pragma once

#include <stdexcept>
#include <string>

namespace otstab {

// Invalid point, spec mismatch, unbounded domain, point outside a domain.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CutLocusError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double eps, double residual, long iterations)
      : std::runtime_error(what), eps_(eps), residual_(residual), iterations_(iterations) {}

  double eps() const noexcept { return eps_; }
  double residual() const noexcept { return residual_; }
  long iterations() const noexcept { return iterations_; }

 private:
  double eps_;
  double residual_;
  long iterations_;
};

}  // namespace otstab
