#pragma once

#include <stdexcept>
#include <string>

namespace bmjb {

// Argument outside the mathematical domain of an evaluator (t <= 0, x outside [a,b], ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A constructed object violates its invariants (non-normalized measure, boundary mass, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Coupling preconditions (ordering, gap vs. support distance) are not met.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure did not reach its tolerance or a statistical window is unusable.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bmjb
