#pragma once

#include <stdexcept>
#include <string>

namespace metastat {

/// Argument outside the mathematical domain of a model function (x <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A parameter record or configuration violates one of its invariants.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The numerical solver could not continue (hypothesis violated at runtime,
/// non-monotone mesh, missing event, ...).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace metastat
