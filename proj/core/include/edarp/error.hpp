#pragma once

#include <stdexcept>
#include <string>

namespace edarp {

// Base of every error the library throws. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or configuration supplied by a caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (instances, checkpoints, solutions).
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf or other numerical breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A precondition of an operation was violated by the caller, e.g. stepping
// with an action the feasibility mask does not allow.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace edarp
