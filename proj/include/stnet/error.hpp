#pragma once

#include <stdexcept>
#include <string>

namespace stnet {

/// Raised when tensor shapes do not line up for an operation.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when user-provided data violates a documented precondition.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an on-disk artifact cannot be read back.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a caller breaks an API contract (non-scalar loss, non-deterministic closure...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised on NaN/Inf during optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stnet
