#pragma once

#include <stdexcept>
#include <string>

namespace npnce {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: unreadable files, malformed cells, invalid flags or
/// arguments outside an operation's domain.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical or statistical failure during estimation (rank deficiency,
/// quadrature disagreement, empty equivalence class, ...).
class EstimationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public InputError {
 public:
  using InputError::InputError;
};

class OrientationConflict : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class ExtensionCapExceeded : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class SingularMatrix : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

}  // namespace npnce
