#pragma once

#include <stdexcept>
#include <string>

namespace ncpt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class SpaceMismatch : public Error {
 public:
  explicit SpaceMismatch(const std::string& where)
      : Error("operands live on different spaces: " + where) {}
};

class IllConditioned : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Time outside [0, horizon] of a Hamiltonian spec.
class OutOfHorizon : public Error {
 public:
  using Error::Error;
};

class ClosureViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace ncpt
