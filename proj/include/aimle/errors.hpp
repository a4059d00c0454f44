#pragma once

#include <stdexcept>
#include <string>

namespace aimle {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// The state space is larger than the configured enumeration guard.
class GuardExceeded : public Error {
 public:
  using Error::Error;
};

// The operation is not available for this polytope variant or size.
class Unsupported : public Error {
 public:
  using Error::Error;
};

class InfeasibleState : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Finite-difference step lambda <= 0.
class InvalidStep : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Every downstream gradient in a batch has zero norm.
class AllDegenerate : public Error {
 public:
  using Error::Error;
};

class EmptyBatch : public Error {
 public:
  using Error::Error;
};

void require_same_size(std::size_t lhs, std::size_t rhs, const char* what);

}  // namespace aimle
