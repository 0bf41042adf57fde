#pragma once

#include <stdexcept>
#include <string>

namespace mixlab {

/// Input violates a documented precondition (bad index, negative coupling,
/// mismatched lengths, malformed file).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// The request needs an enumeration or a matrix larger than the configured
/// limit. Callers that can degrade (sampled events, nested block updates)
/// catch this one specifically.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A time-stepping routine ran out of horizon before reaching its target.
class HorizonExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mixlab
