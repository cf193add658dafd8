#pragma once

#include <stdexcept>
#include <string>

namespace nlsim {

// Caller violated a documented precondition (bad dimensions, non-unitary
// operator, incomplete projector set, ...).
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A bounded resource ran out (ebit pool exhausted, round budget spent).
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An internal invariant broke; always a bug in this library.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace nlsim
