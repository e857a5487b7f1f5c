#pragma once

#include <stdexcept>
#include <string>

namespace sdcm {

/// Caller handed in something that violates an operation's preconditions.
struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A linear-algebra step failed beyond the tolerated escalation policy.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File or stream level failure.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sdcm
