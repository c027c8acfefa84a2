#pragma once

#include <stdexcept>
#include <string>

namespace evfleet {

// Bad user input: unknown keys, out-of-range parameters, unreadable files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A simulation invariant broke (e.g. an EV left before reaching full charge).
// Always a bug or an infeasible scenario; never recovered from.
struct InvariantViolation : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace evfleet
