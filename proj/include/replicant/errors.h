#pragma once

#include <stdexcept>

namespace replicant {

// Protocol-bug signals. None of these is reachable from well-behaved peers;
// tests and the simulator treat them as fatal.

class SafetyViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class MissingInstance : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class TrimBeyondExecuted : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace replicant
