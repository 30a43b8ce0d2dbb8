#pragma once

#include <stdexcept>
#include <string>

namespace igbo {

// Raised when a caller breaks an operation's precondition (bad shapes, out of
// range hyperparameters, unfitted state). The CLI maps it to exit status 1.
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what)
      : std::invalid_argument(what) {}
};

// Raised when arithmetic produces a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace igbo
