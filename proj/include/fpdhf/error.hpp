#pragma once

#include <stdexcept>
#include <string>

namespace fpdhf {

/// Raised when a caller breaks a documented precondition (bad dimensions,
/// non-positive step, even kernel size, ...).
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what)
      : std::invalid_argument(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace fpdhf
