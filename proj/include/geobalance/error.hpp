#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace geobalance {

enum class ErrorKind {
  kInvalidArgument,
  kLoadOutOfRange,
  kNotConvex,
  kTooFewSamples,
  kBudgetUnreachable,
  kUnboundedBudget,
  kSingularRouting,
  kInfeasible,
  kCyclicFlow,
  kUnbalanced,
  kInvalidCycle,
  kOverloaded,
  kNoEdge,
  kCycleDetected,
  kPoolOverload,
  kCapExceeded,
  kParseError,
  kValidationError,
  kIoError,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
// Validation failures carry every broken invariant in details().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  Error(ErrorKind kind, const std::string& message,
        std::vector<std::string> details);

  ErrorKind kind() const { return kind_; }
  const std::vector<std::string>& details() const { return details_; }

 private:
  ErrorKind kind_;
  std::vector<std::string> details_;
};

}  // namespace geobalance
