#include "geobalance/error.hpp"

#include <utility>

namespace geobalance {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kLoadOutOfRange: return "LoadOutOfRange";
    case ErrorKind::kNotConvex: return "NotConvex";
    case ErrorKind::kTooFewSamples: return "TooFewSamples";
    case ErrorKind::kBudgetUnreachable: return "BudgetUnreachable";
    case ErrorKind::kUnboundedBudget: return "UnboundedBudget";
    case ErrorKind::kSingularRouting: return "SingularRouting";
    case ErrorKind::kInfeasible: return "Infeasible";
    case ErrorKind::kCyclicFlow: return "CyclicFlow";
    case ErrorKind::kUnbalanced: return "Unbalanced";
    case ErrorKind::kInvalidCycle: return "InvalidCycle";
    case ErrorKind::kOverloaded: return "Overloaded";
    case ErrorKind::kNoEdge: return "NoEdge";
    case ErrorKind::kCycleDetected: return "CycleDetected";
    case ErrorKind::kPoolOverload: return "PoolOverload";
    case ErrorKind::kCapExceeded: return "CapExceeded";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kValidationError: return "ValidationError";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

Error::Error(ErrorKind kind, const std::string& message,
             std::vector<std::string> details)
    : std::runtime_error(message), kind_(kind), details_(std::move(details)) {}

}  // namespace geobalance
