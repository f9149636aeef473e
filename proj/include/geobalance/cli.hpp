#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace geobalance {

struct RunSpec {
  std::string command;        // solve | oracle | flow | check | fit
  std::string instance_path;
  std::string algorithm = "central";  // central | central-flow | gossip | oracle | flow
  double target_error = 1e-6;
  bool relative = false;
  std::uint64_t seed = 1;
  std::optional<std::size_t> max_steps;
  std::string trace_path;
  std::string output_path;
  std::string samples_path;
  std::string routing_path;  // check
  std::string loads_path;    // flow
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitBudget = 2;

// Executes one command; the summary goes to `out`, diagnostics to `err`.
int run(const RunSpec& spec, std::ostream& out, std::ostream& err);

// Parses argv into a RunSpec and runs it.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace geobalance
