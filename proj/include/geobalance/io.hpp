#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "geobalance/central.hpp"
#include "geobalance/gossip.hpp"
#include "geobalance/loadfn.hpp"
#include "geobalance/matrix.hpp"
#include "geobalance/model.hpp"

namespace geobalance {

// Instance file:
//   {"servers": [{"id": str, "n": num, "load_function": {...}}, ...],
//    "latency": [[...], ...]}
// with load-function descriptors
//   {"kind": "queuing", "mu": x} | {"kind": "batch", "s": x}
//   | {"kind": "affine", "a": x, "b": x}
//   | {"kind": "empirical", "points": [[l, t], ...]}
// plus one of "l_max" / "t_max" (optional for empirical, where l_max defaults
// to the last breakpoint).
// Throws kParseError for malformed JSON or wrong field types and
// kValidationError listing every violated invariant.
Instance parse_instance(std::string_view text);

struct Routing {
  Matrix r;
  std::vector<double> loads;
  double objective = 0.0;
  std::string representation;  // "edge_flow" or "origin"
};

std::string routing_json(const Routing& routing);
Routing parse_routing(std::string_view text);

// Either a JSON array of numbers or a routing file's "loads".
std::vector<double> parse_loads(std::string_view text);

// JSON [[l, t], ...] or CSV lines "l,t" (a non-numeric header is skipped).
std::vector<Sample> parse_samples(std::string_view text);

std::string load_function_json(const LoadFunction& lf);

// Doubles use 17 significant digits; pair and estimate fields are empty on
// rows that have none.
std::string central_trace_csv(const std::vector<CentralTracePoint>& trace);
std::string gossip_trace_csv(const std::vector<GossipTracePoint>& trace);

// Throw kIoError on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace geobalance
