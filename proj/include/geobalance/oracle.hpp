#pragma once

#include <cstddef>
#include <vector>

#include "geobalance/model.hpp"

namespace geobalance {

enum class OracleStart { kProportional, kLocal };

struct OracleOptions {
  std::size_t max_servers = 8;
  OracleStart start = OracleStart::kProportional;
  std::size_t gradient_iterations = 300;
  std::size_t max_refinements = 200'000;
};

struct OracleSolution {
  OriginAssignment assignment;
  double objective = 0.0;
};

// Reference optimum of the origin-assignment problem, computed without the
// centralized or gossip machinery. A projected-gradient phase (one simplex
// projection per origin row, diminishing steps, backtracking on capacity)
// provides a warm start. It is then refined by exact line searches along
// improving cycles of the residual graph
//
//   origin k -> server i      cost  c_ki
//   server i -> origin k      cost -c_ki        (if r_ki > 0)
//   server i -> sink          cost  g_i^+(l_i)  (if l_i < capacity)
//   sink -> server i          cost -g_i^-(l_i)  (if l_i > 0)
//
// until no cycle has a directional derivative below the stopping tolerance.
// Per-origin moves between two servers are the cycles k -> j -> sink -> i -> k;
// cycles avoiding the sink reshuffle routing at fixed loads.
// Throws kCapExceeded above options.max_servers.
OracleSolution solve_oracle(const Instance& inst, const OracleOptions& options = {});

// Euclidean projection of `v` onto {x >= 0, sum x = total}.
std::vector<double> project_simplex(std::vector<double> v, double total);

struct ErrorEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  std::size_t origin = 0;
  double weight = 0.0;
};

struct ErrorGraph {
  std::vector<ErrorEdge> edges;

  // Indices into `edges` leaving / entering server i.
  std::vector<std::size_t> succ(std::size_t i) const;
  std::vector<std::size_t> prec(std::size_t i) const;
};

// Per origin, matches servers running too many of its requests with servers
// running too few, in index order, never chaining moves.
ErrorGraph build_error_graph(const Instance& inst, const OriginAssignment& state,
                             const OriginAssignment& optimal);

// False when some labelled cycle of the error graph lowers communication
// cost by more than tau_cycle = 1e-9 * max c per hop.
bool check_no_negative_cycles(const Instance& inst, const ErrorGraph& graph);

}  // namespace geobalance
