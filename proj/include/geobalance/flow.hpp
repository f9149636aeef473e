#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "geobalance/matrix.hpp"
#include "geobalance/model.hpp"

namespace geobalance {

// Uncapacitated transshipment: node i must end with net inflow demand[i]
// (negative = supply). Costs are per unit on every ordered pair i != j.
struct FlowProblem {
  std::vector<double> demand;
  Matrix cost;
};

struct FlowSolution {
  Matrix flow;
  double total_cost = 0.0;
};

// Exact min-cost flow by successive shortest paths (Bellman-Ford on the
// residual graph, so cancelling arcs with negative cost are handled), then
// pushing flow around zero-cost undirected cycles until the positive edges
// form a forest (at most m - 1 of them).
// Throws kUnbalanced when supplies and demands differ by more than
// 1e-9 * max(1, total supply).
FlowSolution min_cost_flow(const FlowProblem& problem);

// Cheapest edge transfers turning own loads into `target_loads`.
FlowSolution optimize_network_flow(const Instance& inst,
                                   std::span<const double> target_loads);

// One hop of an exchange cycle: requests owned by `origin` move from
// `server` to the server of the next step (wrapping around).
struct CycleStep {
  std::size_t server;
  std::size_t origin;
  friend bool operator==(const CycleStep&, const CycleStep&) = default;
};
using ExchangeCycle = std::vector<CycleStep>;

// Change in communication delay per request moved around the cycle:
// sum of c(origin, next server) - c(origin, server).
double cycle_gain(const Instance& inst, const ExchangeCycle& cycle);
// Largest amount that can travel around the cycle.
double cycle_bottleneck(const OriginAssignment& state, const ExchangeCycle& cycle);

// A load-preserving cycle with gain below -tau_cycle (tau_cycle = 1e-9 times
// the largest latency), found by Bellman-Ford on the exchange graph: edge
// i -> j with label k exists when r(k, i) > 0 and weighs c_kj - c_ki.
std::optional<ExchangeCycle> find_negative_cycle(const Instance& inst,
                                                 const OriginAssignment& state);

// Moves the bottleneck amount around `cycle`. Loads and per-origin totals are
// unchanged. Throws kInvalidCycle for malformed or zero-capacity cycles.
OriginAssignment cancel_cycle(OriginAssignment state, const ExchangeCycle& cycle);

// Repeats find_negative_cycle / cancel_cycle until none remains; returns the
// number of cycles cancelled.
std::size_t cancel_all_negative_cycles(const Instance& inst,
                                       OriginAssignment& state,
                                       std::size_t max_cycles = 10000);

}  // namespace geobalance
