#pragma once

#include <cstddef>
#include <vector>

#include "geobalance/model.hpp"

namespace geobalance {

enum class RunStatus {
  kConverged,       // target met
  kBudgetExceeded,  // iteration or round budget exhausted
  kStalled,         // the selected pair could not move any load
};

const char* to_string(RunStatus status);

struct CentralConfig {
  double target_error = 1e-6;  // absolute, or relative to l_tot if `relative`
  bool relative = false;
  bool flow_every_iteration = false;
  std::size_t max_iterations = 1'000'000;
  double argmin_tol = 0.0;  // 0 selects min(1e-10 * l_tot, 1e-3 * target), floored at 1e-15 * l_tot
};

struct CentralTracePoint {
  std::size_t iteration = 0;
  double objective = 0.0;
  double max_delta = 0.0;
  double bound_e = 0.0;
  double moved_load = 0.0;
  bool has_pair = false;
  std::size_t pair_i = 0;
  std::size_t pair_j = 0;
  bool flow_optimized = false;
};

struct CentralResult {
  EdgeFlowState state;
  std::vector<CentralTracePoint> trace;
  RunStatus status = RunStatus::kConverged;
  std::size_t iterations = 0;
  double target_error = 0.0;  // absolute
};

// Keeps min(n_i, capacity_i) locally and waterfills the overflow of each
// overloaded server to the nearest servers with spare capacity.
// Throws kOverloaded when the total capacity is insufficient.
EdgeFlowState build_finite_solution(const Instance& inst);

// Replaces the edge transfers with a min-cost flow realizing the same loads.
void apply_network_flow(const Instance& inst, EdgeFlowState& state);

// Moves the load minimizing h_i(l_i - x) + h_j(l_j + x) + x c_ij from i to j.
// Existing reverse transfers j -> i are cancelled first. Returns x.
double adjust(const Instance& inst, EdgeFlowState& state, std::size_t i,
              std::size_t j, double tol);

// Returns load previously sent on k -> l: minimizes
// h_l(l_l - x) + h_k(l_k + x) - x c_kl over x in [0, r_kl].
// Throws kNoEdge when r_kl is zero.
double adjust_back(const Instance& inst, EdgeFlowState& state, std::size_t l,
                   std::size_t k, double tol);

// adjust(i, j) followed by adjust_back on every positive edge k -> l whose
// refund would pay more than kkt_tol per request, visiting servers in
// topological order of the positive edges and repeating until no edge is
// violated. Returns the total load moved. Throws kCycleDetected if the
// positive edges stop forming a DAG.
double improve(const Instance& inst, EdgeFlowState& state, std::size_t i,
               std::size_t j, double tol, double kkt_tol);

// Delta with c_ij replaced by d_ij, the cost of the cheapest residual route
// from i to j: every ordered pair is joined at c_ab, and load already sent on
// a -> b can be called back at -c_ab. Since d_ij <= c_ij this dominates
// delta_matrix. The two differ when a sender sits on a kink of its load
// function and could redirect its relays. Servers with nothing to give or no
// room left are skipped. `state.r` must be a min-cost flow for its loads.
OptimalityReport residual_delta(const Instance& inst, const EdgeFlowState& state);

// Moves the load minimizing h_i(l_i - x) + h_j(l_j + x) + x d_ij from i to j
// along the cheapest residual route, calling back relayed load on the way.
// Returns x.
double reroute(const Instance& inst, EdgeFlowState& state, std::size_t i,
               std::size_t j, double tol);

CentralResult solve_central(const Instance& inst, const CentralConfig& cfg);

}  // namespace geobalance
