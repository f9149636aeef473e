#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "geobalance/central.hpp"
#include "geobalance/model.hpp"
#include "geobalance/rng.hpp"

namespace geobalance {

struct GossipConfig {
  std::uint64_t seed = 1;
  std::size_t max_rounds = 100'000;
  double stop_error = 0.0;           // absolute target for the estimator bound
  std::size_t estimator_period = 0;  // 0 selects m
  double argmin_tol = 0.0;           // 0 selects 1e-10 * l_tot
};

// Any-time error bound from pairwise improvements:
//   bound = 2 m S + M (22 U1 + 11 l_max U2) l_tot / eps + (m + 1) l_tot eps
// with S the sum and M the max of impr over ordered pairs, evaluated at the
// minimizing eps_star = sqrt(B / C).
struct ErrorEstimate {
  double bound = 0.0;
  double eps_star = 0.0;
  double impr_sum = 0.0;
  double impr_max = 0.0;
};

struct GossipTracePoint {
  std::size_t round = 0;
  bool has_pair = false;
  std::size_t initiator = 0;
  std::size_t partner = 0;
  double objective = 0.0;
  double impr = 0.0;
  std::optional<ErrorEstimate> estimate;
};

struct GossipResult {
  OriginAssignment state;
  std::vector<GossipTracePoint> trace;
  RunStatus status = RunStatus::kConverged;
  std::size_t rounds = 0;
};

// Pairwise optimal rebalancing of servers i and j: both columns are pooled on
// i, then origins are visited in ascending c_kj - c_ki (ties by index) and
// each moves the amount minimizing
//   h_i(l_i - x) + h_j(l_j + x) + x (c_kj - c_ki),  0 <= x <= r_ki.
// While the pool exceeds i's capacity the excess is forced across. The
// columns are left unchanged if the result is not cheaper. Returns the
// improvement of the objective (>= 0).
double calc_best_transfer(const Instance& inst, OriginAssignment& state,
                          std::size_t i, std::size_t j, double tol);

struct RoundOutcome {
  std::size_t initiator = 0;
  std::size_t partner = 0;
  double impr = 0.0;
};

// Uniform initiator, uniform partner among the other m - 1 servers.
RoundOutcome gossip_round(const Instance& inst, OriginAssignment& state,
                          Rng& rng, double tol);

ErrorEstimate estimate_from_improvements(std::size_t m, double total_load,
                                         const DerivativeBounds& bounds,
                                         double max_l_max, double impr_sum,
                                         double impr_max);

// Evaluates impr for every ordered pair on copies of `state`.
ErrorEstimate error_estimate(const Instance& inst, const OriginAssignment& state,
                             double tol);

// Starting state of a gossip run: everything local, or the finite solution
// of the centralized algorithm when some server starts overloaded.
OriginAssignment gossip_start(const Instance& inst);

GossipResult run_gossip(const Instance& inst, const GossipConfig& cfg);

}  // namespace geobalance
