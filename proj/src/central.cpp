#include "geobalance/central.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "geobalance/error.hpp"
#include "geobalance/flow.hpp"
#include "geobalance/transfer.hpp"

namespace geobalance {

const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kConverged: return "converged";
    case RunStatus::kBudgetExceeded: return "budget_exceeded";
    case RunStatus::kStalled: return "stalled";
  }
  return "unknown";
}

EdgeFlowState build_finite_solution(const Instance& inst) {
  const std::size_t m = inst.size();
  double capacity = 0.0;
  for (std::size_t i = 0; i < m; ++i) capacity += inst.lf(i).l_max();
  if (capacity + positive_threshold(inst) < inst.total_load()) {
    throw Error(ErrorKind::kOverloaded,
                "total load " + std::to_string(inst.total_load()) +
                    " exceeds total capacity " + std::to_string(capacity));
  }
  EdgeFlowState state = EdgeFlowState::local(inst);
  for (std::size_t i = 0; i < m; ++i) {
    const double cap = inst.lf(i).capacity();
    double overflow = state.loads[i] - cap;
    if (overflow <= 0.0) continue;
    state.loads[i] = cap;
    std::vector<std::size_t> targets;
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) targets.push_back(j);
    }
    std::stable_sort(targets.begin(), targets.end(),
                     [&](std::size_t a, std::size_t b) {
                       return inst.latency(i, a) < inst.latency(i, b);
                     });
    // Targets are filled to their capacity first; a rounding-sized remainder
    // may then use the margin below l_max, starting with server i itself.
    for (int pass = 0; pass < 2 && overflow > 0.0; ++pass) {
      if (pass == 1) {
        const double room = inst.lf(i).l_max() - state.loads[i];
        const double amount = std::min(std::max(room, 0.0), overflow);
        state.loads[i] += amount;
        overflow -= amount;
      }
      for (std::size_t j : targets) {
        if (overflow <= 0.0) break;
        const double limit = pass == 0 ? inst.lf(j).capacity() : inst.lf(j).l_max();
        const double spare = limit - state.loads[j];
        if (spare <= 0.0) continue;
        const double amount = std::min(spare, overflow);
        state.r(i, j) += amount;
        state.loads[j] += amount;
        overflow -= amount;
      }
    }
    if (overflow > positive_threshold(inst)) {
      throw Error(ErrorKind::kOverloaded,
                  "no spare capacity for the overflow of server " +
                      inst.server(i).id);
    }
  }
  return state;
}

void apply_network_flow(const Instance& inst, EdgeFlowState& state) {
  state.r = optimize_network_flow(inst, state.loads).flow;
}

double adjust(const Instance& inst, EdgeFlowState& state, std::size_t i,
              std::size_t j, double tol) {
  if (i == j) return 0.0;
  const double upper =
      std::min(state.loads[i], inst.lf(j).capacity() - state.loads[j]);
  if (upper <= 0.0) return 0.0;
  const PairTransfer t{&inst.lf(i), state.loads[i], &inst.lf(j), state.loads[j],
                       inst.latency(i, j)};
  const double x = minimize_transfer(t, 0.0, upper, tol);
  if (x <= 0.0) return 0.0;
  const double cancelled = std::min(x, state.r(j, i));
  state.r(j, i) -= cancelled;
  state.r(i, j) += x - cancelled;
  state.loads[i] -= x;
  state.loads[j] += x;
  return x;
}

double adjust_back(const Instance& inst, EdgeFlowState& state, std::size_t l,
                   std::size_t k, double tol) {
  if (l == k || state.r(k, l) <= 0.0) {
    throw Error(ErrorKind::kNoEdge, "no transfer on edge " + inst.server(k).id +
                                        " -> " + inst.server(l).id);
  }
  const double upper = std::min({state.r(k, l), state.loads[l],
                                 inst.lf(k).capacity() - state.loads[k]});
  if (upper <= 0.0) return 0.0;
  const PairTransfer t{&inst.lf(l), state.loads[l], &inst.lf(k), state.loads[k],
                       -inst.latency(k, l)};
  const double x = minimize_transfer(t, 0.0, upper, tol);
  if (x <= 0.0) return 0.0;
  state.r(k, l) -= x;
  state.loads[l] -= x;
  state.loads[k] += x;
  return x;
}

double improve(const Instance& inst, EdgeFlowState& state, std::size_t i,
               std::size_t j, double tol, double kkt_tol) {
  const std::size_t m = inst.size();
  const double threshold = positive_threshold(inst);
  double moved = adjust(inst, state, i, j, tol);
  // A refund can re-violate an edge upstream, so passes repeat until the
  // edge set is clean.
  for (std::size_t pass = 0; pass < 4 * m * m; ++pass) {
    bool acyclic = true;
    const auto order = topological_order(state.r, threshold, &acyclic);
    if (!acyclic) {
      throw Error(ErrorKind::kCycleDetected,
                  "positive transfers formed a directed cycle");
    }
    bool changed = false;
    for (std::size_t l : order) {
      for (std::size_t k = 0; k < m; ++k) {
        if (k == l || state.r(k, l) <= threshold) continue;
        if (marginal_gain(inst, state.loads, l, k, -inst.latency(k, l)) <= kkt_tol) {
          continue;
        }
        const double x = adjust_back(inst, state, l, k, tol);
        if (x > 0.0) {
          moved += x;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  return moved;
}

namespace {

struct ResidualRoutes {
  Matrix dist;
  std::vector<std::size_t> next;  // next(a, b) = next[a * m + b]
};

ResidualRoutes residual_routes(const Instance& inst, const EdgeFlowState& state) {
  const std::size_t m = inst.size();
  const double threshold = positive_threshold(inst);
  ResidualRoutes routes{Matrix::square(m), std::vector<std::size_t>(m * m)};
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      routes.next[a * m + b] = b;
      if (a == b) continue;
      routes.dist(a, b) = state.r(b, a) > threshold ? -inst.latency(b, a)
                                                    : inst.latency(a, b);
    }
  }
  // Optimal flows leave zero-cost residual cycles; improvements of rounding
  // size are ignored so the next-hop table cannot loop around one.
  const double eps = 1e-12 * std::max(1.0, inst.max_latency());
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        const double via = routes.dist(a, k) + routes.dist(k, b);
        if (via < routes.dist(a, b) - eps) {
          routes.dist(a, b) = via;
          routes.next[a * m + b] = routes.next[a * m + k];
        }
      }
    }
  }
  const double slack = 1e-9 * std::max(1.0, inst.max_latency());
  for (std::size_t a = 0; a < m; ++a) {
    if (routes.dist(a, a) < -slack) {
      throw Error(ErrorKind::kCycleDetected,
                  "relayed load admits a cheaper routing; the flow is not optimal");
    }
    routes.dist(a, a) = 0.0;
  }
  return routes;
}

bool can_give(const Instance& inst, const EdgeFlowState& state, std::size_t i) {
  return state.loads[i] > positive_threshold(inst);
}

bool can_take(const Instance& inst, const EdgeFlowState& state, std::size_t j) {
  return state.loads[j] < inst.lf(j).capacity();
}

}  // namespace

OptimalityReport residual_delta(const Instance& inst, const EdgeFlowState& state) {
  require_feasible(inst, state.loads);
  const std::size_t m = inst.size();
  const ResidualRoutes routes = residual_routes(inst, state);
  OptimalityReport report;
  report.delta = Matrix::square(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!can_give(inst, state, i)) continue;
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j || !can_take(inst, state, j)) continue;
      const double gain = marginal_gain(inst, state.loads, i, j, routes.dist(i, j));
      if (gain <= 0.0) continue;
      report.delta(i, j) = gain;
      if (gain > report.max_delta) {
        report.max_delta = gain;
        report.argmax_i = i;
        report.argmax_j = j;
      }
    }
  }
  report.bound_e = inst.total_load() * static_cast<double>(m) * report.max_delta;
  return report;
}

double reroute(const Instance& inst, EdgeFlowState& state, std::size_t i,
               std::size_t j, double tol) {
  if (i == j) return 0.0;
  const std::size_t m = inst.size();
  const double threshold = positive_threshold(inst);
  const ResidualRoutes routes = residual_routes(inst, state);
  std::vector<std::size_t> path{i};
  while (path.back() != j) {
    path.push_back(routes.next[path.back() * m + j]);
    if (path.size() > m) {
      throw Error(ErrorKind::kCycleDetected, "residual route does not terminate");
    }
  }
  double upper = std::min(state.loads[i], inst.lf(j).capacity() - state.loads[j]);
  for (std::size_t h = 0; h + 1 < path.size(); ++h) {
    const std::size_t a = path[h];
    const std::size_t b = path[h + 1];
    if (state.r(b, a) > threshold) upper = std::min(upper, state.r(b, a));
  }
  if (upper <= 0.0) return 0.0;
  const PairTransfer t{&inst.lf(i), state.loads[i], &inst.lf(j), state.loads[j],
                       routes.dist(i, j)};
  const double x = minimize_transfer(t, 0.0, upper, tol);
  if (x <= 0.0) return 0.0;
  for (std::size_t h = 0; h + 1 < path.size(); ++h) {
    const std::size_t a = path[h];
    const std::size_t b = path[h + 1];
    if (state.r(b, a) > threshold) {
      state.r(b, a) = std::max(0.0, state.r(b, a) - x);
    } else {
      state.r(a, b) += x;
    }
  }
  state.loads[i] -= x;
  state.loads[j] += x;
  return x;
}

CentralResult solve_central(const Instance& inst, const CentralConfig& cfg) {
  if (!(cfg.target_error > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "target error must be positive");
  }
  if (cfg.max_iterations < 1) {
    throw Error(ErrorKind::kInvalidArgument, "max_iterations must be >= 1");
  }
  const std::size_t m = inst.size();
  const double l_tot = inst.total_load();
  const double scale = std::max(l_tot, 1e-300);
  const double e_d = cfg.relative ? cfg.target_error * l_tot : cfg.target_error;
  const double threshold = e_d / (scale * static_cast<double>(m));
  // Transfers are located finely enough that the target stays reachable.
  const double tol = cfg.argmin_tol > 0.0
                         ? cfg.argmin_tol
                         : std::max(std::min(1e-10 * scale, 1e-3 * e_d), 1e-15 * scale);
  const double kkt_tol = threshold / 10.0;

  CentralResult result;
  result.target_error = e_d;
  result.state = build_finite_solution(inst);
  apply_network_flow(inst, result.state);

  auto record = [&](std::size_t iteration, const OptimalityReport& report,
                    double moved, bool has_pair, std::size_t i, std::size_t j,
                    bool flow_optimized) {
    CentralTracePoint point;
    point.iteration = iteration;
    point.objective = objective(inst, result.state);
    point.max_delta = report.max_delta;
    point.bound_e = report.bound_e;
    point.moved_load = moved;
    point.has_pair = has_pair;
    point.pair_i = i;
    point.pair_j = j;
    point.flow_optimized = flow_optimized;
    result.trace.push_back(point);
  };

  // Flow-optimized states are judged by the residual delta, which also
  // catches senders stuck on a kink; other states by delta_matrix.
  bool flow_optimal = true;
  OptimalityReport report = residual_delta(inst, result.state);
  record(0, report, 0.0, false, 0, 0, true);

  result.status = RunStatus::kBudgetExceeded;
  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    if (report.max_delta <= threshold) {
      if (flow_optimal) {
        result.status = RunStatus::kConverged;
        break;
      }
      apply_network_flow(inst, result.state);
      flow_optimal = true;
      report = residual_delta(inst, result.state);
      if (report.max_delta <= threshold) {
        result.status = RunStatus::kConverged;
        break;
      }
    }
    const OptimalityReport direct = delta_matrix(inst, result.state.loads);
    const bool rerouting = direct.max_delta <= threshold;
    const std::size_t i = rerouting ? report.argmax_i : direct.argmax_i;
    const std::size_t j = rerouting ? report.argmax_j : direct.argmax_j;
    double moved = 0.0;
    if (rerouting) {
      moved = reroute(inst, result.state, i, j, tol);
      apply_network_flow(inst, result.state);
    } else {
      moved = improve(inst, result.state, i, j, tol, kkt_tol);
      if (cfg.flow_every_iteration) apply_network_flow(inst, result.state);
    }
    flow_optimal = rerouting || cfg.flow_every_iteration;
    result.iterations = it;
    report = flow_optimal ? residual_delta(inst, result.state)
                          : delta_matrix(inst, result.state.loads);
    record(it, report, moved, true, i, j, flow_optimal);
    if (moved <= 0.0 && report.max_delta > threshold) {
      result.status = RunStatus::kStalled;
      break;
    }
  }
  apply_network_flow(inst, result.state);
  report = residual_delta(inst, result.state);
  if (result.status == RunStatus::kBudgetExceeded && report.max_delta <= threshold) {
    result.status = RunStatus::kConverged;
  }
  record(result.iterations, report, 0.0, false, 0, 0, true);
  return result;
}

}  // namespace geobalance
