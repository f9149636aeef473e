#include "geobalance/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "geobalance/error.hpp"

namespace geobalance {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double total_cost(const Matrix& flow, const Matrix& cost) {
  double total = 0.0;
  for (std::size_t i = 0; i < flow.rows(); ++i) {
    for (std::size_t j = 0; j < flow.cols(); ++j) {
      if (i != j) total += flow(i, j) * cost(i, j);
    }
  }
  return total;
}

// Finds an undirected cycle among edges with flow > eps. Returns the vertex
// sequence v0, v1, ..., v0 or an empty vector.
std::vector<std::size_t> support_cycle(const Matrix& flow, double eps) {
  const std::size_t m = flow.rows();
  auto adjacent = [&](std::size_t u, std::size_t v) {
    return u != v && (flow(u, v) > eps || flow(v, u) > eps);
  };
  std::vector<std::size_t> parent(m, m);
  std::vector<int> depth(m, -1);
  for (std::size_t root = 0; root < m; ++root) {
    if (depth[root] >= 0) continue;
    depth[root] = 0;
    std::vector<std::size_t> stack{root};
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < m; ++v) {
        if (!adjacent(u, v) || v == parent[u]) continue;
        if (depth[v] < 0) {
          depth[v] = depth[u] + 1;
          parent[v] = u;
          stack.push_back(v);
          continue;
        }
        // Non-tree edge u - v closes a cycle through their common ancestor.
        std::vector<std::size_t> left{u};
        std::vector<std::size_t> right{v};
        std::size_t a = u;
        std::size_t b = v;
        while (a != b) {
          if (depth[a] >= depth[b]) {
            a = parent[a];
            left.push_back(a);
          } else {
            b = parent[b];
            right.push_back(b);
          }
        }
        right.pop_back();
        std::vector<std::size_t> cycle(left.rbegin(), left.rend());
        // cycle runs ancestor ... u; continue u -> v ... back to ancestor.
        cycle.insert(cycle.end(), right.begin(), right.end());
        cycle.push_back(cycle.front());
        return cycle;
      }
    }
  }
  return {};
}

// Pushes flow around undirected cycles of the support until it is a forest.
// On an optimal flow every such cycle has zero cost in both directions.
void reduce_to_forest(Matrix& flow, const Matrix& cost, double eps) {
  const std::size_t m = flow.rows();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double both = std::min(flow(i, j), flow(j, i));
      flow(i, j) -= both;
      flow(j, i) -= both;
    }
  }
  for (std::size_t guard = 0; guard < m * m; ++guard) {
    const auto cycle = support_cycle(flow, eps);
    if (cycle.empty()) break;
    double forward_cost = 0.0;
    double min_forward = kInf;
    double min_backward = kInf;
    for (std::size_t s = 0; s + 1 < cycle.size(); ++s) {
      const std::size_t u = cycle[s];
      const std::size_t v = cycle[s + 1];
      if (flow(u, v) > eps) {
        forward_cost += cost(u, v);
        min_forward = std::min(min_forward, flow(u, v));
      } else {
        forward_cost -= cost(v, u);
        min_backward = std::min(min_backward, flow(v, u));
      }
    }
    // Pushing theta along the traversal raises forward edges and drains
    // backward ones; pick the direction that does not increase the cost.
    bool along = forward_cost <= 0.0;
    if (along && min_backward == kInf) along = false;
    const double theta = along ? min_backward : min_forward;
    for (std::size_t s = 0; s + 1 < cycle.size(); ++s) {
      const std::size_t u = cycle[s];
      const std::size_t v = cycle[s + 1];
      const bool is_forward = flow(u, v) > eps;
      double& edge = is_forward ? flow(u, v) : flow(v, u);
      const bool grows = is_forward == along;
      edge += grows ? theta : -theta;
      if (edge <= eps) edge = 0.0;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (flow(i, j) <= eps) flow(i, j) = 0.0;
    }
  }
}

}  // namespace

FlowSolution min_cost_flow(const FlowProblem& problem) {
  const std::size_t m = problem.demand.size();
  if (problem.cost.rows() != m || problem.cost.cols() != m) {
    throw Error(ErrorKind::kInvalidArgument, "cost matrix has wrong shape");
  }
  std::vector<double> supply(m, 0.0);
  std::vector<double> demand(m, 0.0);
  double total_supply = 0.0;
  double total_demand = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double b = problem.demand[i];
    if (!std::isfinite(b)) {
      throw Error(ErrorKind::kInvalidArgument, "demand must be finite");
    }
    if (b < 0.0) {
      supply[i] = -b;
      total_supply -= b;
    } else {
      demand[i] = b;
      total_demand += b;
    }
  }
  if (std::abs(total_supply - total_demand) >
      1e-9 * std::max(1.0, total_supply)) {
    throw Error(ErrorKind::kUnbalanced,
                "supply " + std::to_string(total_supply) +
                    " differs from demand " + std::to_string(total_demand));
  }
  const double eps = 1e-12 * std::max(1.0, total_supply);

  FlowSolution solution{Matrix::square(m), 0.0};
  Matrix& flow = solution.flow;
  std::vector<double> dist(m);
  std::vector<std::size_t> pred(m);

  // Residual arc u -> v: cancelling reverse flow costs -c(v, u) and beats
  // the uncapacitated forward arc c(u, v) >= 0 whenever it is available.
  auto arc_cost = [&](std::size_t u, std::size_t v) {
    return flow(v, u) > eps ? -problem.cost(v, u) : problem.cost(u, v);
  };

  auto remaining = [&] {
    double left = 0.0;
    for (double s : supply) left += s > eps ? s : 0.0;
    return left;
  };

  // Each augmentation exhausts a supply, a demand or a reverse arc.
  for (std::size_t round = 0; remaining() > eps && round < 4 * m * m + 16;
       ++round) {
    // Bellman-Ford from all remaining supplies. The residual graph of a
    // min-cost partial flow has no negative cycle, so m passes suffice.
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(pred.begin(), pred.end(), m);
    for (std::size_t s = 0; s < m; ++s) {
      if (supply[s] > eps) dist[s] = 0.0;
    }
    for (std::size_t pass = 0; pass < m; ++pass) {
      bool changed = false;
      for (std::size_t u = 0; u < m; ++u) {
        if (dist[u] == kInf) continue;
        for (std::size_t v = 0; v < m; ++v) {
          if (v == u) continue;
          const double candidate = dist[u] + arc_cost(u, v);
          if (dist[v] == kInf || candidate < dist[v] - 1e-15 * std::abs(dist[v])) {
            dist[v] = candidate;
            pred[v] = u;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    std::size_t sink = m;
    for (std::size_t t = 0; t < m; ++t) {
      if (demand[t] > eps && dist[t] < kInf &&
          (sink == m || dist[t] < dist[sink])) {
        sink = t;
      }
    }
    if (sink == m) break;
    std::size_t source = sink;
    double amount = demand[sink];
    for (std::size_t hops = 0; pred[source] != m && hops < m; ++hops) {
      const std::size_t u = pred[source];
      if (flow(source, u) > eps) amount = std::min(amount, flow(source, u));
      source = u;
    }
    if (supply[source] <= eps) break;
    amount = std::min(amount, supply[source]);
    std::size_t v = sink;
    for (std::size_t hops = 0; pred[v] != m && hops < m; ++hops) {
      const std::size_t u = pred[v];
      if (flow(v, u) > eps) {
        flow(v, u) -= amount;
        if (flow(v, u) <= eps) flow(v, u) = 0.0;
      } else {
        flow(u, v) += amount;
      }
      v = u;
    }
    supply[source] -= amount;
    demand[sink] -= amount;
  }

  reduce_to_forest(flow, problem.cost, eps);
  solution.total_cost = total_cost(flow, problem.cost);
  return solution;
}

FlowSolution optimize_network_flow(const Instance& inst,
                                   std::span<const double> target_loads) {
  require_feasible(inst, target_loads);
  FlowProblem problem{std::vector<double>(inst.size()), inst.latency()};
  for (std::size_t i = 0; i < inst.size(); ++i) {
    problem.demand[i] = target_loads[i] - inst.own_load(i);
  }
  return min_cost_flow(problem);
}

double cycle_gain(const Instance& inst, const ExchangeCycle& cycle) {
  double gain = 0.0;
  for (std::size_t s = 0; s < cycle.size(); ++s) {
    const CycleStep& step = cycle[s];
    const std::size_t next = cycle[(s + 1) % cycle.size()].server;
    gain += inst.latency(step.origin, next) - inst.latency(step.origin, step.server);
  }
  return gain;
}

double cycle_bottleneck(const OriginAssignment& state, const ExchangeCycle& cycle) {
  double amount = kInf;
  for (const CycleStep& step : cycle) {
    amount = std::min(amount, state.r(step.origin, step.server));
  }
  return cycle.empty() ? 0.0 : amount;
}

std::optional<ExchangeCycle> find_negative_cycle(const Instance& inst,
                                                 const OriginAssignment& state) {
  const std::size_t m = inst.size();
  const double threshold = positive_threshold(inst);
  const double tau = 1e-9 * inst.max_latency();
  // Cheapest label per server pair; each edge is charged +tau so a detected
  // cycle of length L gains less than -L * tau.
  Matrix weight = Matrix::square(m, kInf);
  std::vector<std::size_t> label(m * m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      for (std::size_t k = 0; k < m; ++k) {
        if (state.r(k, i) <= threshold) continue;
        const double w = inst.latency(k, j) - inst.latency(k, i) + tau;
        if (w < weight(i, j)) {
          weight(i, j) = w;
          label[i * m + j] = k;
        }
      }
    }
  }
  std::vector<double> dist(m, 0.0);
  std::vector<std::size_t> pred(m, m);
  std::size_t relaxed = m;
  for (std::size_t pass = 0; pass < m; ++pass) {
    relaxed = m;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (weight(i, j) == kInf) continue;
        if (dist[i] + weight(i, j) < dist[j]) {
          dist[j] = dist[i] + weight(i, j);
          pred[j] = i;
          relaxed = j;
        }
      }
    }
    if (relaxed == m) return std::nullopt;
  }
  // Walk back m steps to land inside the cycle, then collect it.
  std::size_t v = relaxed;
  for (std::size_t s = 0; s < m; ++s) v = pred[v];
  std::vector<std::size_t> servers{v};
  for (std::size_t u = pred[v]; u != v; u = pred[u]) servers.push_back(u);
  std::reverse(servers.begin(), servers.end());
  ExchangeCycle cycle;
  for (std::size_t s = 0; s < servers.size(); ++s) {
    const std::size_t from = servers[s];
    const std::size_t to = servers[(s + 1) % servers.size()];
    cycle.push_back({from, label[from * m + to]});
  }
  if (cycle_gain(inst, cycle) >= -tau) return std::nullopt;
  return cycle;
}

OriginAssignment cancel_cycle(OriginAssignment state, const ExchangeCycle& cycle) {
  const std::size_t m = state.r.rows();
  if (cycle.size() < 2) {
    throw Error(ErrorKind::kInvalidCycle, "cycle needs at least two steps");
  }
  for (const CycleStep& step : cycle) {
    if (step.server >= m || step.origin >= m) {
      throw Error(ErrorKind::kInvalidCycle, "cycle refers to unknown server");
    }
  }
  const double amount = cycle_bottleneck(state, cycle);
  if (!(amount > 0.0)) {
    throw Error(ErrorKind::kInvalidCycle, "cycle has zero bottleneck");
  }
  for (std::size_t s = 0; s < cycle.size(); ++s) {
    const CycleStep& step = cycle[s];
    const std::size_t next = cycle[(s + 1) % cycle.size()].server;
    state.r(step.origin, step.server) -= amount;
    state.r(step.origin, next) += amount;
  }
  for (const CycleStep& step : cycle) {
    if (state.r(step.origin, step.server) < 0.0) state.r(step.origin, step.server) = 0.0;
  }
  // Every server gains what it passes on, so the load vector is kept as is.
  return state;
}

std::size_t cancel_all_negative_cycles(const Instance& inst,
                                       OriginAssignment& state,
                                       std::size_t max_cycles) {
  std::size_t count = 0;
  while (count < max_cycles) {
    auto cycle = find_negative_cycle(inst, state);
    if (!cycle) break;
    state = cancel_cycle(std::move(state), *cycle);
    ++count;
  }
  return count;
}

}  // namespace geobalance
