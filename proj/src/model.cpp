#include "geobalance/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "geobalance/error.hpp"
#include "geobalance/kernels.hpp"

namespace geobalance {

std::vector<std::string> validate_instance(const std::vector<Server>& servers,
                                           const Matrix& latency) {
  std::vector<std::string> problems;
  const std::size_t m = servers.size();
  if (m == 0) problems.push_back("instance has no servers");
  if (latency.rows() != m || latency.cols() != m) {
    problems.push_back("latency matrix must be " + std::to_string(m) + "x" +
                       std::to_string(m));
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double c = latency(i, j);
        const std::string where =
            "latency[" + std::to_string(i) + "][" + std::to_string(j) + "]";
        if (!std::isfinite(c) || c < 0.0) {
          problems.push_back(where + " must be finite and nonnegative");
        } else if (i == j && c != 0.0) {
          problems.push_back(where + ": diagonal must be zero");
        }
      }
    }
  }
  double total = 0.0;
  double capacity = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const Server& s = servers[i];
    if (!std::isfinite(s.own_load) || s.own_load < 0.0) {
      problems.push_back("server " + s.id + ": n must be finite and nonnegative");
    } else {
      total += s.own_load;
    }
    capacity += s.load_function.l_max();
  }
  if (problems.empty() && capacity < total) {
    problems.push_back("total load " + std::to_string(total) +
                       " exceeds total capacity " + std::to_string(capacity));
  }
  return problems;
}

Instance::Instance(std::vector<Server> servers, Matrix latency)
    : servers_(std::move(servers)), latency_(std::move(latency)) {
  auto problems = validate_instance(servers_, latency_);
  if (!problems.empty()) {
    std::string message = "invalid instance: " + problems.front();
    if (problems.size() > 1) {
      message += " (and " + std::to_string(problems.size() - 1) + " more)";
    }
    throw Error(ErrorKind::kValidationError, message, std::move(problems));
  }
  for (const Server& s : servers_) {
    total_load_ += s.own_load;
    max_l_max_ = std::max(max_l_max_, s.load_function.l_max());
    const DerivativeBounds b = derivative_bounds(s.load_function);
    bounds_.u1 = std::max(bounds_.u1, b.u1);
    bounds_.u2 = std::max(bounds_.u2, b.u2);
  }
  for (double c : latency_.data()) max_latency_ = std::max(max_latency_, c);
}

std::vector<double> Instance::own_loads() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = own_load(i);
  return out;
}

EdgeFlowState EdgeFlowState::local(const Instance& inst) {
  return {Matrix::square(inst.size()), inst.own_loads()};
}

OriginAssignment OriginAssignment::local(const Instance& inst) {
  OriginAssignment oa{Matrix::square(inst.size()), inst.own_loads()};
  for (std::size_t k = 0; k < inst.size(); ++k) oa.r(k, k) = inst.own_load(k);
  return oa;
}

void OriginAssignment::refresh_loads() {
  const std::size_t m = r.rows();
  loads.assign(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < m; ++i) loads[i] += r(k, i);
  }
}

double positive_threshold(const Instance& inst) {
  return 1e-12 * std::max(1.0, inst.total_load());
}

double marginal_gain(const Instance& inst, std::span<const double> loads,
                     std::size_t from, std::size_t to, double unit_cost) {
  return inst.lf(from).marginal_left(loads[from]) -
         inst.lf(to).marginal(loads[to]) - unit_cost;
}

bool is_feasible(const Instance& inst, std::span<const double> loads) {
  if (loads.size() != inst.size()) return false;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const double l_max = inst.lf(i).l_max();
    const double slack = 1e-12 * std::max(1.0, l_max);
    if (!(loads[i] >= -slack) || !(loads[i] <= l_max + slack)) return false;
  }
  return true;
}

void require_feasible(const Instance& inst, std::span<const double> loads) {
  if (loads.size() != inst.size()) {
    throw Error(ErrorKind::kInvalidArgument, "load vector has wrong size");
  }
  if (!is_feasible(inst, loads)) {
    for (std::size_t i = 0; i < inst.size(); ++i) {
      const double l_max = inst.lf(i).l_max();
      const double slack = 1e-12 * std::max(1.0, l_max);
      if (!(loads[i] >= -slack) || !(loads[i] <= l_max + slack)) {
        throw Error(ErrorKind::kInfeasible,
                    "server " + inst.server(i).id + " load " +
                        std::to_string(loads[i]) + " outside [0, " +
                        std::to_string(l_max) + "]");
      }
    }
  }
}

void validate_fractions(const Instance& inst, const RelayFractions& fractions) {
  const std::size_t m = inst.size();
  if (fractions.rho.rows() != m || fractions.rho.cols() != m) {
    throw Error(ErrorKind::kInvalidArgument, "relay fractions have wrong shape");
  }
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = fractions.rho(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw Error(ErrorKind::kInvalidArgument, "relay fractions must be >= 0");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorKind::kInvalidArgument,
                  "relay fractions of server " + inst.server(i).id +
                      " sum to " + std::to_string(sum));
    }
  }
}

std::vector<double> load_vector_single_hop(const Instance& inst,
                                           const RelayFractions& fractions) {
  validate_fractions(inst, fractions);
  const std::size_t m = inst.size();
  std::vector<double> loads(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      loads[i] += fractions.rho(j, i) * inst.own_load(j);
    }
  }
  return loads;
}

std::vector<double> load_vector_multi_hop(const Instance& inst,
                                          const RelayFractions& fractions) {
  validate_fractions(inst, fractions);
  const auto m = static_cast<Eigen::Index>(inst.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd own(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    own(i) = inst.own_load(static_cast<std::size_t>(i));
    for (Eigen::Index k = 0; k < m; ++k) {
      if (k != i) {
        system(i, k) -= fractions.rho(static_cast<std::size_t>(k),
                                      static_cast<std::size_t>(i));
      }
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::kSingularRouting,
                "relay fractions route requests in a cycle with no retention");
  }
  const Eigen::VectorXd throughput = lu.solve(own);
  const double slack = 1e-9 * std::max(1.0, inst.total_load());
  std::vector<double> loads(inst.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::isfinite(throughput(i)) || throughput(i) < -slack) {
      throw Error(ErrorKind::kSingularRouting,
                  "relay fractions yield a negative throughput");
    }
    const auto u = static_cast<std::size_t>(i);
    loads[u] = fractions.rho(u, u) * std::max(0.0, throughput(i));
  }
  return loads;
}

double processing_cost(const Instance& inst, std::span<const double> loads) {
  double total = 0.0;
  for (std::size_t i = 0; i < inst.size(); ++i) total += inst.lf(i).total(loads[i]);
  return total;
}

double objective(const Instance& inst, const EdgeFlowState& state) {
  require_feasible(inst, state.loads);
  double total = processing_cost(inst, state.loads);
  const std::size_t m = inst.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j) total += inst.latency(i, j) * state.r(i, j);
    }
  }
  return total;
}

double objective(const Instance& inst, const OriginAssignment& state) {
  require_feasible(inst, state.loads);
  double total = processing_cost(inst, state.loads);
  const std::size_t m = inst.size();
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      if (k != i) total += inst.latency(k, i) * state.r(k, i);
    }
  }
  return total;
}

OptimalityReport delta_matrix(const Instance& inst, std::span<const double> loads) {
  require_feasible(inst, loads);
  OptimalityReport report;
  report.delta = kernels::delta_matrix(inst, loads);
  const std::size_t m = inst.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (report.delta(i, j) > report.max_delta) {
        report.max_delta = report.delta(i, j);
        report.argmax_i = i;
        report.argmax_j = j;
      }
    }
  }
  report.bound_e =
      inst.total_load() * static_cast<double>(m) * report.max_delta;
  return report;
}

namespace {

// Shared tail of both check_kkt overloads: `edges` holds r(from, to) for
// the positive transfers whose refund direction must not pay off.
OptimalityReport kkt_report(const Instance& inst, std::span<const double> loads,
                            const Matrix& edges, double tol) {
  OptimalityReport report = delta_matrix(inst, loads);
  const double threshold = positive_threshold(inst);
  const std::size_t m = inst.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j || edges(i, j) <= threshold) continue;
      if (marginal_gain(inst, loads, j, i, -inst.latency(i, j)) > tol) {
        report.violated_kkt_edges.emplace_back(i, j);
      }
    }
  }
  report.passed = report.max_delta <= tol && report.violated_kkt_edges.empty();
  return report;
}

}  // namespace

OptimalityReport check_kkt(const Instance& inst, const EdgeFlowState& state,
                           double tol) {
  return kkt_report(inst, state.loads, state.r, tol);
}

OptimalityReport check_kkt(const Instance& inst, const OriginAssignment& state,
                           double tol) {
  return kkt_report(inst, state.loads, state.r, tol);
}

std::vector<std::pair<std::size_t, std::size_t>> check_efficient_epsilon(
    const Instance& inst) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t m = inst.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      if (inst.lf(i).value(0.0) >= inst.latency(i, j) + inst.lf(j).value(0.0)) {
        out.emplace_back(i, j);
      }
    }
  }
  return out;
}

std::vector<Triple> check_triangle(const Instance& inst) {
  std::vector<Triple> out;
  const std::size_t m = inst.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i == k || k == j || i == j) continue;
        if (inst.latency(i, j) >= inst.latency(i, k) + inst.latency(k, j)) {
          out.push_back({i, k, j});
        }
      }
    }
  }
  return out;
}

std::vector<std::size_t> topological_order(const Matrix& r, double threshold,
                                           bool* acyclic) {
  const std::size_t m = r.rows();
  std::vector<std::size_t> indegree(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j && r(i, j) > threshold) ++indegree[j];
    }
  }
  std::vector<std::size_t> order;
  std::vector<bool> done(m, false);
  while (order.size() < m) {
    std::size_t next = m;
    for (std::size_t v = 0; v < m; ++v) {
      if (!done[v] && indegree[v] == 0) {
        next = v;
        break;
      }
    }
    if (next == m) break;
    done[next] = true;
    order.push_back(next);
    for (std::size_t j = 0; j < m; ++j) {
      if (j != next && r(next, j) > threshold) --indegree[j];
    }
  }
  if (acyclic != nullptr) *acyclic = order.size() == m;
  return order;
}

EdgeFlowState to_edge_flow(const Instance& inst, const OriginAssignment& oa) {
  EdgeFlowState ef{Matrix::square(inst.size()), oa.loads};
  for (std::size_t k = 0; k < inst.size(); ++k) {
    for (std::size_t i = 0; i < inst.size(); ++i) {
      if (k != i) ef.r(k, i) = oa.r(k, i);
    }
  }
  return ef;
}

OriginAssignment to_origin(const Instance& inst, const EdgeFlowState& ef) {
  const std::size_t m = inst.size();
  const double threshold = positive_threshold(inst);
  bool acyclic = true;
  const auto order = topological_order(ef.r, threshold, &acyclic);
  if (!acyclic) {
    throw Error(ErrorKind::kCyclicFlow,
                "positive transfers contain a directed cycle");
  }
  // carried(v, k): requests of origin k passing through server v.
  Matrix carried = Matrix::square(m);
  for (std::size_t v = 0; v < m; ++v) carried(v, v) = inst.own_load(v);

  OriginAssignment oa{Matrix::square(m), {}};
  for (std::size_t v : order) {
    double throughput = 0.0;
    for (std::size_t k = 0; k < m; ++k) throughput += carried(v, k);
    if (throughput <= 0.0) continue;
    const double executed = std::clamp(ef.loads[v] / throughput, 0.0, 1.0);
    for (std::size_t k = 0; k < m; ++k) {
      const double share = carried(v, k);
      if (share == 0.0) continue;
      oa.r(k, v) += share * executed;
      for (std::size_t w = 0; w < m; ++w) {
        if (w != v && ef.r(v, w) > threshold) {
          carried(w, k) += share * ef.r(v, w) / throughput;
        }
      }
    }
  }
  oa.refresh_loads();
  return oa;
}

}  // namespace geobalance
