#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geobalance/loadfn.hpp"
#include "geobalance/matrix.hpp"

namespace geobalance {

struct Server {
  std::string id;
  double own_load = 0.0;  // n_i
  LoadFunction load_function;
};

// Immutable problem instance: servers with their own load and load function,
// plus the (possibly asymmetric) latency matrix with a zero diagonal.
class Instance {
 public:
  // Throws kValidationError listing every broken invariant.
  Instance(std::vector<Server> servers, Matrix latency);

  std::size_t size() const { return servers_.size(); }
  const Server& server(std::size_t i) const { return servers_[i]; }
  const LoadFunction& lf(std::size_t i) const { return servers_[i].load_function; }
  double own_load(std::size_t i) const { return servers_[i].own_load; }
  double latency(std::size_t i, std::size_t j) const { return latency_(i, j); }
  const Matrix& latency() const { return latency_; }

  double total_load() const { return total_load_; }
  double max_l_max() const { return max_l_max_; }
  double max_latency() const { return max_latency_; }
  // U1 and U2 maximized over all servers.
  const DerivativeBounds& bounds() const { return bounds_; }

  std::vector<double> own_loads() const;

 private:
  std::vector<Server> servers_;
  Matrix latency_;
  double total_load_ = 0.0;
  double max_l_max_ = 0.0;
  double max_latency_ = 0.0;
  DerivativeBounds bounds_;
};

// Every invariant of an instance that does not hold, as readable messages.
std::vector<std::string> validate_instance(const std::vector<Server>& servers,
                                           const Matrix& latency);

// Centralized-algorithm state: r(i, j) is the load relayed on edge i -> j
// (diagonal unused), loads are what each server executes.
struct EdgeFlowState {
  Matrix r;
  std::vector<double> loads;

  static EdgeFlowState local(const Instance& inst);
};

// Gossip state: r(k, i) is the number of requests owned by k executed on i.
// Row sums equal n_k; column sums are the loads.
struct OriginAssignment {
  Matrix r;
  std::vector<double> loads;

  static OriginAssignment local(const Instance& inst);
  void refresh_loads();
};

struct RelayFractions {
  Matrix rho;  // row stochastic
};

struct OptimalityReport {
  Matrix delta;  // Delta_ij = max(0, g_i - g_j - c_ij)
  double max_delta = 0.0;
  std::size_t argmax_i = 0;
  std::size_t argmax_j = 0;
  std::vector<std::pair<std::size_t, std::size_t>> violated_kkt_edges;
  bool feasible = true;
  double bound_e = 0.0;  // l_tot * m * max_delta
  bool passed = false;   // set by check_kkt only
};

// Threshold below which a relayed amount counts as zero.
double positive_threshold(const Instance& inst);

// Rate at which the objective drops per unit moved from `from` to `to` when
// the move changes communication cost by `unit_cost` per request. One-sided
// marginals are used so kinks of empirical functions are handled exactly.
double marginal_gain(const Instance& inst, std::span<const double> loads,
                     std::size_t from, std::size_t to, double unit_cost);

// Throws kInfeasible if a load is negative or above its l_max.
void require_feasible(const Instance& inst, std::span<const double> loads);
bool is_feasible(const Instance& inst, std::span<const double> loads);

std::vector<double> load_vector_single_hop(const Instance& inst,
                                           const RelayFractions& fractions);
// Solves the throughput fixed point t_i = n_i + sum_{k != i} rho_ki t_k; a
// server executes the retained share rho_ii t_i. Throws kSingularRouting when
// no unique nonnegative solution exists.
std::vector<double> load_vector_multi_hop(const Instance& inst,
                                          const RelayFractions& fractions);
// Throws kInvalidArgument if rho is not row stochastic.
void validate_fractions(const Instance& inst, const RelayFractions& fractions);

double processing_cost(const Instance& inst, std::span<const double> loads);
double objective(const Instance& inst, const EdgeFlowState& state);
double objective(const Instance& inst, const OriginAssignment& state);

OptimalityReport delta_matrix(const Instance& inst, std::span<const double> loads);
OptimalityReport check_kkt(const Instance& inst, const EdgeFlowState& state,
                           double tol);
OptimalityReport check_kkt(const Instance& inst, const OriginAssignment& state,
                           double tol);

// Ordered pairs (i, j) with f_i(0) >= c_ij + f_j(0).
std::vector<std::pair<std::size_t, std::size_t>> check_efficient_epsilon(
    const Instance& inst);

struct Triple {
  std::size_t i, k, j;
  friend bool operator==(const Triple&, const Triple&) = default;
};
// Triples of distinct servers with c_ij >= c_ik + c_kj.
std::vector<Triple> check_triangle(const Instance& inst);

EdgeFlowState to_edge_flow(const Instance& inst, const OriginAssignment& oa);
// Splits each server's throughput proportionally between execution and
// forwarding, following the positive edges in topological order. Throws
// kCyclicFlow when the positive edges contain a directed cycle.
OriginAssignment to_origin(const Instance& inst, const EdgeFlowState& ef);

// Kahn topological order (smallest index first) of the directed graph whose
// edges are the off-diagonal entries of `r` above `threshold`. On a cyclic
// graph *acyclic is set to false and the partial order is returned.
std::vector<std::size_t> topological_order(const Matrix& r, double threshold,
                                           bool* acyclic);

}  // namespace geobalance
