#include "geobalance/gossip.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "geobalance/error.hpp"
#include "geobalance/kernels.hpp"
#include "geobalance/transfer.hpp"

namespace geobalance {

namespace {

// Objective terms that depend on columns i and j only.
double pair_cost(const Instance& inst, std::size_t i, std::size_t j,
                 std::span<const double> col_i, std::span<const double> col_j,
                 double load_i, double load_j) {
  double cost = inst.lf(i).total(load_i) + inst.lf(j).total(load_j);
  for (std::size_t k = 0; k < inst.size(); ++k) {
    cost += inst.latency(k, i) * col_i[k] + inst.latency(k, j) * col_j[k];
  }
  return cost;
}

double column_sum(std::span<const double> col) {
  return std::accumulate(col.begin(), col.end(), 0.0);
}

}  // namespace

double calc_best_transfer(const Instance& inst, OriginAssignment& state,
                          std::size_t i, std::size_t j, double tol) {
  const std::size_t m = inst.size();
  if (i == j || i >= m || j >= m) {
    throw Error(ErrorKind::kInvalidArgument, "calc_best_transfer needs i != j");
  }
  std::vector<double> old_i(m);
  std::vector<double> old_j(m);
  for (std::size_t k = 0; k < m; ++k) {
    old_i[k] = state.r(k, i);
    old_j[k] = state.r(k, j);
  }
  const double before =
      pair_cost(inst, i, j, old_i, old_j, state.loads[i], state.loads[j]);

  std::vector<double> col_i(m);
  std::vector<double> col_j(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) col_i[k] = old_i[k] + old_j[k];
  double load_i = column_sum(col_i);
  double load_j = 0.0;

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return inst.latency(a, j) - inst.latency(a, i) <
           inst.latency(b, j) - inst.latency(b, i);
  });

  const LoadFunction& lf_i = inst.lf(i);
  const LoadFunction& lf_j = inst.lf(j);
  const double cap_i = lf_i.capacity();
  const double cap_j = lf_j.capacity();
  for (std::size_t k : order) {
    if (col_i[k] <= 0.0) continue;
    const double upper = std::min(col_i[k], cap_j - load_j);
    if (upper <= 0.0) break;
    // The pool may sit above i's capacity; the excess has to cross.
    const double lower = std::min(upper, std::max(0.0, load_i - cap_i));
    const PairTransfer t{&lf_i, load_i, &lf_j, load_j,
                         inst.latency(k, j) - inst.latency(k, i)};
    const double x = minimize_transfer(t, lower, upper, tol);
    if (x <= 0.0) continue;
    col_i[k] -= x;
    col_j[k] += x;
    load_i -= x;
    load_j += x;
  }
  load_i = column_sum(col_i);
  load_j = column_sum(col_j);
  if (load_i > lf_i.l_max() + 1e-12 * std::max(1.0, lf_i.l_max())) {
    throw Error(ErrorKind::kPoolOverload,
                "servers " + inst.server(i).id + " and " + inst.server(j).id +
                    " cannot split their pooled load feasibly");
  }
  const double after = pair_cost(inst, i, j, col_i, col_j, load_i, load_j);
  if (!(after < before)) return 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    state.r(k, i) = col_i[k];
    state.r(k, j) = col_j[k];
  }
  state.loads[i] = load_i;
  state.loads[j] = load_j;
  return before - after;
}

RoundOutcome gossip_round(const Instance& inst, OriginAssignment& state,
                          Rng& rng, double tol) {
  const std::size_t m = inst.size();
  if (m < 2) {
    throw Error(ErrorKind::kInvalidArgument, "gossip needs at least two servers");
  }
  RoundOutcome out;
  out.initiator = rng.index(m);
  out.partner = rng.index(m - 1);
  if (out.partner >= out.initiator) ++out.partner;
  out.impr = calc_best_transfer(inst, state, out.initiator, out.partner, tol);
  return out;
}

ErrorEstimate estimate_from_improvements(std::size_t m, double total_load,
                                         const DerivativeBounds& bounds,
                                         double max_l_max, double impr_sum,
                                         double impr_max) {
  const double md = static_cast<double>(m);
  const double a = 2.0 * md * impr_sum;
  const double b =
      impr_max * (22.0 * bounds.u1 + 11.0 * max_l_max * bounds.u2) * total_load;
  const double c = (md + 1.0) * total_load;
  ErrorEstimate est;
  est.impr_sum = impr_sum;
  est.impr_max = impr_max;
  if (b > 0.0 && c > 0.0) {
    est.eps_star = std::sqrt(b / c);
    est.bound = a + 2.0 * std::sqrt(b * c);
  } else {
    est.eps_star = 0.0;
    est.bound = a;
  }
  return est;
}

ErrorEstimate error_estimate(const Instance& inst, const OriginAssignment& state,
                             double tol) {
  const Matrix impr = kernels::pair_improvements(inst, state, tol);
  double sum = 0.0;
  double max = 0.0;
  for (double v : impr.data()) {
    sum += v;
    max = std::max(max, v);
  }
  return estimate_from_improvements(inst.size(), inst.total_load(), inst.bounds(),
                                    inst.max_l_max(), sum, max);
}

OriginAssignment gossip_start(const Instance& inst) {
  OriginAssignment local = OriginAssignment::local(inst);
  bool overloaded = false;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    overloaded = overloaded || local.loads[i] > inst.lf(i).capacity();
  }
  if (!overloaded) return local;
  return to_origin(inst, build_finite_solution(inst));
}

GossipResult run_gossip(const Instance& inst, const GossipConfig& cfg) {
  if (cfg.max_rounds < 1) {
    throw Error(ErrorKind::kInvalidArgument, "max_rounds must be >= 1");
  }
  const std::size_t m = inst.size();
  const double scale = std::max(inst.total_load(), 1e-300);
  const double tol = cfg.argmin_tol > 0.0 ? cfg.argmin_tol : 1e-10 * scale;
  const std::size_t period = cfg.estimator_period > 0 ? cfg.estimator_period : m;

  GossipResult result;
  result.state = gossip_start(inst);

  GossipTracePoint start;
  start.objective = objective(inst, result.state);
  start.estimate = m >= 2 ? error_estimate(inst, result.state, tol) : ErrorEstimate{};
  result.trace.push_back(start);
  if (m < 2 || start.estimate->bound <= cfg.stop_error) {
    result.status = RunStatus::kConverged;
    return result;
  }

  Rng rng(cfg.seed);
  result.status = RunStatus::kBudgetExceeded;
  for (std::size_t round = 1; round <= cfg.max_rounds; ++round) {
    const RoundOutcome out = gossip_round(inst, result.state, rng, tol);
    GossipTracePoint point;
    point.round = round;
    point.has_pair = true;
    point.initiator = out.initiator;
    point.partner = out.partner;
    point.objective = objective(inst, result.state);
    point.impr = out.impr;
    result.rounds = round;
    const bool estimate_now = round % period == 0 || round == cfg.max_rounds;
    if (estimate_now) point.estimate = error_estimate(inst, result.state, tol);
    result.trace.push_back(point);
    if (estimate_now && point.estimate->bound <= cfg.stop_error) {
      result.status = RunStatus::kConverged;
      break;
    }
  }
  return result;
}

}  // namespace geobalance
