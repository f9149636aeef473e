#include <doctest.h>

#include <cmath>

#include "geobalance/central.hpp"
#include "geobalance/error.hpp"
#include "geobalance/oracle.hpp"
#include "geobalance/rng.hpp"
#include "test_support.hpp"

using namespace geobalance;
using namespace geobalance::testing;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an exception");
  return ErrorKind::kInvalidArgument;
}

Instance batch3(std::vector<double> n, const Matrix& c) {
  std::vector<Server> servers;
  for (std::size_t i = 0; i < n.size(); ++i) {
    servers.push_back({std::to_string(i), n[i], LoadFunction::batch(1.0, 100.0)});
  }
  return Instance(std::move(servers), c);
}

// Minimizer of a one-dimensional function on a fine grid.
double grid_argmin(auto&& f, double lo, double hi, int steps = 200000) {
  double best_x = lo;
  double best = f(lo);
  for (int s = 1; s <= steps; ++s) {
    const double x = lo + (hi - lo) * s / steps;
    const double v = f(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace

TEST_CASE("build_finite_solution") {
  const Instance easy = batch_pair();
  const auto id = build_finite_solution(easy);
  CHECK(id.loads == easy.own_loads());
  CHECK(id.r == Matrix::square(2));

  const Instance tight({{"a", 10.0, LoadFunction::batch(1.0, 6.0)},
                        {"b", 0.0, LoadFunction::batch(1.0, 6.0)}},
                       uniform_latency(2, 1.0));
  const auto moved = build_finite_solution(tight);
  CHECK(moved.r(0, 1) == doctest::Approx(4.0));
  CHECK(moved.loads[0] == doctest::Approx(6.0));
  CHECK(moved.loads[1] == doctest::Approx(4.0));
  CHECK(is_feasible(tight, moved.loads));

  // Nearest servers with spare capacity are filled first.
  const Instance three({{"a", 10.0, LoadFunction::batch(1.0, 4.0)},
                        {"b", 0.0, LoadFunction::batch(1.0, 4.0)},
                        {"c", 0.0, LoadFunction::batch(1.0, 4.0)}},
                       latency_matrix({{0, 2, 1}, {2, 0, 1}, {1, 1, 0}}));
  const auto water = build_finite_solution(three);
  CHECK(water.r(0, 2) == doctest::Approx(4.0));
  CHECK(water.r(0, 1) == doctest::Approx(2.0));

  // Exactly full: every server ends at its l_max.
  const Instance full({{"a", 8.0, LoadFunction::batch(1.0, 4.0)},
                       {"b", 0.0, LoadFunction::batch(1.0, 4.0)}},
                      uniform_latency(2, 1.0));
  CHECK(is_feasible(full, build_finite_solution(full).loads));

  // Overload is caught as soon as the instance is built.
  CHECK(kind_of([] {
          Instance({{"a", 10.0, LoadFunction::batch(1.0, 8.0)}}, Matrix::square(1));
        }) == ErrorKind::kValidationError);
}

TEST_CASE("adjust") {
  SUBCASE("batch pair balances marginal costs") {
    const Instance inst = batch_pair();
    EdgeFlowState s = EdgeFlowState::local(inst);
    CHECK(adjust(inst, s, 0, 1, 1e-12) == doctest::Approx(4.0));
    CHECK(s.loads[0] == doctest::Approx(6.0));
    CHECK(s.loads[1] == doctest::Approx(4.0));
    CHECK(s.r(0, 1) == doctest::Approx(4.0));
  }
  SUBCASE("symmetric queuing pair splits evenly") {
    const Instance inst({{"a", 3.0, LoadFunction::queuing(4.0, 3.9)},
                         {"b", 0.0, LoadFunction::queuing(4.0, 3.9)}},
                        uniform_latency(2, 0.0));
    EdgeFlowState s = EdgeFlowState::local(inst);
    CHECK(adjust(inst, s, 0, 1, 1e-12) == doctest::Approx(1.5));
  }
  SUBCASE("prohibitive latency moves nothing") {
    const Instance inst = batch_pair(100.0);
    EdgeFlowState s = EdgeFlowState::local(inst);
    CHECK(adjust(inst, s, 0, 1, 1e-12) == 0.0);
    CHECK(s.loads == inst.own_loads());
  }
  SUBCASE("reverse transfers are cancelled first") {
    const Instance inst = batch_pair();
    EdgeFlowState s{Matrix::square(2), {2.0, 8.0}};
    s.r(0, 1) = 8.0;
    const double before = objective(inst, s);
    const double x = adjust(inst, s, 1, 0, 1e-12);
    CHECK(x == doctest::Approx(2.0));
    CHECK(s.r(0, 1) == doctest::Approx(6.0));
    CHECK(s.r(1, 0) == 0.0);
    CHECK(objective(inst, s) < before);
  }
}

TEST_CASE("adjust_back") {
  // Server k = 0 sent 6 to l = 1: loads (2, 8), c = 2.
  const Instance inst = batch3({8.0, 2.0}, uniform_latency(2, 2.0));
  EdgeFlowState s{Matrix::square(2), {2.0, 8.0}};
  s.r(0, 1) = 6.0;
  auto F = [](double x) {
    return 0.5 * (8 - x) * (8 - x) + 0.5 * (2 + x) * (2 + x) - 2 * x;
  };
  const double expected = grid_argmin(F, 0.0, 6.0);
  CHECK(expected == doctest::Approx(4.0).epsilon(1e-4));
  const double before = objective(inst, s);
  CHECK(adjust_back(inst, s, 1, 0, 1e-12) == doctest::Approx(4.0));
  CHECK(s.loads[0] == doctest::Approx(6.0));
  CHECK(s.loads[1] == doctest::Approx(4.0));
  CHECK(s.r(0, 1) == doctest::Approx(2.0));
  CHECK(objective(inst, s) <= before);

  EdgeFlowState none = EdgeFlowState::local(inst);
  CHECK(kind_of([&] { adjust_back(inst, none, 1, 0, 1e-12); }) == ErrorKind::kNoEdge);

  // Equal loads: the refunded latency alone makes returning load pay off.
  EdgeFlowState even{Matrix::square(2), {5.0, 5.0}};
  even.r(0, 1) = 3.0;
  const Instance inst2 = batch3({8.0, 2.0}, uniform_latency(2, 2.0));
  auto G = [](double x) {
    return 0.5 * (5 - x) * (5 - x) + 0.5 * (5 + x) * (5 + x) - 2 * x;
  };
  const double pinned = grid_argmin(G, 0.0, 3.0);
  CHECK(adjust_back(inst2, even, 1, 0, 1e-12) == doctest::Approx(pinned).epsilon(1e-4));
  CHECK(pinned > 0.0);
}

TEST_CASE("improve") {
  SUBCASE("two servers need no refunds") {
    const Instance inst = batch_pair();
    EdgeFlowState s = EdgeFlowState::local(inst);
    improve(inst, s, 0, 1, 1e-12, 1e-9);
    CHECK(s.loads[0] == doctest::Approx(6.0));
    CHECK(s.loads[1] == doctest::Approx(4.0));
  }
  SUBCASE("overloading a receiver triggers a refund upstream") {
    const Instance inst = batch3({10.0, 10.0, 0.0},
                                 latency_matrix({{0, 2, 2}, {2, 0, 1}, {2, 1, 0}}));
    EdgeFlowState s{Matrix::square(3), {6.0, 10.0, 4.0}};
    s.r(0, 2) = 4.0;
    const double before = objective(inst, s);
    improve(inst, s, 1, 2, 1e-12, 1e-9);
    CHECK(s.loads[0] == doctest::Approx(7.25));
    CHECK(s.loads[1] == doctest::Approx(7.5));
    CHECK(s.loads[2] == doctest::Approx(5.25));
    CHECK(s.r(0, 2) == doctest::Approx(2.75));
    CHECK(objective(inst, s) < before);
    CHECK(check_kkt(inst, s, 1e-9).violated_kkt_edges.empty());
  }
  SUBCASE("balanced pair stays put") {
    const Instance inst = batch_pair();
    EdgeFlowState s{Matrix::square(2), {6.0, 4.0}};
    s.r(0, 1) = 4.0;
    const EdgeFlowState copy = s;
    CHECK(improve(inst, s, 0, 1, 1e-12, 1e-9) == 0.0);
    CHECK(s.r == copy.r);
    CHECK(s.loads == copy.loads);
  }
}

TEST_CASE("solve_central on closed-form fixtures") {
  CentralConfig cfg;
  cfg.target_error = 1e-6;
  for (bool flow : {false, true}) {
    cfg.flow_every_iteration = flow;
    const auto batch = solve_central(batch_pair(), cfg);
    CHECK(batch.status == RunStatus::kConverged);
    CHECK(batch.state.loads[0] == doctest::Approx(6.0).epsilon(1e-6));
    CHECK(batch.state.loads[1] == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(std::abs(objective(batch_pair(), batch.state) - 34.0) <= 1e-4);

    const auto q = solve_central(queuing_pair(), cfg);
    CHECK(std::abs(q.state.loads[0] - 0.75) <= 1e-5);
    CHECK(std::abs(q.state.loads[1] - 0.75) <= 1e-5);
    CHECK(std::abs(objective(queuing_pair(), q.state) - 1.2) <= 1e-4);
  }
  const Instance single({{"a", 3.0, LoadFunction::batch(1.0, 5.0)}}, Matrix::square(1));
  const auto one = solve_central(single, cfg);
  CHECK(one.iterations == 0);
  CHECK(one.state.loads == std::vector<double>{3.0});
}

TEST_CASE("solve_central configuration checks and budget") {
  CentralConfig cfg;
  cfg.target_error = 0.0;
  CHECK(kind_of([&] { solve_central(batch_pair(), cfg); }) == ErrorKind::kInvalidArgument);
  cfg.target_error = 1e-6;
  cfg.max_iterations = 0;
  CHECK(kind_of([&] { solve_central(batch_pair(), cfg); }) == ErrorKind::kInvalidArgument);

  Rng rng(41);
  const Instance inst = random_instance(rng, 6, Mix::kAnalytic);
  cfg.max_iterations = 1;
  cfg.target_error = 1e-12;
  const auto r = solve_central(inst, cfg);
  CHECK(r.status == RunStatus::kBudgetExceeded);
  CHECK(r.iterations == 1);
  CHECK(is_feasible(inst, r.state.loads));
}

TEST_CASE("relative target error scales with the total load") {
  CentralConfig cfg;
  cfg.target_error = 1e-7;
  cfg.relative = true;
  const auto r = solve_central(batch_pair(), cfg);
  CHECK(r.target_error == doctest::Approx(1e-6));
}

TEST_CASE("central runs on random instances") {
  Rng rng(42);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t m = 3 + rng.index(4);
    const Instance inst = random_instance(rng, m);
    const double l_tot = inst.total_load();
    CentralConfig cfg;
    cfg.target_error = 1e-5 * l_tot;
    cfg.flow_every_iteration = trial % 2 == 1;
    const auto result = solve_central(inst, cfg);
    CHECK(result.status == RunStatus::kConverged);

    for (std::size_t t = 1; t < result.trace.size(); ++t) {
      CHECK(result.trace[t].objective <=
            result.trace[t - 1].objective + 1e-12 * std::max(1.0, l_tot));
    }
    const double threshold = cfg.target_error / (l_tot * m);
    const auto report = delta_matrix(inst, result.state.loads);
    CHECK(report.max_delta <= threshold * (1 + 1e-9));

    const double optimum = solve_oracle(inst).objective;
    CHECK(objective(inst, result.state) - optimum <= cfg.target_error + 1e-9);

    // Iteration budget of the convergence analysis with C = 64.
    const double e_i = result.trace.front().objective - optimum;
    const auto& u = inst.bounds();
    const double budget = 64.0 * l_tot * l_tot * m * m * e_i *
                          (u.u1 + inst.max_l_max() * u.u2) /
                          (cfg.target_error * cfg.target_error);
    CHECK(static_cast<double>(result.iterations) <= std::max(budget, 1.0));
  }
}

TEST_CASE("improve keeps the edge conditions and an acyclic edge set") {
  Rng rng(43);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t m = 3 + rng.index(4);
    const Instance inst = random_instance(rng, m, Mix::kAnalytic);
    const double l_tot = inst.total_load();
    const double threshold = 1e-5 * l_tot / (l_tot * m);
    const double kkt_tol = threshold / 10.0;
    const auto& u = inst.bounds();
    const double progress_scale = 16.0 * u.u1 + 8.0 * inst.max_l_max() * u.u2;

    EdgeFlowState s = build_finite_solution(inst);
    apply_network_flow(inst, s);
    for (int it = 0; it < 500; ++it) {
      const auto report = delta_matrix(inst, s.loads);
      if (report.max_delta <= threshold) break;
      const double before = objective(inst, s);
      improve(inst, s, report.argmax_i, report.argmax_j, 1e-10 * l_tot, kkt_tol);
      const double after = objective(inst, s);
      const double d = report.max_delta;
      CHECK(before - after >= 0.5 * d * d / progress_scale - 1e-9 * l_tot);

      const auto kkt = check_kkt(inst, s, kkt_tol * (1 + 1e-6));
      CHECK(kkt.violated_kkt_edges.empty());
      bool acyclic = true;
      topological_order(s.r, positive_threshold(inst), &acyclic);
      CHECK(acyclic);
    }
  }
}
