#include <doctest.h>

#include <cmath>

#include "geobalance/error.hpp"
#include "geobalance/flow.hpp"
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

FlowProblem three_node(double c13) {
  FlowProblem p{{-10.0, 5.0, 5.0}, latency_matrix({{0, 1, c13}, {1, 0, 1}, {c13, 1, 0}})};
  return p;
}

Instance swap_instance() {
  return Instance({{"a", 5.0, LoadFunction::batch(1.0, 20.0)},
                   {"b", 5.0, LoadFunction::batch(1.0, 20.0)}},
                  uniform_latency(2, 1.0));
}

OriginAssignment swapped() {
  OriginAssignment oa{Matrix::square(2), {}};
  oa.r(0, 1) = 5.0;
  oa.r(1, 0) = 5.0;
  oa.refresh_loads();
  return oa;
}

}  // namespace

TEST_CASE("relaying through a middle server beats the direct edge") {
  const auto sol = min_cost_flow(three_node(3.0));
  CHECK(sol.flow(0, 1) == doctest::Approx(10.0));
  CHECK(sol.flow(1, 2) == doctest::Approx(5.0));
  CHECK(sol.flow(0, 2) == 0.0);
  CHECK(sol.total_cost == doctest::Approx(15.0));
}

TEST_CASE("direct edges win when the triangle inequality holds") {
  const auto sol = min_cost_flow(three_node(1.5));
  CHECK(sol.flow(0, 1) == doctest::Approx(5.0));
  CHECK(sol.flow(0, 2) == doctest::Approx(5.0));
  CHECK(sol.flow(1, 2) == 0.0);
  CHECK(sol.total_cost == doctest::Approx(12.5));
}

TEST_CASE("zero demands give an empty flow") {
  const auto sol = min_cost_flow({{0.0, 0.0, 0.0}, uniform_latency(3, 1.0)});
  CHECK(sol.total_cost == 0.0);
  CHECK(sol.flow == Matrix::square(3));
}

TEST_CASE("unbalanced problems are rejected") {
  CHECK(kind_of([] { min_cost_flow({{-1.0, 2.0}, uniform_latency(2, 1.0)}); }) ==
        ErrorKind::kUnbalanced);
}

TEST_CASE("optimize_network_flow uses b = target - n") {
  const Instance inst = batch_pair();
  const auto sol = optimize_network_flow(inst, std::vector<double>{6.0, 4.0});
  CHECK(sol.flow(0, 1) == doctest::Approx(4.0));
  CHECK(sol.total_cost == doctest::Approx(8.0));
}

TEST_CASE("min-cost flow matches exhaustive enumeration") {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 2 + rng.index(3);
    const FlowProblem p = random_flow_problem(rng, m);
    const auto sol = min_cost_flow(p);
    const double reference = brute_force_flow_cost(p);
    CHECK(std::abs(sol.total_cost - reference) <= 1e-6 * std::max(1.0, reference));
    std::size_t edges = 0;
    CHECK(support_is_forest(sol.flow, 1e-12, &edges));
    CHECK(edges + 1 <= m);
    for (std::size_t i = 0; i < m; ++i) {
      double net = 0.0;
      for (std::size_t k = 0; k < m; ++k) net += sol.flow(k, i) - sol.flow(i, k);
      CHECK(net == doctest::Approx(p.demand[i]).epsilon(1e-9));
      for (std::size_t k = 0; k < m; ++k) CHECK(sol.flow(i, k) >= 0.0);
    }
  }
}

TEST_CASE("zero-cost cycles are removed from the support") {
  // All edges cost the same, so many optimal flows exist; the reported one
  // must still be a forest.
  FlowProblem p{{-3.0, -3.0, 3.0, 3.0}, uniform_latency(4, 1.0)};
  const auto sol = min_cost_flow(p);
  CHECK(sol.total_cost == doctest::Approx(6.0));
  CHECK(support_is_forest(sol.flow, 1e-12));
}

TEST_CASE("negative cycle detection") {
  const Instance inst = swap_instance();
  const auto cycle = find_negative_cycle(inst, swapped());
  REQUIRE(cycle.has_value());
  CHECK(cycle_gain(inst, *cycle) == doctest::Approx(-2.0));
  CHECK(cycle_bottleneck(swapped(), *cycle) == doctest::Approx(5.0));

  CHECK_FALSE(find_negative_cycle(inst, OriginAssignment::local(inst)).has_value());

  const Instance pair = batch_pair();
  const auto flow = optimize_network_flow(pair, std::vector<double>{6.0, 4.0});
  const auto oa = to_origin(pair, EdgeFlowState{flow.flow, {6.0, 4.0}});
  CHECK_FALSE(find_negative_cycle(pair, oa).has_value());
}

TEST_CASE("cancelling the symmetric swap") {
  const Instance inst = swap_instance();
  const OriginAssignment before = swapped();
  const auto cycle = find_negative_cycle(inst, before);
  REQUIRE(cycle.has_value());
  const OriginAssignment after = cancel_cycle(before, *cycle);
  CHECK(after.r(0, 0) == doctest::Approx(5.0));
  CHECK(after.r(1, 1) == doctest::Approx(5.0));
  CHECK(after.r(0, 1) == 0.0);
  CHECK(after.loads == before.loads);
  CHECK(objective(inst, before) - objective(inst, after) == doctest::Approx(10.0));
}

TEST_CASE("malformed cycles") {
  const OriginAssignment local = OriginAssignment::local(swap_instance());
  CHECK(kind_of([&] { cancel_cycle(local, {{0, 1}, {1, 0}}); }) == ErrorKind::kInvalidCycle);
  CHECK(kind_of([&] { cancel_cycle(local, {{0, 0}}); }) == ErrorKind::kInvalidCycle);
  CHECK(kind_of([&] { cancel_cycle(local, {{0, 0}, {5, 0}}); }) ==
        ErrorKind::kInvalidCycle);
}

TEST_CASE("three-server rotation") {
  const double x = 5.0 / 3.0;
  const Instance inst({{"0", 2.0, LoadFunction::batch(1.0, 10.0)},
                       {"1", 2.0, LoadFunction::batch(1.0, 10.0)},
                       {"2", 2.0, LoadFunction::batch(1.0, 10.0)}},
                      latency_matrix({{0, 2, x}, {x, 0, 2}, {2, x, 0}}));
  OriginAssignment oa{Matrix::square(3), {}};
  oa.r(0, 1) = 2.0;
  oa.r(1, 2) = 2.0;
  oa.r(2, 0) = 2.0;
  oa.refresh_loads();
  const ExchangeCycle rotation{{1, 0}, {2, 1}, {0, 2}};
  CHECK(cycle_gain(inst, rotation) == doctest::Approx(-1.0));
  const auto after = cancel_cycle(oa, rotation);
  CHECK(objective(inst, oa) - objective(inst, after) == doctest::Approx(2.0));
}

TEST_CASE("repeated cancellation keeps loads and origin totals") {
  Rng rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    const Instance inst = random_instance(rng, 2 + rng.index(5));
    OriginAssignment oa = random_assignment(inst, rng);
    const OriginAssignment start = oa;
    double previous = objective(inst, oa);
    std::size_t cancelled = 0;
    while (auto cycle = find_negative_cycle(inst, oa)) {
      const double bottleneck = cycle_bottleneck(oa, *cycle);
      oa = cancel_cycle(oa, *cycle);
      const double now = objective(inst, oa);
      CHECK(previous - now >= 1e-9 * inst.max_latency() * bottleneck * 0.5);
      previous = now;
      REQUIRE(++cancelled < 1000);
    }
    CHECK(oa.loads == start.loads);
    for (std::size_t k = 0; k < inst.size(); ++k) {
      double row = 0.0;
      for (std::size_t i = 0; i < inst.size(); ++i) {
        row += oa.r(k, i);
        CHECK(oa.r(k, i) >= 0.0);
      }
      CHECK(std::abs(row - inst.own_load(k)) <= 1e-12 * std::max(1.0, inst.total_load()));
    }
  }
}

TEST_CASE("flow-optimal states have no negative exchange cycle") {
  Rng rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const Instance inst = random_instance(rng, 2 + rng.index(5));
    const OriginAssignment oa = random_assignment(inst, rng);
    const auto flow = optimize_network_flow(inst, oa.loads);
    const auto origin = to_origin(inst, EdgeFlowState{flow.flow, oa.loads});
    CHECK_FALSE(find_negative_cycle(inst, origin).has_value());
  }
}
