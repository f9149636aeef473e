#include <doctest.h>

#include <cmath>
#include <numeric>

#include "geobalance/central.hpp"
#include "geobalance/error.hpp"
#include "geobalance/gossip.hpp"
#include "geobalance/oracle.hpp"
#include "test_support.hpp"

using namespace geobalance;
using namespace geobalance::testing;

TEST_CASE("oracle closed forms") {
  const auto batch = solve_oracle(batch_pair());
  CHECK(batch.assignment.loads[0] == doctest::Approx(6.0).epsilon(1e-9));
  CHECK(batch.assignment.loads[1] == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(std::abs(batch.objective - 34.0) <= 1e-6);

  const auto q = solve_oracle(queuing_pair());
  CHECK(std::abs(q.assignment.loads[0] - 0.75) <= 1e-8);
  CHECK(std::abs(q.assignment.loads[1] - 0.75) <= 1e-8);

  const Instance single({{"a", 3.5, LoadFunction::queuing(5.0, 4.5)}}, Matrix::square(1));
  const auto one = solve_oracle(single);
  CHECK(one.assignment.loads[0] == 3.5);
}

TEST_CASE("oracle size cap") {
  std::vector<Server> servers;
  for (int i = 0; i < 9; ++i) {
    servers.push_back({std::to_string(i), 1.0, LoadFunction::batch(1.0, 20.0)});
  }
  const Instance inst(std::move(servers), uniform_latency(9, 1.0));
  try {
    solve_oracle(inst);
    FAIL("nine servers accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kCapExceeded);
  }
  OracleOptions wide;
  wide.max_servers = 9;
  CHECK(solve_oracle(inst, wide).assignment.loads[0] == doctest::Approx(1.0));
}

TEST_CASE("simplex projection") {
  const auto p = project_simplex({0.2, 0.9, -0.4}, 1.0);
  CHECK(p[0] == doctest::Approx(0.15));
  CHECK(p[1] == doctest::Approx(0.85));
  CHECK(p[2] == 0.0);

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.index(6));
    for (double& x : v) x = rng.uniform(-5.0, 5.0);
    const double total = rng.uniform(0.0, 1e6);
    const auto x = project_simplex(v, total);
    CHECK(std::accumulate(x.begin(), x.end(), 0.0) == doctest::Approx(total).epsilon(1e-14));
    for (double xi : x) CHECK(xi >= 0.0);
  }
}

TEST_CASE("oracle optima satisfy the optimality conditions and are unique") {
  Rng rng(21);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t m = 2 + rng.index(5);
    const Instance inst = random_instance(rng, m);
    const auto a = solve_oracle(inst);
    CHECK(check_kkt(inst, a.assignment, 1e-6).passed);
    CHECK(is_feasible(inst, a.assignment.loads));
    for (std::size_t k = 0; k < m; ++k) {
      double row = 0.0;
      for (std::size_t i = 0; i < m; ++i) row += a.assignment.r(k, i);
      CHECK(row == doctest::Approx(inst.own_load(k)).epsilon(1e-12));
    }

    OracleOptions other;
    other.start = OracleStart::kLocal;
    const auto b = solve_oracle(inst, other);
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(relative_load_gap(a.assignment.loads[i], b.assignment.loads[i],
                              inst.total_load()) <= 1e-6);
    }
    CHECK(std::abs(a.objective - b.objective) <= 1e-9 * std::max(1.0, a.objective));
  }
}

TEST_CASE("error graph examples") {
  const Instance inst = batch_pair();
  const OriginAssignment local = OriginAssignment::local(inst);
  OriginAssignment opt{Matrix::square(2), {6.0, 4.0}};
  opt.r(0, 0) = 6.0;
  opt.r(0, 1) = 4.0;

  const ErrorGraph g = build_error_graph(inst, local, opt);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].from == 0);
  CHECK(g.edges[0].to == 1);
  CHECK(g.edges[0].origin == 0);
  CHECK(g.edges[0].weight == doctest::Approx(4.0));
  CHECK(g.succ(0) == std::vector<std::size_t>{0});
  CHECK(g.prec(1) == std::vector<std::size_t>{0});
  CHECK(g.succ(1).empty());
  CHECK(check_no_negative_cycles(inst, g));

  const ErrorGraph empty = build_error_graph(inst, opt, opt);
  CHECK(empty.edges.empty());
  CHECK(check_no_negative_cycles(inst, empty));

  // Two origins swapped their requests: undoing the swap saves 2c.
  const Instance even({{"a", 5.0, LoadFunction::batch(1.0, 100.0)},
                       {"b", 5.0, LoadFunction::batch(1.0, 100.0)}},
                      uniform_latency(2, 2.0));
  OriginAssignment swapped{Matrix::square(2), {5.0, 5.0}};
  swapped.r(0, 0) = 3.0;
  swapped.r(0, 1) = 2.0;
  swapped.r(1, 1) = 3.0;
  swapped.r(1, 0) = 2.0;
  const ErrorGraph cyc = build_error_graph(even, swapped, OriginAssignment::local(even));
  REQUIRE(cyc.edges.size() == 2);
  CHECK(cyc.edges[0].from != cyc.edges[1].from);
  CHECK(cyc.edges[0].origin != cyc.edges[1].origin);
  CHECK_FALSE(check_no_negative_cycles(even, cyc));
}

TEST_CASE("error graphs are minimal and reach the optimal loads") {
  Rng rng(22);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t m = 3 + rng.index(4);
    const Instance inst = random_instance(rng, m);
    const OriginAssignment state = random_assignment(inst, rng);
    const auto opt = solve_oracle(inst);
    const ErrorGraph g = build_error_graph(inst, state, opt.assignment);

    std::vector<double> loads = state.loads;
    for (const auto& e : g.edges) {
      CHECK(e.weight > 0.0);
      loads[e.from] -= e.weight;
      loads[e.to] += e.weight;
      for (const auto& f : g.edges) {
        CHECK_FALSE((f.origin == e.origin && f.from == e.to));
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(std::abs(loads[i] - opt.assignment.loads[i]) <= 1e-9 * std::max(1.0, inst.total_load()));
    }

    // A state whose routing is optimal for its loads has no improving cycle.
    CentralConfig cfg;
    cfg.target_error = 1e-4 * inst.total_load();
    const auto central = solve_central(inst, cfg);
    const OriginAssignment routed = to_origin(inst, central.state);
    CHECK(check_no_negative_cycles(inst, build_error_graph(inst, routed, opt.assignment)));
  }
}

TEST_CASE("converged gossip servers stay within the per-server bound") {
  Rng rng(23);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t m = 3 + rng.index(4);
    const Instance inst = random_instance(rng, m, Mix::kAnalytic);
    const auto opt = solve_oracle(inst);
    GossipConfig cfg;
    cfg.seed = 100 + trial;
    cfg.max_rounds = 64 * m * m * m;
    const auto run = run_gossip(inst, cfg);
    const ErrorGraph g = build_error_graph(inst, run.state, opt.assignment);
    if (!check_no_negative_cycles(inst, g)) continue;
    const double tol = 1e-10 * inst.total_load();
    const auto est = error_estimate(inst, run.state, tol);
    const auto& u = inst.bounds();
    const double eps = est.eps_star;
    const double bound =
        eps > 0.0 ? (6 * u.u1 + 3 * inst.max_l_max() * u.u2) / eps * est.impr_max + m * eps
                  : 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double gap = inst.lf(i).value(run.state.loads[i]) -
                         inst.lf(i).value(opt.assignment.loads[i]);
      CHECK(gap <= bound + 1e-6);
    }
  }
}
