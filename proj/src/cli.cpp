#include "geobalance/cli.hpp"

#include <fmt/format.h>

#include <cmath>
#include <ostream>

#include <CLI11.hpp>

#include "geobalance/central.hpp"
#include "geobalance/error.hpp"
#include "geobalance/flow.hpp"
#include "geobalance/gossip.hpp"
#include "geobalance/io.hpp"
#include "geobalance/loadfn.hpp"
#include "geobalance/oracle.hpp"

namespace geobalance {

namespace {

std::string num(double x) { return fmt::format("{:.17g}", x); }

Instance load_instance(const RunSpec& spec) {
  if (spec.instance_path.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "--instance is required");
  }
  return parse_instance(read_file(spec.instance_path));
}

// Writes the routing file if requested, otherwise prints it when `echo`.
void emit_routing(const RunSpec& spec, const Routing& routing, bool echo,
                  std::ostream& out) {
  const std::string text = routing_json(routing);
  if (!spec.output_path.empty()) {
    write_file(spec.output_path, text);
  } else if (echo) {
    out << text;
  }
}

Routing edge_flow_routing(const Instance& inst, const EdgeFlowState& state) {
  return {state.r, state.loads, objective(inst, state), "edge_flow"};
}

Routing origin_routing(const Instance& inst, const OriginAssignment& state) {
  return {state.r, state.loads, objective(inst, state), "origin"};
}

void print_report(const OptimalityReport& report, std::ostream& out) {
  out << "max_delta: " << num(report.max_delta) << "\n"
      << "bound: " << num(report.bound_e) << "\n";
}

int run_central(const RunSpec& spec, const Instance& inst, std::ostream& out) {
  CentralConfig cfg;
  cfg.target_error = spec.target_error;
  cfg.relative = spec.relative;
  cfg.flow_every_iteration = spec.algorithm == "central-flow";
  if (spec.max_steps) cfg.max_iterations = *spec.max_steps;
  const CentralResult result = solve_central(inst, cfg);
  emit_routing(spec, edge_flow_routing(inst, result.state), false, out);
  if (!spec.trace_path.empty()) {
    write_file(spec.trace_path, central_trace_csv(result.trace));
  }
  out << "algorithm: " << spec.algorithm << "\n"
      << "status: " << to_string(result.status) << "\n"
      << "objective: " << num(objective(inst, result.state)) << "\n";
  print_report(delta_matrix(inst, result.state.loads), out);
  out << "iterations: " << result.iterations << "\n";
  switch (result.status) {
    case RunStatus::kConverged: return kExitOk;
    case RunStatus::kBudgetExceeded: return kExitBudget;
    case RunStatus::kStalled: return kExitError;
  }
  return kExitError;
}

int run_gossip_command(const RunSpec& spec, const Instance& inst,
                       std::ostream& out) {
  GossipConfig cfg;
  cfg.seed = spec.seed;
  cfg.stop_error =
      spec.relative ? spec.target_error * inst.total_load() : spec.target_error;
  if (spec.max_steps) cfg.max_rounds = *spec.max_steps;
  const GossipResult result = run_gossip(inst, cfg);
  emit_routing(spec, origin_routing(inst, result.state), false, out);
  if (!spec.trace_path.empty()) {
    write_file(spec.trace_path, gossip_trace_csv(result.trace));
  }
  out << "algorithm: gossip\n"
      << "status: " << to_string(result.status) << "\n"
      << "objective: " << num(objective(inst, result.state)) << "\n";
  print_report(delta_matrix(inst, result.state.loads), out);
  for (auto it = result.trace.rbegin(); it != result.trace.rend(); ++it) {
    if (it->estimate) {
      out << "estimate_bound: " << num(it->estimate->bound) << "\n";
      break;
    }
  }
  out << "rounds: " << result.rounds << "\n";
  return result.status == RunStatus::kConverged ? kExitOk : kExitBudget;
}

int run_oracle_command(const RunSpec& spec, const Instance& inst,
                       std::ostream& out) {
  const OracleSolution solution = solve_oracle(inst);
  emit_routing(spec, origin_routing(inst, solution.assignment), true, out);
  return kExitOk;
}

int run_flow_command(const RunSpec& spec, const Instance& inst, std::ostream& out) {
  if (spec.loads_path.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "--loads is required for flow");
  }
  const std::vector<double> target = parse_loads(read_file(spec.loads_path));
  if (target.size() != inst.size()) {
    throw Error(ErrorKind::kInvalidArgument, "target loads must have one entry per server");
  }
  require_feasible(inst, target);
  const FlowSolution flow = optimize_network_flow(inst, target);
  const EdgeFlowState state{flow.flow, target};
  emit_routing(spec, edge_flow_routing(inst, state), true, out);
  return kExitOk;
}

// Loads stored in a routing file must agree with its transfers.
void require_consistent(const Instance& inst, const Routing& routing) {
  const std::size_t m = inst.size();
  if (routing.r.rows() != m) {
    throw Error(ErrorKind::kValidationError, "routing does not match the instance size");
  }
  const double tol = 1e-9 * std::max(1.0, inst.total_load());
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < m; ++i) {
    double implied = 0.0;
    if (routing.representation == "origin") {
      for (std::size_t k = 0; k < m; ++k) implied += routing.r(k, i);
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) row += routing.r(i, j);
      if (std::abs(row - inst.own_load(i)) > tol) {
        problems.push_back("row " + std::to_string(i) + " does not sum to n");
      }
    } else {
      implied = inst.own_load(i);
      for (std::size_t k = 0; k < m; ++k) {
        if (k == i) continue;
        implied += routing.r(k, i) - routing.r(i, k);
      }
    }
    if (std::abs(implied - routing.loads[i]) > tol) {
      problems.push_back("load of server " + inst.server(i).id +
                         " disagrees with the transfers");
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (routing.r(i, j) < 0.0) {
        problems.push_back("negative transfer r[" + std::to_string(i) + "][" +
                           std::to_string(j) + "]");
      }
    }
  }
  if (!problems.empty()) {
    const std::string message = "inconsistent routing: " + problems.front();
    throw Error(ErrorKind::kValidationError, message, std::move(problems));
  }
}

int run_check(const RunSpec& spec, const Instance& inst, std::ostream& out) {
  if (spec.routing_path.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "--routing is required for check");
  }
  const Routing routing = parse_routing(read_file(spec.routing_path));
  require_consistent(inst, routing);
  require_feasible(inst, routing.loads);
  OptimalityReport report;
  double value = 0.0;
  if (routing.representation == "origin") {
    const OriginAssignment state{routing.r, routing.loads};
    value = objective(inst, state);
    report = check_kkt(inst, state, spec.target_error);
  } else {
    const EdgeFlowState state{routing.r, routing.loads};
    value = objective(inst, state);
    report = check_kkt(inst, state, spec.target_error);
  }
  out << "objective: " << num(value) << "\n";
  print_report(report, out);
  out << "violated_edges: " << report.violated_kkt_edges.size() << "\n";
  const auto triangle = check_triangle(inst);
  const auto epsilon = check_efficient_epsilon(inst);
  if (!triangle.empty()) {
    out << "warning: " << triangle.size() << " latency triples violate the triangle inequality\n";
  }
  if (!epsilon.empty()) {
    out << "warning: " << epsilon.size() << " pairs violate efficient epsilon-load processing\n";
  }
  out << "KKT: " << (report.passed ? "pass" : "fail") << "\n";
  return report.passed ? kExitOk : kExitError;
}

int run_fit(const RunSpec& spec, std::ostream& out) {
  if (spec.samples_path.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "--samples is required for fit");
  }
  const LoadFunction lf = fit_empirical(parse_samples(read_file(spec.samples_path)));
  const DerivativeBounds bounds = derivative_bounds(lf);
  const std::string text = load_function_json(lf) + "\n";
  if (!spec.output_path.empty()) write_file(spec.output_path, text);
  out << text << "U1: " << num(bounds.u1) << "\n"
      << "U2: " << num(bounds.u2) << "\n";
  return kExitOk;
}

}  // namespace

int run(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  try {
    if (spec.command == "fit") return run_fit(spec, out);
    const Instance inst = load_instance(spec);
    if (spec.command == "check") return run_check(spec, inst, out);
    if (spec.command == "oracle") return run_oracle_command(spec, inst, out);
    if (spec.command == "flow") return run_flow_command(spec, inst, out);
    if (spec.command != "solve") {
      throw Error(ErrorKind::kInvalidArgument, "unknown command " + spec.command);
    }
    if (spec.algorithm == "central" || spec.algorithm == "central-flow") {
      return run_central(spec, inst, out);
    }
    if (spec.algorithm == "gossip") return run_gossip_command(spec, inst, out);
    if (spec.algorithm == "oracle") return run_oracle_command(spec, inst, out);
    if (spec.algorithm == "flow") return run_flow_command(spec, inst, out);
    throw Error(ErrorKind::kInvalidArgument, "unknown algorithm " + spec.algorithm);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    for (const auto& d : e.details()) err << "  - " << d << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latency-aware load balancing across geographically distributed servers"};
  app.require_subcommand(1);
  RunSpec spec;
  std::size_t max_steps = 0;

  auto add_instance = [&](CLI::App* sub) {
    sub->add_option("--instance", spec.instance_path, "Instance JSON file")->required();
  };
  auto add_output = [&](CLI::App* sub, const char* what = "Routing output file") {
    sub->add_option("--output", spec.output_path, what);
  };

  CLI::App* solve = app.add_subcommand("solve", "Balance an instance");
  add_instance(solve);
  add_output(solve);
  solve->add_option("--algorithm", spec.algorithm, "Solver")
      ->check(CLI::IsMember({"central", "central-flow", "gossip", "oracle", "flow"}));
  solve->add_option("--target-error", spec.target_error, "Target absolute error");
  solve->add_flag("--relative", spec.relative, "Target error is relative to the total load");
  solve->add_option("--seed", spec.seed, "Gossip seed");
  solve->add_option("--max-steps", max_steps, "Iteration or round budget");
  solve->add_option("--trace", spec.trace_path, "Trace CSV file");
  solve->add_option("--loads", spec.loads_path, "Target loads (flow algorithm)");

  CLI::App* oracle = app.add_subcommand("oracle", "Reference optimum (small instances)");
  add_instance(oracle);
  add_output(oracle);

  CLI::App* flow = app.add_subcommand("flow", "Cheapest transfers realizing given loads");
  add_instance(flow);
  add_output(flow);
  flow->add_option("--loads", spec.loads_path, "Target loads JSON")->required();

  CLI::App* check = app.add_subcommand("check", "Optimality certificate of a routing");
  add_instance(check);
  check->add_option("--routing", spec.routing_path, "Routing JSON")->required();
  check->add_option("--target-error", spec.target_error, "KKT tolerance");

  CLI::App* fit = app.add_subcommand("fit", "Fit an empirical load function");
  fit->add_option("--samples", spec.samples_path, "Samples (JSON or CSV)")->required();
  add_output(fit, "Load-function descriptor output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }
  for (CLI::App* sub : {solve, oracle, flow, check, fit}) {
    if (sub->parsed()) spec.command = sub->get_name();
  }
  if (solve->count("--max-steps") > 0) spec.max_steps = max_steps;
  return run(spec, out, err);
}

}  // namespace geobalance
