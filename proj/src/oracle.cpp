#include "geobalance/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "geobalance/error.hpp"

namespace geobalance {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> column_sums(const Matrix& r) {
  std::vector<double> loads(r.cols(), 0.0);
  for (std::size_t k = 0; k < r.rows(); ++k) {
    for (std::size_t i = 0; i < r.cols(); ++i) loads[i] += r(k, i);
  }
  return loads;
}

double assignment_cost(const Instance& inst, const Matrix& r,
                       const std::vector<double>& loads) {
  double cost = 0.0;
  for (std::size_t i = 0; i < inst.size(); ++i) cost += inst.lf(i).total(loads[i]);
  for (std::size_t k = 0; k < inst.size(); ++k) {
    for (std::size_t i = 0; i < inst.size(); ++i) cost += inst.latency(k, i) * r(k, i);
  }
  return cost;
}

bool within_capacity(const Instance& inst, const std::vector<double>& loads) {
  for (std::size_t i = 0; i < inst.size(); ++i) {
    if (loads[i] > inst.lf(i).capacity()) return false;
  }
  return true;
}

Matrix proportional_start(const Instance& inst) {
  const std::size_t m = inst.size();
  double capacity = 0.0;
  for (std::size_t i = 0; i < m; ++i) capacity += inst.lf(i).capacity();
  Matrix r = Matrix::square(m);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      r(k, i) = inst.own_load(k) * inst.lf(i).capacity() / capacity;
    }
  }
  return r;
}

void gradient_phase(const Instance& inst, Matrix& r, std::size_t iterations) {
  const std::size_t m = inst.size();
  std::vector<double> loads = column_sums(r);
  double cost = assignment_cost(inst, r, loads);
  double max_own = 0.0;
  for (std::size_t k = 0; k < m; ++k) max_own = std::max(max_own, inst.own_load(k));

  for (std::size_t t = 0; t < iterations; ++t) {
    std::vector<double> g(m);
    double spread = 0.0;
    for (std::size_t i = 0; i < m; ++i) g[i] = inst.lf(i).marginal(loads[i]);
    for (std::size_t k = 0; k < m; ++k) {
      double lo = kInf;
      double hi = -kInf;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = inst.latency(k, i) + g[i];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
      spread = std::max(spread, hi - lo);
    }
    if (!(spread > 0.0)) return;
    double step = max_own / spread / std::sqrt(static_cast<double>(t) + 1.0);
    for (int attempt = 0; attempt < 40; ++attempt, step *= 0.5) {
      Matrix next = r;
      for (std::size_t k = 0; k < m; ++k) {
        std::vector<double> row(m);
        for (std::size_t i = 0; i < m; ++i) {
          row[i] = r(k, i) - step * (inst.latency(k, i) + g[i]);
        }
        row = project_simplex(std::move(row), inst.own_load(k));
        std::copy(row.begin(), row.end(), next.row(k).begin());
      }
      std::vector<double> next_loads = column_sums(next);
      if (!within_capacity(inst, next_loads)) continue;
      const double next_cost = assignment_cost(inst, next, next_loads);
      if (next_cost <= cost) {
        r = std::move(next);
        loads = std::move(next_loads);
        cost = next_cost;
        break;
      }
    }
  }
}

// Residual graph of the refinement phase. Node ids: origins 0..m-1,
// servers m..2m-1, sink 2m.
enum class ArcKind { kAssign, kUnassign, kToSink, kFromSink };

struct Arc {
  ArcKind kind;
  std::size_t from;
  std::size_t to;
  std::size_t origin;
  std::size_t server;
  double cost;
};

class Refiner {
 public:
  Refiner(const Instance& inst, Matrix& r) : inst_(inst), r_(r), m_(inst.size()) {
    const double l_tot = std::max(1.0, inst.total_load());
    threshold_ = 1e-15 * l_tot;
    loads_ = column_sums(r_);
    double scale = std::max(1.0, inst.max_latency());
    for (std::size_t i = 0; i < m_; ++i) {
      scale = std::max(scale, std::abs(inst.lf(i).marginal(loads_[i])));
    }
    hop_tol_ = 1e-13 * scale;
  }

  void run(std::size_t max_steps) {
    for (std::size_t s = 0; s < max_steps; ++s) {
      build_arcs();
      const std::vector<std::size_t> cycle = negative_cycle();
      if (cycle.empty()) return;
      if (!push(cycle)) return;
    }
  }

 private:
  std::size_t server_node(std::size_t i) const { return m_ + i; }
  std::size_t sink() const { return 2 * m_; }

  void build_arcs() {
    arcs_.clear();
    for (std::size_t k = 0; k < m_; ++k) {
      if (inst_.own_load(k) <= 0.0) continue;
      for (std::size_t i = 0; i < m_; ++i) {
        const double c = inst_.latency(k, i);
        arcs_.push_back({ArcKind::kAssign, k, server_node(i), k, i, c});
        if (r_(k, i) > threshold_) {
          arcs_.push_back({ArcKind::kUnassign, server_node(i), k, k, i, -c});
        }
      }
    }
    for (std::size_t i = 0; i < m_; ++i) {
      const LoadFunction& lf = inst_.lf(i);
      if (lf.capacity() - loads_[i] > threshold_) {
        arcs_.push_back({ArcKind::kToSink, server_node(i), sink(), m_, i,
                         lf.marginal(loads_[i])});
      }
      if (loads_[i] > threshold_) {
        arcs_.push_back({ArcKind::kFromSink, sink(), server_node(i), m_, i,
                         -lf.marginal_left(loads_[i])});
      }
    }
  }

  // Arc indices of a cycle whose cost is below -hop_tol_ per arc, or empty.
  std::vector<std::size_t> negative_cycle() const {
    const std::size_t n = 2 * m_ + 1;
    std::vector<double> dist(n, 0.0);
    std::vector<std::size_t> pred(n, arcs_.size());
    std::size_t relaxed = n;
    for (std::size_t pass = 0; pass < n; ++pass) {
      relaxed = n;
      for (std::size_t a = 0; a < arcs_.size(); ++a) {
        const Arc& arc = arcs_[a];
        const double d = dist[arc.from] + arc.cost + hop_tol_;
        if (d < dist[arc.to]) {
          dist[arc.to] = d;
          pred[arc.to] = a;
          relaxed = arc.to;
        }
      }
      if (relaxed == n) return {};
    }
    std::size_t v = relaxed;
    for (std::size_t s = 0; s < n; ++s) v = arcs_[pred[v]].from;
    std::vector<std::size_t> cycle;
    std::size_t u = v;
    do {
      cycle.push_back(pred[u]);
      u = arcs_[pred[u]].from;
    } while (u != v);
    std::reverse(cycle.begin(), cycle.end());
    return cycle;
  }

  // Exact line search along the cycle; returns false if nothing moved.
  bool push(const std::vector<std::size_t>& cycle) {
    double constant = 0.0;
    double limit = kInf;
    const std::size_t none = m_;
    std::size_t up = none;    // server whose load grows
    std::size_t down = none;  // server whose load shrinks
    for (std::size_t a : cycle) {
      const Arc& arc = arcs_[a];
      switch (arc.kind) {
        case ArcKind::kAssign: constant += arc.cost; break;
        case ArcKind::kUnassign:
          constant += arc.cost;
          limit = std::min(limit, r_(arc.origin, arc.server));
          break;
        case ArcKind::kToSink:
          up = arc.server;
          limit = std::min(limit, inst_.lf(up).capacity() - loads_[up]);
          break;
        case ArcKind::kFromSink:
          down = arc.server;
          limit = std::min(limit, loads_[down]);
          break;
      }
    }
    if (!(limit > 0.0) || limit == kInf) return false;

    auto slope = [&](double t) {
      double s = constant;
      if (up != none) s += inst_.lf(up).marginal(std::min(loads_[up] + t, inst_.lf(up).capacity()));
      if (down != none) s -= inst_.lf(down).marginal_left(std::max(loads_[down] - t, 0.0));
      return s;
    };
    auto value = [&](double t) {
      double v = constant * t;
      if (up != none) v += inst_.lf(up).total(std::min(loads_[up] + t, inst_.lf(up).capacity()));
      if (down != none) v += inst_.lf(down).total(std::max(loads_[down] - t, 0.0));
      return v;
    };

    double step = limit;
    if (slope(limit) >= 0.0) {
      double lo = 0.0;
      double hi = limit;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (slope(mid) < 0.0 ? lo : hi) = mid;
      }
      step = value(lo) <= value(hi) ? lo : hi;
      // A minimiser sitting on a breakpoint is only approached from one
      // side by bisection, so land on the breakpoint itself.
      auto snap = [&](std::size_t server, double sign) {
        const LoadFunction& lf = inst_.lf(server);
        const double tol = 1e-9 * std::max(1.0, lf.capacity());
        for (double kink : lf.kinks()) {
          const double t = sign * (kink - loads_[server]);
          if (t > 0.0 && t <= limit && std::abs(t - step) <= tol && value(t) <= value(step)) {
            step = t;
          }
        }
      };
      if (up != none) snap(up, 1.0);
      if (down != none) snap(down, -1.0);
    }
    if (!(step > 0.0)) return false;

    for (std::size_t a : cycle) {
      const Arc& arc = arcs_[a];
      if (arc.kind == ArcKind::kAssign) {
        r_(arc.origin, arc.server) += step;
      } else if (arc.kind == ArcKind::kUnassign) {
        double& entry = r_(arc.origin, arc.server);
        entry = step >= entry ? 0.0 : entry - step;
      }
    }
    loads_ = column_sums(r_);
    return true;
  }

  const Instance& inst_;
  Matrix& r_;
  std::size_t m_;
  std::vector<double> loads_;
  std::vector<Arc> arcs_;
  double threshold_ = 0.0;
  double hop_tol_ = 0.0;
};

}  // namespace

std::vector<double> project_simplex(std::vector<double> v, double total) {
  if (v.empty()) return v;
  if (total <= 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    return v;
  }
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - total) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  for (double& x : v) x = std::max(0.0, x - theta);
  // Shifting by theta rounds at the scale of the inputs; put the residue on
  // the largest entry so the row sums to `total` at the scale of the output.
  const double sum = std::accumulate(v.begin(), v.end(), 0.0);
  auto largest = std::max_element(v.begin(), v.end());
  *largest = std::max(0.0, *largest + (total - sum));
  return v;
}

OracleSolution solve_oracle(const Instance& inst, const OracleOptions& options) {
  const std::size_t m = inst.size();
  if (m > options.max_servers) {
    throw Error(ErrorKind::kCapExceeded,
                "oracle handles at most " + std::to_string(options.max_servers) +
                    " servers, got " + std::to_string(m));
  }
  double capacity = 0.0;
  for (std::size_t i = 0; i < m; ++i) capacity += inst.lf(i).capacity();
  if (capacity < inst.total_load()) {
    throw Error(ErrorKind::kOverloaded, "total load exceeds total capacity");
  }

  Matrix r = proportional_start(inst);
  if (options.start == OracleStart::kLocal) {
    OriginAssignment local = OriginAssignment::local(inst);
    if (within_capacity(inst, local.loads)) r = local.r;
  }
  if (m > 1) {
    gradient_phase(inst, r, options.gradient_iterations);
    Refiner(inst, r).run(options.max_refinements);
  }

  OracleSolution solution;
  solution.assignment.r = std::move(r);
  solution.assignment.refresh_loads();
  solution.objective = objective(inst, solution.assignment);
  return solution;
}

std::vector<std::size_t> ErrorGraph::succ(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].from == i) out.push_back(e);
  }
  return out;
}

std::vector<std::size_t> ErrorGraph::prec(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].to == i) out.push_back(e);
  }
  return out;
}

ErrorGraph build_error_graph(const Instance& inst, const OriginAssignment& state,
                             const OriginAssignment& optimal) {
  const std::size_t m = inst.size();
  const double threshold = positive_threshold(inst);
  ErrorGraph graph;
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<double> surplus(m, 0.0);
    std::vector<double> deficit(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double d = state.r(k, i) - optimal.r(k, i);
      if (d > threshold) surplus[i] = d;
      if (d < -threshold) deficit[i] = -d;
    }
    std::size_t j = 0;
    for (std::size_t i = 0; i < m; ++i) {
      while (surplus[i] > threshold && j < m) {
        if (deficit[j] <= threshold) {
          ++j;
          continue;
        }
        const double w = std::min(surplus[i], deficit[j]);
        graph.edges.push_back({i, j, k, w});
        surplus[i] -= w;
        deficit[j] -= w;
      }
    }
  }
  return graph;
}

bool check_no_negative_cycles(const Instance& inst, const ErrorGraph& graph) {
  const std::size_t m = inst.size();
  const double tau = 1e-9 * inst.max_latency();
  std::vector<double> dist(m, 0.0);
  for (std::size_t pass = 0; pass < m; ++pass) {
    bool relaxed = false;
    for (const ErrorEdge& e : graph.edges) {
      const double w =
          inst.latency(e.origin, e.to) - inst.latency(e.origin, e.from) + tau;
      if (dist[e.from] + w < dist[e.to]) {
        dist[e.to] = dist[e.from] + w;
        relaxed = true;
      }
    }
    if (!relaxed) return true;
  }
  return false;
}

}  // namespace geobalance
