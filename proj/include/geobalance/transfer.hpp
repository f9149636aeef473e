#pragma once

#include "geobalance/loadfn.hpp"

namespace geobalance {

// Cost of shifting `amount` requests from a source server to a destination
// server, restricted to the two servers' contributions:
//
//   F(x) = h_src(src_load - x) + h_dst(dst_load + x) + x * unit_cost
//
// F is convex in x. unit_cost is the per-request change in communication
// delay (c_ij for a relay, -c_kl for a refund, c_kj - c_ki for an origin
// moved between two executors).
struct PairTransfer {
  const LoadFunction* src = nullptr;
  double src_load = 0.0;
  const LoadFunction* dst = nullptr;
  double dst_load = 0.0;
  double unit_cost = 0.0;

  double cost(double amount) const;
  double slope_right(double amount) const;
  double slope_left(double amount) const;
};

// Minimizer of F over [lower, upper] to within `tol`. Kinks of empirical
// load functions are scanned first so a minimizer sitting on a breakpoint is
// returned exactly; smooth stretches are bisected on F'.
double minimize_transfer(const PairTransfer& t, double lower, double upper,
                         double tol);

}  // namespace geobalance
