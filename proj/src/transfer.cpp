#include "geobalance/transfer.hpp"

#include <algorithm>
#include <vector>

namespace geobalance {

double PairTransfer::cost(double amount) const {
  return src->total(src_load - amount) + dst->total(dst_load + amount) +
         amount * unit_cost;
}

double PairTransfer::slope_right(double amount) const {
  return -src->marginal_left(src_load - amount) +
         dst->marginal(dst_load + amount) + unit_cost;
}

double PairTransfer::slope_left(double amount) const {
  return -src->marginal(src_load - amount) +
         dst->marginal_left(dst_load + amount) + unit_cost;
}

double minimize_transfer(const PairTransfer& t, double lower, double upper,
                         double tol) {
  if (!(upper > lower)) return lower;
  if (t.slope_right(lower) >= 0.0) return lower;

  std::vector<double> stops;
  for (double b : t.src->kinks()) {
    const double x = t.src_load - b;
    if (x > lower && x < upper) stops.push_back(x);
  }
  for (double b : t.dst->kinks()) {
    const double x = b - t.dst_load;
    if (x > lower && x < upper) stops.push_back(x);
  }
  std::sort(stops.begin(), stops.end());
  stops.push_back(upper);

  double lo = lower;
  double hi = upper;
  for (double x : stops) {
    if (x == upper || t.slope_right(x) >= 0.0) {
      if (t.slope_left(x) <= 0.0) return x;
      hi = x;
      break;
    }
    lo = x;
  }
  // F' is continuous and nondecreasing on (lo, hi) with a sign change.
  for (int iter = 0; iter < 200 && hi - lo > tol; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (t.slope_right(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace geobalance
