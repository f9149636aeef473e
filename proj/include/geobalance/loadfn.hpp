#pragma once

#include <span>
#include <vector>

namespace geobalance {

// Load functions map a server's current load (requests per time unit) to the
// average processing time of a request. Every kind is convex and
// nondecreasing on [0, l_max]. Evaluating beyond l_max is an error, never an
// infinite sentinel.

enum class LoadKind { kQueuing, kBatch, kAffine, kEmpirical };

const char* to_string(LoadKind kind);

struct Sample {
  double load = 0.0;
  double time = 0.0;
};

struct DerivativeBounds {
  double u1 = 0.0;  // sup f' on [0, l_max]
  double u2 = 0.0;  // sup |f''| on [0, l_max]
};

// Absolute tolerance for convexity/monotonicity checks of measured data.
inline constexpr double kFitTolerance = 1e-9;
// Bisection tolerance (on load) for l_max_from_budget.
inline constexpr double kBisectTolerance = 1e-10;
// Relative headroom kept below l_max so queuing poles are never touched.
inline constexpr double kCapacityMargin = 1e-12;

class LoadFunction {
 public:
  // f(l) = 1 / (mu - l); requires 0 <= l_max < mu.
  static LoadFunction queuing(double mu, double l_max);
  // f(l) = l / (2 s).
  static LoadFunction batch(double speed, double l_max);
  // f(l) = a + b l with a, b >= 0.
  static LoadFunction affine(double a, double b, double l_max);
  // Piecewise-linear interpolation of breakpoints that must already be
  // sorted, convex and nondecreasing. l_max defaults to the last breakpoint.
  static LoadFunction empirical(std::vector<Sample> points);
  static LoadFunction empirical(std::vector<Sample> points, double l_max);

  LoadFunction with_l_max(double l_max) const;

  LoadKind kind() const { return kind_; }
  double l_max() const { return l_max_; }
  // Largest load the algorithms place on the server: l_max less a relative
  // margin of kCapacityMargin.
  double capacity() const;

  double mu() const { return p0_; }
  double speed() const { return p0_; }
  double intercept() const { return p0_; }
  double gradient() const { return p1_; }
  std::span<const Sample> points() const { return points_; }

  // f(l). Throws kLoadOutOfRange for l < 0 or l > l_max.
  double value(double l) const;
  // Right derivative f'(l+) (left derivative at l_max).
  double slope(double l) const;
  // Left derivative f'(l-) (right derivative at 0).
  double slope_left(double l) const;
  // One-sided slopes treat a load within 1e-12 * max(1, l_max) of a
  // breakpoint as sitting on it, so a solver that lands a rounding error
  // past a kink still sees both sides of it.
  // f''(l); zero between the breakpoints of an empirical function.
  double curvature(double l) const;
  // Marginal cost g(l) = d/dl [l f(l)] = f(l) + l f'(l), right-sided.
  double marginal(double l) const;
  double marginal_left(double l) const;
  // Total processing time h(l) = l f(l).
  double total(double l) const;

  // Breakpoint loads strictly inside (0, l_max) where f' jumps.
  std::vector<double> kinks() const;

  // f without the l_max range check, restricted only by structural limits
  // (queuing pole, last empirical breakpoint). Used for budget inversion.
  double unchecked_value(double l) const;
  double structural_limit() const;

 private:
  LoadFunction(LoadKind kind, double p0, double p1, double l_max,
               std::vector<Sample> points);

  double checked(double l) const;
  std::size_t segment_right(double l) const;
  std::size_t segment_left(double l) const;
  double segment_slope(std::size_t k) const;
  double kink_snap() const;

  LoadKind kind_;
  double p0_;  // mu | speed | a
  double p1_;  // b for affine
  double l_max_;
  std::vector<Sample> points_;
};

DerivativeBounds derivative_bounds(const LoadFunction& lf);

// Interpolating piecewise-linear fit of measured (load, time) pairs.
// Throws kTooFewSamples, kNotConvex, kInvalidArgument (duplicate loads).
LoadFunction fit_empirical(std::vector<Sample> samples);

// Largest l with f(l) <= t_max, by bisection to kBisectTolerance. The l_max
// already stored in `lf` is ignored. Throws kBudgetUnreachable when
// f(0) > t_max and kUnboundedBudget when f never exceeds t_max.
double l_max_from_budget(const LoadFunction& lf, double t_max);

}  // namespace geobalance
