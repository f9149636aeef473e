#include "geobalance/loadfn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "geobalance/error.hpp"

namespace geobalance {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::kInvalidArgument, what);
}

double range_slack(double l_max) {
  return 1e-12 * std::max(1.0, l_max);
}

// Validates interpolation points and prepends a flat piece down to load 0
// when the first measurement sits above zero.
std::vector<Sample> normalized_points(std::vector<Sample> points) {
  if (points.size() < 2) {
    throw Error(ErrorKind::kTooFewSamples,
                "empirical load function needs at least 2 points");
  }
  for (const Sample& p : points) {
    require(std::isfinite(p.load) && std::isfinite(p.time),
            "empirical points must be finite");
    require(p.load >= 0.0, "empirical points must have nonnegative load");
  }
  for (std::size_t k = 1; k < points.size(); ++k) {
    require(points[k].load > points[k - 1].load,
            "empirical loads must be strictly increasing");
  }
  if (points.front().load > 0.0) {
    points.insert(points.begin(), Sample{0.0, points.front().time});
  }
  double previous_slope = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < points.size(); ++k) {
    const double rise = points[k].time - points[k - 1].time;
    if (rise < -kFitTolerance) {
      throw Error(ErrorKind::kNotConvex,
                  "empirical load function decreases between loads " +
                      std::to_string(points[k - 1].load) + " and " +
                      std::to_string(points[k].load));
    }
    const double slope = rise / (points[k].load - points[k - 1].load);
    if (slope < previous_slope - kFitTolerance) {
      throw Error(ErrorKind::kNotConvex,
                  "empirical load function is not convex at load " +
                      std::to_string(points[k - 1].load));
    }
    previous_slope = slope;
  }
  return points;
}

}  // namespace

const char* to_string(LoadKind kind) {
  switch (kind) {
    case LoadKind::kQueuing: return "queuing";
    case LoadKind::kBatch: return "batch";
    case LoadKind::kAffine: return "affine";
    case LoadKind::kEmpirical: return "empirical";
  }
  return "unknown";
}

LoadFunction::LoadFunction(LoadKind kind, double p0, double p1, double l_max,
                           std::vector<Sample> points)
    : kind_(kind), p0_(p0), p1_(p1), l_max_(l_max), points_(std::move(points)) {}

LoadFunction LoadFunction::queuing(double mu, double l_max) {
  require(std::isfinite(mu) && mu > 0.0, "queuing rate mu must be positive");
  require(std::isfinite(l_max) && l_max >= 0.0, "l_max must be nonnegative");
  require(l_max < mu, "queuing l_max must stay below mu");
  return LoadFunction(LoadKind::kQueuing, mu, 0.0, l_max, {});
}

LoadFunction LoadFunction::batch(double speed, double l_max) {
  require(std::isfinite(speed) && speed > 0.0, "batch speed must be positive");
  require(std::isfinite(l_max) && l_max >= 0.0, "l_max must be nonnegative");
  return LoadFunction(LoadKind::kBatch, speed, 0.0, l_max, {});
}

LoadFunction LoadFunction::affine(double a, double b, double l_max) {
  require(std::isfinite(a) && a >= 0.0, "affine intercept must be nonnegative");
  require(std::isfinite(b) && b >= 0.0, "affine slope must be nonnegative");
  require(std::isfinite(l_max) && l_max >= 0.0, "l_max must be nonnegative");
  return LoadFunction(LoadKind::kAffine, a, b, l_max, {});
}

LoadFunction LoadFunction::empirical(std::vector<Sample> points) {
  auto normalized = normalized_points(std::move(points));
  const double last = normalized.back().load;
  return LoadFunction(LoadKind::kEmpirical, 0.0, 0.0, last,
                      std::move(normalized));
}

LoadFunction LoadFunction::empirical(std::vector<Sample> points, double l_max) {
  return empirical(std::move(points)).with_l_max(l_max);
}

LoadFunction LoadFunction::with_l_max(double l_max) const {
  require(std::isfinite(l_max) && l_max >= 0.0, "l_max must be nonnegative");
  if (kind_ == LoadKind::kQueuing) {
    require(l_max < p0_, "queuing l_max must stay below mu");
  }
  if (kind_ == LoadKind::kEmpirical) {
    require(l_max <= points_.back().load,
            "empirical l_max cannot exceed the last breakpoint");
  }
  LoadFunction copy = *this;
  copy.l_max_ = l_max;
  return copy;
}

double LoadFunction::capacity() const {
  return l_max_ * (1.0 - kCapacityMargin);
}

double LoadFunction::checked(double l) const {
  const double slack = range_slack(l_max_);
  if (!(l >= -slack) || !(l <= l_max_ + slack)) {
    throw Error(ErrorKind::kLoadOutOfRange,
                "load " + std::to_string(l) + " outside [0, " +
                    std::to_string(l_max_) + "]");
  }
  return std::clamp(l, 0.0, l_max_);
}

std::size_t LoadFunction::segment_right(double l) const {
  const std::size_t segments = points_.size() - 1;
  auto it = std::upper_bound(points_.begin(), points_.end(), l,
                             [](double x, const Sample& p) { return x < p.load; });
  std::size_t k = static_cast<std::size_t>(it - points_.begin());
  k = k == 0 ? 0 : k - 1;
  return std::min(k, segments - 1);
}

std::size_t LoadFunction::segment_left(double l) const {
  const std::size_t segments = points_.size() - 1;
  auto it = std::lower_bound(points_.begin(), points_.end(), l,
                             [](const Sample& p, double x) { return p.load < x; });
  std::size_t k = static_cast<std::size_t>(it - points_.begin());
  k = k == 0 ? 0 : k - 1;
  return std::min(k, segments - 1);
}

double LoadFunction::kink_snap() const { return 1e-12 * std::max(1.0, l_max_); }

double LoadFunction::segment_slope(std::size_t k) const {
  return (points_[k + 1].time - points_[k].time) /
         (points_[k + 1].load - points_[k].load);
}

double LoadFunction::unchecked_value(double l) const {
  switch (kind_) {
    case LoadKind::kQueuing: return 1.0 / (p0_ - l);
    case LoadKind::kBatch: return l / (2.0 * p0_);
    case LoadKind::kAffine: return p0_ + p1_ * l;
    case LoadKind::kEmpirical: {
      const std::size_t k = segment_right(l);
      return points_[k].time + segment_slope(k) * (l - points_[k].load);
    }
  }
  return 0.0;
}

double LoadFunction::structural_limit() const {
  switch (kind_) {
    case LoadKind::kQueuing: return p0_;
    case LoadKind::kEmpirical: return points_.back().load;
    default: return std::numeric_limits<double>::infinity();
  }
}

double LoadFunction::value(double l) const {
  return unchecked_value(checked(l));
}

double LoadFunction::slope(double l) const {
  l = checked(l);
  switch (kind_) {
    case LoadKind::kQueuing: {
      const double d = p0_ - l;
      return 1.0 / (d * d);
    }
    case LoadKind::kBatch: return 1.0 / (2.0 * p0_);
    case LoadKind::kAffine: return p1_;
    case LoadKind::kEmpirical:
      return l >= l_max_ ? segment_slope(segment_left(l))
                         : segment_slope(segment_right(l + kink_snap()));
  }
  return 0.0;
}

double LoadFunction::slope_left(double l) const {
  if (kind_ != LoadKind::kEmpirical) return slope(l);
  l = checked(l);
  return l <= 0.0 ? segment_slope(0) : segment_slope(segment_left(l - kink_snap()));
}

double LoadFunction::curvature(double l) const {
  l = checked(l);
  if (kind_ == LoadKind::kQueuing) {
    const double d = p0_ - l;
    return 2.0 / (d * d * d);
  }
  return 0.0;
}

double LoadFunction::marginal(double l) const {
  l = checked(l);
  return unchecked_value(l) + l * slope(l);
}

double LoadFunction::marginal_left(double l) const {
  l = checked(l);
  return unchecked_value(l) + l * slope_left(l);
}

double LoadFunction::total(double l) const {
  l = checked(l);
  return l * unchecked_value(l);
}

std::vector<double> LoadFunction::kinks() const {
  std::vector<double> out;
  if (kind_ != LoadKind::kEmpirical) return out;
  for (std::size_t k = 1; k + 1 < points_.size(); ++k) {
    const double b = points_[k].load;
    if (b <= 0.0 || b >= l_max_) continue;
    if (segment_slope(k) != segment_slope(k - 1)) out.push_back(b);
  }
  return out;
}

DerivativeBounds derivative_bounds(const LoadFunction& lf) {
  switch (lf.kind()) {
    case LoadKind::kQueuing: {
      const double d = lf.mu() - lf.l_max();
      return {1.0 / (d * d), 2.0 / (d * d * d)};
    }
    case LoadKind::kBatch: return {1.0 / (2.0 * lf.speed()), 0.0};
    case LoadKind::kAffine: return {lf.gradient(), 0.0};
    case LoadKind::kEmpirical: break;
  }
  // Piecewise linear: f' is bounded by the slope of the last segment in
  // range. f'' is a sum of point masses; bound it by the slope jump over the
  // narrower adjacent segment, i.e. the steepest finite difference of f'
  // resolvable on the breakpoint grid.
  const auto pts = lf.points();
  DerivativeBounds bounds{lf.slope_left(lf.l_max()), 0.0};
  for (std::size_t k = 1; k + 1 < pts.size(); ++k) {
    if (pts[k].load > lf.l_max()) break;
    const double w0 = pts[k].load - pts[k - 1].load;
    const double w1 = pts[k + 1].load - pts[k].load;
    const double s0 = (pts[k].time - pts[k - 1].time) / w0;
    const double s1 = (pts[k + 1].time - pts[k].time) / w1;
    bounds.u2 = std::max(bounds.u2, std::max(0.0, s1 - s0) / std::min(w0, w1));
  }
  return bounds;
}

LoadFunction fit_empirical(std::vector<Sample> samples) {
  if (samples.size() < 2) {
    throw Error(ErrorKind::kTooFewSamples,
                "need at least 2 samples, got " + std::to_string(samples.size()));
  }
  std::sort(samples.begin(), samples.end(),
            [](const Sample& a, const Sample& b) { return a.load < b.load; });
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (samples[k].load == samples[k - 1].load) {
      throw Error(ErrorKind::kInvalidArgument,
                  "duplicate sample load " + std::to_string(samples[k].load));
    }
  }
  return LoadFunction::empirical(std::move(samples));
}

double l_max_from_budget(const LoadFunction& lf, double t_max) {
  if (!std::isfinite(t_max)) {
    throw Error(ErrorKind::kInvalidArgument, "t_max must be finite");
  }
  const double f0 = lf.unchecked_value(0.0);
  if (f0 > t_max) {
    throw Error(ErrorKind::kBudgetUnreachable,
                "f(0) = " + std::to_string(f0) + " exceeds t_max = " +
                    std::to_string(t_max));
  }
  const double limit = lf.structural_limit();
  double hi = 0.0;
  if (lf.kind() == LoadKind::kEmpirical) {
    if (lf.unchecked_value(limit) <= t_max) return limit;
    hi = limit;
  } else if (lf.kind() == LoadKind::kQueuing) {
    // Approach the pole geometrically; f blows up before we reach it.
    double gap = 0.5 * limit;
    hi = limit - gap;
    while (lf.unchecked_value(hi) <= t_max) {
      gap *= 0.5;
      hi = limit - gap;
      if (hi >= limit) break;
    }
  } else {
    hi = 1.0;
    while (lf.unchecked_value(hi) <= t_max) {
      hi *= 2.0;
      if (!std::isfinite(hi) || hi > 1e300) {
        throw Error(ErrorKind::kUnboundedBudget,
                    "load function never exceeds t_max = " +
                        std::to_string(t_max));
      }
    }
  }
  double lo = 0.0;
  while (hi - lo > kBisectTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (lf.unchecked_value(mid) <= t_max) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace geobalance
