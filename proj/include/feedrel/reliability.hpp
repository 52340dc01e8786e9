#pragma once

#include <utility>
#include <vector>

#include "feedrel/capacity.hpp"
#include "feedrel/divergence.hpp"

namespace feedrel {

struct ReliabilityPoint {
  double r = 0.0;
  double p = 0.0;
  double eta_star = 0.0;
  double interval_lo = 0.0;
  double interval_hi = 0.0;
  double eta_opt = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double exponent = 0.0;
  /// p1 sits where C first reaches C*, so any larger phase-1 power gives the
  /// same rate (the inverse of C is an interval there).
  bool p1_saturated = false;
  /// The concavity probe failed and the optimum came from a dense scan.
  bool used_grid_fallback = false;
};

/// Feasible phase split interval for (r, p): [eta*, min(1, r / C(0))].
/// Throws DomainError unless 0 < r < C(p).
std::pair<double, double> feasible_interval(const CapacityCurve& caps, double r, double p);

/// Exponent of the two-phase scheme at split eta. Throws InfeasibleSplit
/// when eta is outside the feasible interval.
double exponent_at(const CapacityCurve& caps, const DivergenceCurve& divs, double r, double p,
                   double eta);

struct ReliabilityOptions {
  double width = 1e-10;
  int probe_points = 17;
  int fallback_grid = 10001;
};

ReliabilityPoint reliability(const CapacityCurve& caps, const DivergenceCurve& divs, double r,
                             double p, const ReliabilityOptions& opts = {});

/// Limit of the exponent as r increases to C(p), by polynomial
/// extrapolation from three rates just below C(p). Clamped at 0.
double reliability_at_capacity(const CapacityCurve& caps, const DivergenceCurve& divs, double p);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Horizontal-axis intercepts of the one-sided tangents to C at p1 and to D
/// at p2. At an interior optimum the two intervals overlap.
struct TangentReport {
  Interval capacity;
  Interval divergence;
  double c_slope_left = 0.0;
  double c_slope_right = 0.0;
  double d_slope_left = 0.0;
  double d_slope_right = 0.0;
  bool overlap = false;
  double separation = 0.0;  // distance between intervals, 0 when overlapping
};

TangentReport tangent_intercept_check(const CapacityCurve& caps, const DivergenceCurve& divs,
                                      const ReliabilityPoint& point, double h = 1e-6,
                                      double tol = 1e-6);

std::vector<ReliabilityPoint> reliability_curve(const CapacityCurve& caps,
                                                const DivergenceCurve& divs, double p,
                                                const std::vector<double>& r_grid,
                                                const ReliabilityOptions& opts = {});

}  // namespace feedrel
