#pragma once

#include <Eigen/Core>
#include <vector>

#include "feedrel/channel.hpp"

namespace feedrel {

struct CapacityOptions {
  /// Stop alternating maximization once the upper/lower bound gap on the
  /// Lagrangian value falls below this (nats).
  double gap_tol = 1e-9;
  int max_iterations = 10000;
  /// Largest duality gap accepted on a returned capacity value.
  double certificate_tol = 1e-6;
};

/// Maximizer of I(phi) - gamma * cost(phi) for one multiplier.
struct LagrangianSolution {
  InputDistribution phi;
  double gamma = 0.0;
  double cost = 0.0;
  double info = 0.0;
  double lower = 0.0;  // certified bounds on max_phi I - gamma*cost
  double upper = 0.0;
  int iterations = 0;
  bool converged = false;
};

LagrangianSolution solve_lagrangian(const Dmc& dmc, double gamma,
                                    const CapacityOptions& opts = {});

struct CapacityPoint {
  double c = 0.0;
  InputDistribution phi;
  double gamma = 0.0;
  /// Multiplier bracket from the search; both ends are supergradients in
  /// the limit, and they differ where C has a slope discontinuity at p.
  double gamma_lo = 0.0;
  double gamma_hi = 0.0;
  double gap = 0.0;
};

/// C(p) of the cost-constrained channel. Throws DomainError for p < 0 and
/// SolverError when the duality gap of the answer exceeds the certificate
/// tolerance.
CapacityPoint capacity_at(const Dmc& dmc, double p, const CapacityOptions& opts = {});

/// Capacity of the channel restricted to its zero-cost letters.
CapacityPoint capacity_at_zero(const Dmc& dmc, const CapacityOptions& opts = {});

struct CapacityLandmarks {
  double c0 = 0.0;
  double c_star = 0.0;
  double p_star = 0.0;
  double beta = 0.0;
};

struct CapacitySample {
  double p = 0.0;
  double c = 0.0;
  double gamma = 0.0;
  double gamma_left = 0.0;   // slope of the segment ending here (+inf at p = 0)
  double gamma_right = 0.0;  // slope of the segment starting here
  InputDistribution phi;
};

struct CurveGrid {
  int points = 128;
  double margin = 0.25;
};

/// Piecewise-linear concave representation of C(p). Queries between
/// samples interpolate linearly; beyond the last sample C is flat at C*.
class CapacityCurve {
 public:
  CapacityCurve() = default;
  CapacityCurve(CapacityLandmarks landmarks, std::vector<CapacitySample> samples);

  const CapacityLandmarks& landmarks() const noexcept { return landmarks_; }
  const std::vector<CapacitySample>& samples() const noexcept { return samples_; }

  double c0() const noexcept { return landmarks_.c0; }
  double c_star() const noexcept { return landmarks_.c_star; }
  double p_star() const noexcept { return landmarks_.p_star; }
  double beta() const noexcept { return landmarks_.beta; }

  double value(double p) const;
  /// Derivative of the interpolant at p (right derivative on a breakpoint).
  double slope(double p) const;

 private:
  CapacityLandmarks landmarks_;
  std::vector<CapacitySample> samples_;
};

CapacityCurve build_capacity_curve(const Dmc& dmc, const CurveGrid& grid = {},
                                   const CapacityOptions& opts = {});

/// Smallest p in [0, P*] with C(p) = c. Throws DomainError outside [C(0), C*].
double capacity_inverse(const CapacityCurve& curve, double c);

/// Unique eta in (0, 1) with eta * C(p / eta) = r. Requires 0 < r < C(p).
double eta_star(const CapacityCurve& curve, double r, double p);

}  // namespace feedrel
