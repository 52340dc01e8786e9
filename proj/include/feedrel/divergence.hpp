#pragma once

#include <Eigen/Core>
#include <vector>

#include "feedrel/channel.hpp"

namespace feedrel {

/// One linear piece of D(p) between two letters' (cost, divergence) points.
struct DivergenceSegment {
  double p_lo = 0.0;
  double p_hi = 0.0;
  double d_lo = 0.0;
  double d_hi = 0.0;
  double slope = 0.0;
  Eigen::Index letter_lo = 0;
  Eigen::Index letter_hi = 0;
};

/// Upper concave envelope of the points (cost_k, D_k), flat beyond the
/// cheapest letter attaining max_k D_k.
class DivergenceCurve {
 public:
  DivergenceCurve() = default;
  DivergenceCurve(Eigen::Index inputs, std::vector<DivergenceSegment> segments,
                  Eigen::Index top_letter, double top_cost, double top_value);

  const std::vector<DivergenceSegment>& segments() const noexcept { return segments_; }
  Eigen::Index inputs() const noexcept { return inputs_; }
  /// Cost at which the curve saturates.
  double saturation_cost() const noexcept { return top_cost_; }
  double max_value() const noexcept { return top_value_; }
  Eigen::Index top_letter() const noexcept { return top_letter_; }
  /// D(0): divergence of the best zero-cost letter.
  double value_at_zero() const noexcept;

  double value(double p) const;
  /// Derivative of D at p (right derivative on a breakpoint, 0 past saturation).
  double slope(double p) const;

 private:
  Eigen::Index inputs_ = 0;
  std::vector<DivergenceSegment> segments_;
  Eigen::Index top_letter_ = 0;
  double top_cost_ = 0.0;
  double top_value_ = 0.0;
};

/// Throws ZeroErrorRegime if some D_k is infinite.
DivergenceCurve build_divergence_curve(const Dmc& dmc);

struct DivergencePoint {
  double d = 0.0;
  InputDistribution phi;  // supported on at most two letters
  double gamma = 0.0;     // slope of the active segment
};

DivergencePoint divergence_at(const DivergenceCurve& curve, double p);

}  // namespace feedrel
