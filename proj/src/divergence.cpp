#include "feedrel/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace feedrel {

DivergenceCurve::DivergenceCurve(Eigen::Index inputs, std::vector<DivergenceSegment> segments,
                                 Eigen::Index top_letter, double top_cost, double top_value)
    : inputs_(inputs),
      segments_(std::move(segments)),
      top_letter_(top_letter),
      top_cost_(top_cost),
      top_value_(top_value) {}

double DivergenceCurve::value_at_zero() const noexcept {
  return segments_.empty() ? top_value_ : segments_.front().d_lo;
}

double DivergenceCurve::value(double p) const {
  if (p >= top_cost_) return top_value_;
  if (p <= 0.0) return value_at_zero();
  for (const auto& s : segments_) {
    if (p < s.p_hi) return s.d_lo + s.slope * (p - s.p_lo);
  }
  return top_value_;
}

double DivergenceCurve::slope(double p) const {
  if (p >= top_cost_) return 0.0;
  for (const auto& s : segments_) {
    if (p < s.p_hi) return s.slope;
  }
  return 0.0;
}

DivergenceCurve build_divergence_curve(const Dmc& dmc) {
  const LetterDivergences ld = letter_divergences(dmc);
  for (Eigen::Index k = 0; k < dmc.inputs(); ++k) {
    if (!std::isfinite(ld.d(k))) {
      std::ostringstream os;
      os << "letter " << k << " has infinite divergence from letter " << ld.argmax_letter[k];
      throw ZeroErrorRegime(os.str());
    }
  }
  struct Pt {
    double p, d;
    Eigen::Index k;
  };
  std::vector<Pt> pts;
  for (Eigen::Index k = 0; k < dmc.inputs(); ++k) pts.push_back({dmc.cost(k), ld.d(k), k});
  // by cost, then larger divergence, then lower index
  std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) {
    if (a.p != b.p) return a.p < b.p;
    if (a.d != b.d) return a.d > b.d;
    return a.k < b.k;
  });
  std::vector<Pt> hull;
  for (const auto& v : pts) {
    if (!hull.empty() && v.p == hull.back().p) continue;
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      const double cross = (b.p - a.p) * (v.d - a.d) - (v.p - a.p) * (b.d - a.d);
      if (cross >= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(v);
  }
  // keep the rising part, up to the cheapest maximizer
  std::size_t top = 0;
  for (std::size_t i = 1; i < hull.size(); ++i) {
    if (hull[i].d > hull[top].d) top = i;
  }
  std::vector<DivergenceSegment> segs;
  for (std::size_t i = 0; i < top; ++i) {
    const auto& a = hull[i];
    const auto& b = hull[i + 1];
    segs.push_back({a.p, b.p, a.d, b.d, (b.d - a.d) / (b.p - a.p), a.k, b.k});
  }
  return DivergenceCurve(dmc.inputs(), std::move(segs), hull[top].k, hull[top].p, hull[top].d);
}

DivergencePoint divergence_at(const DivergenceCurve& curve, double p) {
  if (!(p >= 0.0)) throw DomainError("power constraint must be nonnegative", 0.0);
  DivergencePoint out;
  const Eigen::Index n = curve.inputs();
  if (p >= curve.saturation_cost()) {
    out.d = curve.max_value();
    out.phi = InputDistribution::point_mass(n, curve.top_letter());
    return out;
  }
  for (const auto& s : curve.segments()) {
    if (p >= s.p_hi) continue;
    const double w = (s.p_hi - p) / (s.p_hi - s.p_lo);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
    phi(s.letter_lo) += w;
    phi(s.letter_hi) += 1.0 - w;
    out.phi = InputDistribution(phi);
    out.d = w * s.d_lo + (1.0 - w) * s.d_hi;
    out.gamma = s.slope;
    return out;
  }
  out.d = curve.max_value();
  out.phi = InputDistribution::point_mass(n, curve.top_letter());
  return out;
}

}  // namespace feedrel
