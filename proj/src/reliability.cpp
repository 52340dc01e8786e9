#include "feedrel/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace feedrel {

namespace {

struct Split {
  double p1 = 0.0;
  double p2 = 0.0;
  double e = 0.0;
  bool saturated = false;
};

Split evaluate(const CapacityCurve& caps, const DivergenceCurve& divs, double r, double p,
               double eta) {
  Split s;
  const double target = std::clamp(r / eta, caps.c0(), caps.c_star());
  s.saturated = target >= caps.c_star();
  s.p1 = std::min(capacity_inverse(caps, target), caps.p_star());
  if (eta >= 1.0) {
    s.p2 = 0.0;
    s.e = 0.0;
    return s;
  }
  s.p2 = std::max(0.0, (p - eta * s.p1) / (1.0 - eta));
  s.e = (1.0 - eta) * divs.value(s.p2);
  return s;
}

ReliabilityPoint make_point(const CapacityCurve& caps, const DivergenceCurve& divs, double r,
                            double p, double lo, double hi, double eta) {
  ReliabilityPoint pt;
  pt.r = r;
  pt.p = p;
  pt.eta_star = lo;
  pt.interval_lo = lo;
  pt.interval_hi = hi;
  pt.eta_opt = eta;
  const Split s = evaluate(caps, divs, r, p, eta);
  pt.p1 = s.p1;
  pt.p2 = s.p2;
  pt.exponent = s.e;
  pt.p1_saturated = s.saturated;
  return pt;
}

constexpr double kInvPhi = 0.6180339887498949;

// maximizer of a concave f on [a, b], best of the bracket and its endpoints
template <class F>
double golden_max(F&& f, double a, double b, double width) {
  double best_x = a;
  double best_f = f(a);
  auto consider = [&](double x, double v) {
    if (v > best_f) {
      best_f = v;
      best_x = x;
    }
  };
  consider(b, f(b));
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while (b - a > width) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    }
  }
  consider(x1, f1);
  consider(x2, f2);
  const double mid = 0.5 * (a + b);
  consider(mid, f(mid));
  return best_x;
}

}  // namespace

std::pair<double, double> feasible_interval(const CapacityCurve& caps, double r, double p) {
  const double lo = eta_star(caps, r, p);
  const double hi = caps.c0() > 0.0 ? std::min(1.0, r / caps.c0()) : 1.0;
  return {lo, std::max(lo, hi)};
}

double exponent_at(const CapacityCurve& caps, const DivergenceCurve& divs, double r, double p,
                   double eta) {
  const auto [lo, hi] = feasible_interval(caps, r, p);
  const double slack = 1e-12;
  if (!(eta >= lo - slack && eta <= hi + slack)) {
    std::ostringstream os;
    os.precision(12);
    os << "phase split " << eta << " outside feasible interval [" << lo << ", " << hi << "]";
    throw InfeasibleSplit(os.str(), lo, hi);
  }
  return evaluate(caps, divs, r, p, std::clamp(eta, lo, hi)).e;
}

ReliabilityPoint reliability(const CapacityCurve& caps, const DivergenceCurve& divs, double r,
                             double p, const ReliabilityOptions& opts) {
  const auto [lo, hi] = feasible_interval(caps, r, p);
  auto f = [&](double eta) { return evaluate(caps, divs, r, p, eta).e; };
  if (hi - lo <= opts.width) return make_point(caps, divs, r, p, lo, hi, lo);

  // discrete concavity probe; a failure means the curves are not what the
  // golden-section search assumes, so scan instead
  const int n = std::max(3, opts.probe_points);
  std::vector<double> probe(n);
  for (int i = 0; i < n; ++i) probe[i] = f(lo + (hi - lo) * i / (n - 1));
  bool concave = true;
  for (int i = 1; i + 1 < n; ++i) {
    const double tol = 1e-8 * std::max(1.0, std::abs(probe[i]));
    if (probe[i] < 0.5 * (probe[i - 1] + probe[i + 1]) - tol) concave = false;
  }

  double eta = 0.0;
  if (concave) {
    eta = golden_max(f, lo, hi, opts.width);
  } else {
    const int m = std::max(3, opts.fallback_grid);
    int best = 0;
    double best_f = -kInf;
    for (int i = 0; i < m; ++i) {
      const double v = f(lo + (hi - lo) * i / (m - 1));
      if (v > best_f) {
        best_f = v;
        best = i;
      }
    }
    const double a = lo + (hi - lo) * std::max(0, best - 1) / (m - 1);
    const double b = lo + (hi - lo) * std::min(m - 1, best + 1) / (m - 1);
    eta = golden_max(f, a, b, opts.width);
    if (f(eta) < best_f) eta = lo + (hi - lo) * best / (m - 1);
  }
  ReliabilityPoint pt = make_point(caps, divs, r, p, lo, hi, eta);
  pt.used_grid_fallback = !concave;
  return pt;
}

double reliability_at_capacity(const CapacityCurve& caps, const DivergenceCurve& divs, double p) {
  const double cp = caps.value(p);
  if (!(cp > 0.0)) throw DomainError("capacity at this power is zero", cp);
  const double d[3] = {1e-3 * cp, 1e-4 * cp, 1e-5 * cp};
  double e[3];
  for (int i = 0; i < 3; ++i) e[i] = reliability(caps, divs, cp - d[i], p).exponent;
  // quadratic through the three samples, evaluated at zero offset
  double limit = 0.0;
  for (int i = 0; i < 3; ++i) {
    double w = 1.0;
    for (int j = 0; j < 3; ++j) {
      if (j != i) w *= -d[j] / (d[i] - d[j]);
    }
    limit += w * e[i];
  }
  return std::max(0.0, limit);
}

namespace {

template <class Curve>
Interval intercepts(const Curve& curve, double x, double h, double* left, double* right) {
  const double sl = x - h < 0.0 ? kInf : curve.slope(x - h);
  const double sr = curve.slope(x + h);
  const double v = curve.value(x);
  *left = sl;
  *right = sr;
  auto cut = [&](double s) {
    if (s == 0.0) return -kInf;
    if (!std::isfinite(s)) return x;
    return x - v / s;
  };
  return {cut(sr), cut(sl)};
}

}  // namespace

TangentReport tangent_intercept_check(const CapacityCurve& caps, const DivergenceCurve& divs,
                                      const ReliabilityPoint& point, double h, double tol) {
  TangentReport rep;
  rep.capacity = intercepts(caps, point.p1, h, &rep.c_slope_left, &rep.c_slope_right);
  rep.divergence = intercepts(divs, point.p2, h, &rep.d_slope_left, &rep.d_slope_right);
  const double lo = std::max(rep.capacity.lo, rep.divergence.lo);
  const double hi = std::min(rep.capacity.hi, rep.divergence.hi);
  rep.separation = std::max(0.0, lo - hi);
  rep.overlap = rep.separation <= tol;
  return rep;
}

std::vector<ReliabilityPoint> reliability_curve(const CapacityCurve& caps,
                                                const DivergenceCurve& divs, double p,
                                                const std::vector<double>& r_grid,
                                                const ReliabilityOptions& opts) {
  std::vector<ReliabilityPoint> out;
  out.reserve(r_grid.size());
  for (double r : r_grid) out.push_back(reliability(caps, divs, r, p, opts));
  return out;
}

}  // namespace feedrel
