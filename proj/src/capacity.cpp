#include "feedrel/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace feedrel {

namespace {

constexpr double kPhiFloor = 1e-280;

struct Solve {
  Eigen::VectorXd phi;
  double lower = 0.0;
  double upper = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Lagrangian Blahut-Arimoto on an arbitrary row-stochastic matrix. The
// returned phi is the iterate after the last bound evaluation, so its
// Lagrangian value is at least `lower`.
Solve blahut_arimoto(const Eigen::MatrixXd& P, const Eigen::MatrixXd& logP,
                     const Eigen::VectorXd& costs, double gamma,
                     const CapacityOptions& opts) {
  const Eigen::Index K = P.rows();
  const Eigen::Index J = P.cols();
  Solve s;
  s.phi = Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
  Eigen::VectorXd q(J), logq(J), a(K);
  for (int it = 0; it < opts.max_iterations; ++it) {
    q.noalias() = P.transpose() * s.phi;
    for (Eigen::Index j = 0; j < J; ++j) logq(j) = std::log(std::max(q(j), 1e-300));
    for (Eigen::Index k = 0; k < K; ++k) {
      double d = 0.0;
      for (Eigen::Index j = 0; j < J; ++j) {
        if (P(k, j) > 0.0) d += P(k, j) * (logP(k, j) - logq(j));
      }
      a(k) = d - gamma * costs(k);
    }
    const double amax = a.maxCoeff();
    double z = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      a(k) = std::exp(a(k) - amax);
      z += s.phi(k) * a(k);
    }
    s.upper = amax;
    s.lower = amax + std::log(z);
    s.phi = (s.phi.array() * a.array() / z).cwiseMax(kPhiFloor).matrix();
    s.phi /= s.phi.sum();
    s.iterations = it + 1;
    if (s.upper - s.lower < opts.gap_tol) {
      s.converged = true;
      break;
    }
  }
  // drop floor-level mass so reported distributions are clean
  const double cut = 1e-14 * s.phi.maxCoeff();
  s.phi = (s.phi.array() < cut).select(0.0, s.phi);
  s.phi /= s.phi.sum();
  return s;
}

// min over gamma >= 0 of max_k [D(P_k || q) - gamma rho_k] + gamma p with q the
// output law of phi; an upper bound on C(p) for any phi.
double dual_bound(const Dmc& dmc, const InputDistribution& phi, double p) {
  const Eigen::VectorXd q = output_distribution(dmc, phi);
  const auto& P = dmc.transition();
  const Eigen::Index K = P.rows();
  Eigen::VectorXd d(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    double v = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      if (P(k, j) <= 0.0) continue;
      if (q(j) <= 0.0) {
        v = kInf;
        break;
      }
      v += P(k, j) * std::log(P(k, j) / q(j));
    }
    d(k) = v;
  }
  auto g = [&](double gamma) {
    double m = -kInf;
    for (Eigen::Index k = 0; k < K; ++k) m = std::max(m, d(k) - gamma * dmc.cost(k));
    return m + gamma * p;
  };
  double best = g(0.0);
  double free_max = -kInf;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (dmc.cost(k) == 0.0) free_max = std::max(free_max, d(k));
    for (Eigen::Index m = 0; m < K; ++m) {
      const double dr = dmc.cost(k) - dmc.cost(m);
      if (dr <= 0.0 || !std::isfinite(d(k)) || !std::isfinite(d(m))) continue;
      const double gamma = (d(k) - d(m)) / dr;
      if (gamma > 0.0) best = std::min(best, g(gamma));
    }
  }
  if (p == 0.0) best = std::min(best, free_max);
  return best;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void certify(const CapacityPoint& pt, double p, const CapacityOptions& opts) {
  if (pt.gap > opts.certificate_tol) {
    std::ostringstream os;
    os.precision(12);
    os << "capacity at p=" << p << " not certified: duality gap " << pt.gap;
    throw SolverError(os.str(), to_std(pt.phi.probs()), pt.c, pt.gap);
  }
}

}  // namespace

LagrangianSolution solve_lagrangian(const Dmc& dmc, double gamma,
                                    const CapacityOptions& opts) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw DomainError("multiplier must be finite and nonnegative", 0.0);
  }
  Solve s = blahut_arimoto(dmc.transition(), dmc.log_transition(), dmc.costs(), gamma, opts);
  LagrangianSolution out;
  out.phi = InputDistribution(s.phi);
  out.gamma = gamma;
  out.cost = average_cost(dmc, out.phi);
  out.info = mutual_information(dmc, out.phi);
  out.lower = s.lower;
  out.upper = s.upper;
  out.iterations = s.iterations;
  out.converged = s.converged;
  return out;
}

CapacityPoint capacity_at_zero(const Dmc& dmc, const CapacityOptions& opts) {
  const auto free = zero_cost_letters(dmc);
  const Eigen::Index n = static_cast<Eigen::Index>(free.size());
  CapacityPoint pt;
  Eigen::VectorXd full = Eigen::VectorXd::Zero(dmc.inputs());
  if (n == 1) {
    full(free[0]) = 1.0;
    pt.phi = InputDistribution(full);
    return pt;
  }
  Eigen::MatrixXd P(n, dmc.outputs()), logP(n, dmc.outputs());
  for (Eigen::Index i = 0; i < n; ++i) {
    P.row(i) = dmc.transition().row(free[i]);
    logP.row(i) = dmc.log_transition().row(free[i]);
  }
  Solve s = blahut_arimoto(P, logP, Eigen::VectorXd::Zero(n), 0.0, opts);
  for (Eigen::Index i = 0; i < n; ++i) full(free[i]) = s.phi(i);
  pt.phi = InputDistribution(full);
  pt.c = mutual_information(dmc, pt.phi);
  pt.gap = std::max(0.0, std::min(s.upper, dual_bound(dmc, pt.phi, 0.0)) - pt.c);
  certify(pt, 0.0, opts);
  return pt;
}

namespace {

CapacityPoint capacity_once(const Dmc& dmc, double p, const CapacityOptions& opts) {
  if (p == 0.0) {
    CapacityPoint pt = capacity_at_zero(dmc, opts);
    // any multiplier above the right slope at 0 supports the curve there
    double g = 1.0;
    while (g < 1e12 && solve_lagrangian(dmc, g, opts).cost > 1e-12) g *= 2.0;
    pt.gamma = pt.gamma_lo = pt.gamma_hi = g;
    return pt;
  }
  LagrangianSolution lo = solve_lagrangian(dmc, 0.0, opts);
  CapacityPoint pt;
  if (p >= lo.cost) {
    pt.c = lo.info;
    pt.phi = lo.phi;
    pt.gap = std::max(0.0, std::min(lo.upper, dual_bound(dmc, pt.phi, p)) - lo.info);
    certify(pt, p, opts);
    return pt;
  }
  LagrangianSolution hi = solve_lagrangian(dmc, 1.0, opts);
  while (hi.cost > p && hi.gamma < 1e12) {
    lo = std::move(hi);
    hi = solve_lagrangian(dmc, lo.gamma * 2.0, opts);
  }
  // keep cost(lo) >= p >= cost(hi)
  for (int it = 0; it < 200; ++it) {
    if (hi.gamma - lo.gamma <= 1e-12 * std::max(1.0, hi.gamma)) break;
    if (lo.cost - hi.cost <= 1e-12 * std::max(1.0, p)) break;
    LagrangianSolution mid = solve_lagrangian(dmc, 0.5 * (lo.gamma + hi.gamma), opts);
    if (mid.cost >= p) {
      lo = std::move(mid);
    } else {
      hi = std::move(mid);
    }
  }
  const double span = lo.cost - hi.cost;
  const double w = span > 0.0 ? std::clamp((p - hi.cost) / span, 0.0, 1.0) : 1.0;
  pt.phi = mix(lo.phi, hi.phi, w);
  pt.c = mutual_information(dmc, pt.phi);
  pt.gamma_lo = lo.gamma;
  pt.gamma_hi = hi.gamma;
  pt.gamma = 0.5 * (lo.gamma + hi.gamma);
  const double ub = std::min({lo.upper + lo.gamma * p, hi.upper + hi.gamma * p,
                             dual_bound(dmc, pt.phi, p)});
  pt.gap = std::max(0.0, ub - pt.c);
  certify(pt, p, opts);
  return pt;
}

}  // namespace

CapacityPoint capacity_at(const Dmc& dmc, double p, const CapacityOptions& opts) {
  if (!(p >= 0.0) || !std::isfinite(p)) {
    throw DomainError("power constraint must be finite and nonnegative", 0.0);
  }
  try {
    return capacity_once(dmc, p, opts);
  } catch (const SolverError&) {
    // near a multiplier where the optimal support changes the iterations
    // converge slowly and an early stop can mislead the bisection
    CapacityOptions longer = opts;
    longer.max_iterations = opts.max_iterations * 20;
    return capacity_once(dmc, p, longer);
  }
}

CapacityCurve::CapacityCurve(CapacityLandmarks landmarks, std::vector<CapacitySample> samples)
    : landmarks_(landmarks), samples_(std::move(samples)) {}

namespace {

std::size_t segment_index(const std::vector<CapacitySample>& s, double p) {
  // index i with s[i].p <= p < s[i+1].p
  auto it = std::upper_bound(s.begin(), s.end(), p,
                             [](double v, const CapacitySample& x) { return v < x.p; });
  return static_cast<std::size_t>(std::distance(s.begin(), it)) - 1;
}

}  // namespace

double CapacityCurve::value(double p) const {
  if (samples_.empty()) return 0.0;
  if (p <= samples_.front().p) return samples_.front().c;
  if (p >= samples_.back().p) return samples_.back().c;
  const std::size_t i = segment_index(samples_, p);
  const auto& a = samples_[i];
  const auto& b = samples_[i + 1];
  const double t = (p - a.p) / (b.p - a.p);
  return a.c + t * (b.c - a.c);
}

double CapacityCurve::slope(double p) const {
  if (samples_.size() < 2 || p >= samples_.back().p) return 0.0;
  if (p < samples_.front().p) p = samples_.front().p;
  const std::size_t i = segment_index(samples_, p);
  const auto& a = samples_[i];
  const auto& b = samples_[i + 1];
  return (b.c - a.c) / (b.p - a.p);
}

CapacityCurve build_capacity_curve(const Dmc& dmc, const CurveGrid& grid,
                                   const CapacityOptions& opts) {
  if (grid.points < 2) throw DomainError("curve needs at least 2 grid points", 2.0);
  const CapacityPoint zero = capacity_at_zero(dmc, opts);
  // landmark solves run to a much tighter gap so that P* is not blurred by
  // residual mass on letters outside the optimal support
  CapacityOptions fine = opts;
  fine.gap_tol = std::min(opts.gap_tol, 1e-15);
  fine.max_iterations = std::max(opts.max_iterations, 20000);
  const LagrangianSolution top = solve_lagrangian(dmc, 0.0, fine);

  CapacityLandmarks lm;
  lm.c0 = zero.c;
  lm.c_star = std::max(top.info, zero.c);

  std::vector<CapacitySample> samples;
  const double p_span = top.cost;
  const double c_tol = 1e-8 * std::max(1.0, lm.c_star);

  if (p_span <= 1e-12 || lm.c_star - lm.c0 <= c_tol) {
    lm.p_star = 0.0;
    const double p_max = grid.margin * std::max(1.0, dmc.max_cost());
    samples.push_back({0.0, lm.c_star, 0.0, kInf, 0.0, zero.c >= top.info ? zero.phi : top.phi});
    samples.push_back({p_max, lm.c_star, 0.0, 0.0, 0.0, samples.front().phi});
    return CapacityCurve(lm, std::move(samples));
  }

  const double dp = p_span / grid.points;

  // sweep multipliers, ordered by increasing gamma (decreasing cost)
  std::vector<LagrangianSolution> sweep;
  sweep.push_back(top);
  double g = 1.0;
  for (;;) {
    sweep.push_back(solve_lagrangian(dmc, g, opts));
    if (sweep.back().cost < 1e-9 * p_span || g > 1e12) break;
    g *= 2.0;
  }
  const int budget = 40 * grid.points + 400;
  int solves = 0;
  bool refined = true;
  while (refined && solves < budget) {
    refined = false;
    std::vector<LagrangianSolution> next;
    next.reserve(sweep.size() * 2);
    for (std::size_t i = 0; i + 1 < sweep.size(); ++i) {
      next.push_back(sweep[i]);
      const auto& a = sweep[i];
      const auto& b = sweep[i + 1];
      const bool wide = a.cost - b.cost > dp;
      const bool separable = b.gamma - a.gamma > 1e-9 * std::max(1.0, b.gamma);
      if (wide && separable && solves < budget) {
        next.push_back(solve_lagrangian(dmc, 0.5 * (a.gamma + b.gamma), opts));
        ++solves;
        refined = true;
      }
    }
    next.push_back(sweep.back());
    sweep = std::move(next);
  }

  // candidate vertices by increasing cost; near-zero-cost solves are
  // dominated by solver noise and are replaced by the exact p = 0 point
  struct Vertex {
    double p, c, gamma;
    InputDistribution phi;
  };
  std::vector<Vertex> pts;
  pts.push_back({0.0, zero.c, kInf, zero.phi});
  for (auto it = sweep.rbegin(); it != sweep.rend(); ++it) {
    if (it->cost < 1e-7 * p_span) continue;
    pts.push_back({it->cost, it->info, it->gamma, it->phi});
  }
  std::stable_sort(pts.begin(), pts.end(),
                   [](const Vertex& a, const Vertex& b) { return a.p < b.p; });

  // upper concave hull, collinear points kept
  std::vector<Vertex> hull;
  for (auto& v : pts) {
    if (!hull.empty() && v.p - hull.back().p <= 1e-14 * std::max(1.0, v.p)) {
      if (v.c > hull.back().c) hull.back() = v;
      continue;
    }
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      const double cross = (b.p - a.p) * (v.c - a.c) - (v.p - a.p) * (b.c - a.c);
      if (cross > 1e-15 * std::max(1.0, v.p)) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(v);
  }

  // cheapest point reaching C*
  std::size_t star = hull.size() - 1;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    if (hull[i].c >= lm.c_star - c_tol) {
      star = i;
      break;
    }
  }
  hull.resize(star + 1);
  if (std::isfinite(hull.back().gamma) && hull.back().gamma > 0.0) {
    const LagrangianSolution polished = solve_lagrangian(dmc, hull.back().gamma, fine);
    const bool fits = hull.size() < 2 || polished.cost > hull[hull.size() - 2].p;
    if (polished.info >= lm.c_star - c_tol && fits) {
      hull.back().p = polished.cost;
      hull.back().phi = polished.phi;
    }
  }
  hull.back().c = lm.c_star;
  lm.p_star = hull.back().p;

  // fill long linear pieces with mixtures of their endpoints
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& v = hull[i];
    samples.push_back({v.p, v.c, v.gamma, 0.0, 0.0, v.phi});
    if (i + 1 == hull.size()) break;
    const auto& w = hull[i + 1];
    const int n = static_cast<int>(std::ceil((w.p - v.p) / dp)) - 1;
    for (int j = 1; j <= n; ++j) {
      const double t = static_cast<double>(j) / (n + 1);
      const double p = v.p + t * (w.p - v.p);
      const double lam = (w.p - p) / (w.p - v.p);
      samples.push_back({p, v.c + t * (w.c - v.c), 0.0, 0.0, 0.0, mix(v.phi, w.phi, lam)});
    }
  }
  const double p_max = lm.p_star * (1.0 + grid.margin);
  samples.push_back({p_max, lm.c_star, 0.0, 0.0, 0.0, samples.back().phi});

  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& s = samples[i];
    s.gamma_left = i == 0 ? kInf
                          : (s.c - samples[i - 1].c) / (s.p - samples[i - 1].p);
    s.gamma_right = i + 1 == samples.size()
                        ? 0.0
                        : (samples[i + 1].c - s.c) / (samples[i + 1].p - s.p);
    if (s.p >= lm.p_star) s.gamma_right = 0.0;
    s.gamma_left = std::max(s.gamma_left, s.gamma_right);
    if (i + 1 == samples.size()) s.gamma_left = 0.0;
    s.gamma = std::clamp(s.gamma, s.gamma_right, s.gamma_left);
    if (i > 0) s.gamma = std::min(s.gamma, samples[i - 1].gamma);
  }

  // beta: extent of the initial segment along which C(p)/p is constant
  lm.beta = 0.0;
  if (lm.c0 <= 1e-12 && samples.size() > 2) {
    const double ref = samples[1].c / samples[1].p;
    for (std::size_t i = 1; i < samples.size() && samples[i].p <= lm.p_star; ++i) {
      if (std::abs(samples[i].c / samples[i].p - ref) >= 1e-7) break;
      if (i >= 2) lm.beta = samples[i].p;
    }
  }
  return CapacityCurve(lm, std::move(samples));
}

double capacity_inverse(const CapacityCurve& curve, double c) {
  const double tol = 1e-9 * std::max(1.0, curve.c_star());
  if (c < curve.c0() - tol || c > curve.c_star() + tol) {
    std::ostringstream os;
    os.precision(12);
    os << "capacity value " << c << " outside [" << curve.c0() << ", " << curve.c_star()
       << "]";
    throw DomainError(os.str(), c < curve.c0() ? curve.c0() : curve.c_star());
  }
  if (c >= curve.c_star()) return curve.p_star();
  const auto& s = curve.samples();
  if (c <= s.front().c) return 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].c >= c) {
      const auto& a = s[i - 1];
      const auto& b = s[i];
      return a.p + (c - a.c) * (b.p - a.p) / (b.c - a.c);
    }
  }
  return curve.p_star();
}

double eta_star(const CapacityCurve& curve, double r, double p) {
  if (!(p >= 0.0)) throw DomainError("power constraint must be nonnegative", 0.0);
  const double cp = curve.value(p);
  if (!(r > 0.0) || !(r < cp)) {
    std::ostringstream os;
    os.precision(12);
    os << "rate " << r << " must lie in (0, C(p) = " << cp << ")";
    throw DomainError(os.str(), cp);
  }
  double lo = r / curve.c_star();
  double hi = curve.c0() > 0.0 ? std::min(1.0, r / curve.c0()) : 1.0;
  auto f = [&](double eta) { return eta * curve.value(p / eta) - r; };
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) >= 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace feedrel
