#include <gtest/gtest.h>

#include <random>

#include "feedrel/capacity.hpp"
#include "feedrel/io.hpp"
#include "test_support.hpp"

namespace feedrel {
namespace {

using testing::bsc_capacity;

double entropy(std::initializer_list<double> p) {
  double h = 0.0;
  for (double x : p) h -= x * std::log(x);
  return h;
}

TEST(Capacity, BscMatchesClosedForm) {
  for (double a : {0.05, 0.1, 0.25}) {
    const Dmc d = bsc_channel(a);
    for (double p : {0.0, 0.5, 3.0}) {
      const CapacityPoint pt = capacity_at(d, p);
      EXPECT_NEAR(pt.c, bsc_capacity(a), 1e-9) << a << " " << p;
      EXPECT_NEAR(pt.phi[0], 0.5, 1e-6);
    }
  }
}

TEST(Capacity, NegativePowerIsDomainError) {
  EXPECT_THROW(capacity_at(bsc_channel(0.1), -0.1), DomainError);
}

TEST(Capacity, FreeSymbolBscIsLinear) {
  const double a = 0.1;
  const Dmc d = free_symbol_bsc_channel(a);
  for (int i = 0; i <= 12; ++i) {
    const double p = 0.1 * i;
    EXPECT_NEAR(capacity_at(d, p).c, std::min(p, 1.0) * bsc_capacity(a), 1e-9) << p;
  }
  const CapacityCurve c = build_capacity_curve(d);
  EXPECT_NEAR(c.c0(), 0.0, 1e-12);
  EXPECT_NEAR(c.c_star(), bsc_capacity(a), 1e-12);
  EXPECT_NEAR(c.p_star(), 1.0, 1e-9);
  EXPECT_NEAR(c.beta(), 1.0, 1e-6);
  EXPECT_NEAR(c.value(0.37), 0.37 * bsc_capacity(a), 1e-9);
  EXPECT_NEAR(c.slope(0.5), bsc_capacity(a), 1e-7);
  EXPECT_NEAR(c.value(7.0), bsc_capacity(a), 1e-12);
}

TEST(Capacity, MixedChannelBreakpoints) {
  const double e = 1.0 / 75, dl = 1.0 / 100;
  const double c1 = std::log(4.0) - entropy({dl, dl, 0.5 - dl, 0.5 - dl});
  const double c4 = std::log(4.0) - entropy({1 - 3 * e, e, e, e});
  const Dmc d = mixed_channel();
  EXPECT_NEAR(capacity_at(d, 1.0).c, c1, 1e-7);
  EXPECT_NEAR(capacity_at(d, 4.0).c, c4, 1e-7);
  EXPECT_NEAR(capacity_at(d, 0.5).c, 0.5 * c1, 1e-7);
  EXPECT_NEAR(capacity_at(d, 2.5).c, c1 + (c4 - c1) * 1.5 / 3.0, 1e-7);
  const CapacityCurve c = build_capacity_curve(d);
  EXPECT_NEAR(c.c_star(), c4, 1e-9);
  EXPECT_NEAR(c.p_star(), 4.0, 1e-6);
  EXPECT_NEAR(c.beta(), 1.0, 1e-4);
  // slope discontinuity at 1
  EXPECT_NEAR(c.slope(0.99), c1, 1e-6);
  EXPECT_NEAR(c.slope(1.01), (c4 - c1) / 3.0, 1e-6);
}

TEST(Capacity, LagrangianBoundsBracketValue) {
  const Dmc d = mixed_channel();
  for (double g : {0.0, 0.05, 0.2, 0.6, 2.0}) {
    const LagrangianSolution s = solve_lagrangian(d, g);
    EXPECT_LE(s.lower, s.upper + 1e-15);
    EXPECT_LE(s.upper - s.lower, 1e-9);
    EXPECT_NEAR(s.info - g * s.cost, s.lower, 1e-8);
  }
}

TEST(CapacityProperty, SimplexGridNeverBeatsSolver) {
  std::mt19937_64 rng(201);
  for (int t = 0; t < 12; ++t) {
    const Dmc d = testing::random_channel(rng, 3, 2 + t % 3);
    const int n = testing::grid_denominator(3, 20000);
    const double pmax = d.max_cost();
    for (double frac : {0.15, 0.5, 0.9}) {
      const double p = frac * pmax;
      const double c = capacity_at(d, p).c;
      double best = 0.0;
      testing::for_each_composition(n, 3, [&](const std::vector<int>& comp) {
        Eigen::VectorXd phi(3);
        for (int k = 0; k < 3; ++k) phi(k) = static_cast<double>(comp[k]) / n;
        if (phi.dot(d.costs()) > p) return;
        best = std::max(best, testing::info_direct(d, phi));
      });
      EXPECT_LE(best, c + 1e-7);
      EXPECT_GE(best, c - 2e-3);
    }
  }
}

TEST(CapacityProperty, CurveIsConcaveMonotoneAndMatchesPointSolves) {
  std::mt19937_64 rng(202);
  for (int t = 0; t < 8; ++t) {
    const Dmc d = testing::random_channel(rng, 2 + t % 4, 2 + t % 3);
    const CapacityCurve c = build_capacity_curve(d);
    const auto& s = c.samples();
    ASSERT_GE(s.size(), 2u);
    for (std::size_t i = 1; i < s.size(); ++i) {
      EXPECT_GE(s[i].c, s[i - 1].c - 1e-12);
      EXPECT_GT(s[i].p, s[i - 1].p);
    }
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      const double left = (s[i].c - s[i - 1].c) / (s[i].p - s[i - 1].p);
      const double right = (s[i + 1].c - s[i].c) / (s[i + 1].p - s[i].p);
      EXPECT_GE(left, right - 1e-7);
    }
    for (int i = 0; i <= 10; ++i) {
      const double p = c.p_star() * 1.1 * i / 10.0;
      const double exact = capacity_at(d, p).c;
      EXPECT_LE(c.value(p), exact + 1e-8);
      EXPECT_GE(c.value(p), exact - 1e-4);
    }
    EXPECT_LE(c.beta(), c.p_star() + 1e-12);
  }
}

TEST(Capacity, InversesRoundTrip) {
  const Dmc d = mixed_channel();
  const CapacityCurve c = build_capacity_curve(d);
  for (double p : {0.3, 1.0, 2.2, 3.9}) {
    EXPECT_NEAR(capacity_inverse(c, c.value(p)), p, 1e-7);
  }
  EXPECT_THROW(capacity_inverse(c, c.c_star() + 0.1), DomainError);
  for (double p : {0.5, 2.5}) {
    for (double f : {0.1, 0.5, 0.9}) {
      const double r = f * c.value(p);
      const double eta = eta_star(c, r, p);
      EXPECT_GT(eta, 0.0);
      EXPECT_LT(eta, 1.0);
      EXPECT_NEAR(eta * c.value(p / eta), r, 1e-9);
    }
  }
}

}  // namespace
}  // namespace feedrel
