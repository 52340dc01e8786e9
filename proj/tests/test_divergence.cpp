#include <gtest/gtest.h>

#include <random>

#include "feedrel/divergence.hpp"
#include "feedrel/io.hpp"
#include "test_support.hpp"

namespace feedrel {
namespace {

TEST(Divergence, FreeSymbolBscIsAffine) {
  const double a = 0.1;
  const Dmc d = free_symbol_bsc_channel(a);
  const DivergenceCurve c = build_divergence_curve(d);
  const double d0 = 0.5 * std::log(1.0 / (4 * a * (1 - a)));
  const double d1 = (1 - 2 * a) * std::log((1 - a) / a);
  for (double x : {0.0, 0.25, 0.5, 1.0}) EXPECT_NEAR(c.value(x), d0 + (d1 - d0) * x, 1e-14);
  EXPECT_NEAR(c.value(3.0), d1, 1e-14);
  EXPECT_NEAR(c.value_at_zero(), d0, 1e-14);
  EXPECT_NEAR(c.slope(0.3), d1 - d0, 1e-13);
  EXPECT_EQ(c.slope(1.5), 0.0);
  EXPECT_EQ(c.saturation_cost(), 1.0);
}

TEST(Divergence, ZeroTransitionThrows) {
  EXPECT_THROW(build_divergence_curve(z_channel(0.1)), ZeroErrorRegime);
}

TEST(DivergenceProperty, MatchesTwoSparseEnumerationExactly) {
  std::mt19937_64 rng(301);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 20; ++t) {
    const Dmc d = testing::random_channel(rng, 2 + t % 5, 2 + t % 4);
    const DivergenceCurve c = build_divergence_curve(d);
    for (int i = 0; i < 25; ++i) {
      const double p = u(rng) * d.max_cost() * 1.2;
      const DivergencePoint pt = divergence_at(c, p);
      EXPECT_NEAR(pt.d, testing::divergence_two_sparse_oracle(d, p), 1e-12);
      int support = 0;
      double value = 0.0;
      const LetterDivergences ld = letter_divergences(d);
      for (Eigen::Index k = 0; k < pt.phi.size(); ++k) {
        support += pt.phi[k] > 0.0;
        value += pt.phi[k] * ld.d(k);
      }
      EXPECT_LE(support, 2);
      EXPECT_LE(average_cost(d, pt.phi), p + 1e-12);
      EXPECT_NEAR(value, pt.d, 1e-12);
    }
  }
}

TEST(DivergenceProperty, SimplexGridWithinResolution) {
  std::mt19937_64 rng(302);
  for (int t = 0; t < 20; ++t) {
    const int K = 2 + t % 5;
    const Dmc d = testing::random_channel(rng, K, 3);
    const DivergenceCurve c = build_divergence_curve(d);
    const LetterDivergences ld = letter_divergences(d);
    const int n = testing::grid_denominator(K, 10000);
    for (double frac : {0.0, 0.3, 0.7, 1.0}) {
      const double p = frac * d.max_cost();
      double best = -INFINITY;
      testing::for_each_composition(n, K, [&](const std::vector<int>& comp) {
        double cost = 0.0, val = 0.0;
        for (int k = 0; k < K; ++k) {
          cost += comp[k] * d.cost(k);
          val += comp[k] * ld.d(k);
        }
        if (cost / n <= p + 1e-12) best = std::max(best, val / n);
      });
      EXPECT_LE(best, c.value(p) + 1e-12);
      EXPECT_GE(best, c.value(p) - ld.d.maxCoeff() / n - 1e-12);
    }
  }
}

TEST(DivergenceProperty, ConcaveAndNondecreasing) {
  std::mt19937_64 rng(303);
  for (int t = 0; t < 30; ++t) {
    const Dmc d = testing::random_channel(rng, 2 + t % 6, 2 + t % 3);
    const DivergenceCurve c = build_divergence_curve(d);
    double prev_slope = INFINITY;
    for (const auto& s : c.segments()) {
      EXPECT_LE(s.slope, prev_slope + 1e-12);
      EXPECT_GE(s.slope, 0.0);
      prev_slope = s.slope;
    }
    for (int i = 0; i < 50; ++i) {
      const double p = d.max_cost() * i / 49.0;
      EXPECT_GE(c.value(p + 0.01), c.value(p) - 1e-14);
    }
  }
}

}  // namespace
}  // namespace feedrel
