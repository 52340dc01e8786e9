#include <gtest/gtest.h>

#include <random>

#include "feedrel/channel.hpp"
#include "feedrel/io.hpp"
#include "test_support.hpp"

namespace feedrel {
namespace {

using testing::bsc_capacity;
using testing::random_channel;

ChannelFault fault_of(const Eigen::MatrixXd& t, const Eigen::VectorXd& c) {
  try {
    Dmc d(t, c);
  } catch (const ChannelError& e) {
    return e.fault();
  }
  ADD_FAILURE() << "no ChannelError";
  return ChannelFault::kNonFinite;
}

TEST(Channel, RejectsMalformedInput) {
  Eigen::MatrixXd ok(2, 2);
  ok << 0.9, 0.1, 0.1, 0.9;
  Eigen::VectorXd c(2);
  c << 0, 1;

  EXPECT_EQ(fault_of(Eigen::MatrixXd::Constant(1, 2, 0.5), Eigen::VectorXd::Zero(1)),
            ChannelFault::kDegenerateDimensions);
  EXPECT_EQ(fault_of(ok, Eigen::VectorXd::Zero(3)), ChannelFault::kDegenerateDimensions);

  Eigen::MatrixXd neg = ok;
  neg << 1.1, -0.1, 0.1, 0.9;
  EXPECT_EQ(fault_of(neg, c), ChannelFault::kNegativeEntry);

  Eigen::MatrixXd off = ok;
  off(0, 0) += 1e-9;
  EXPECT_EQ(fault_of(off, c), ChannelFault::kRowSum);

  Eigen::VectorXd bad_cost(2);
  bad_cost << 0, -1;
  EXPECT_EQ(fault_of(ok, bad_cost), ChannelFault::kNegativeCost);
  EXPECT_EQ(fault_of(ok, Eigen::VectorXd::Ones(2)), ChannelFault::kNoZeroCostLetter);

  Eigen::MatrixXd dead(2, 3);
  dead << 0.5, 0.5, 0.0, 0.2, 0.8, 0.0;
  EXPECT_EQ(fault_of(dead, c), ChannelFault::kUnreachableOutput);

  Eigen::MatrixXd nan = ok;
  nan(1, 1) = std::nan("");
  EXPECT_EQ(fault_of(nan, c), ChannelFault::kNonFinite);
}

TEST(Channel, RenormalizesWithinTolerance) {
  Eigen::MatrixXd t(2, 2);
  t << 0.9 + 5e-13, 0.1, 0.1, 0.9;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(2);
  Dmc d(t, c);
  EXPECT_NEAR(d.transition().row(0).sum(), 1.0, 1e-15);
}

TEST(Channel, InputDistributionValidation) {
  Eigen::VectorXd bad(2);
  bad << 0.7, 0.4;
  EXPECT_THROW(InputDistribution{bad}, Error);
  bad << 1.2, -0.2;
  EXPECT_THROW(InputDistribution{bad}, Error);
  const auto pm = InputDistribution::point_mass(3, 1);
  EXPECT_EQ(pm[1], 1.0);
  const auto u = InputDistribution::uniform(4);
  EXPECT_DOUBLE_EQ(u[3], 0.25);
  const auto m = mix(pm, u, 0.5);
  EXPECT_DOUBLE_EQ(m[1], 0.625);
}

TEST(Channel, BscInformationMatchesClosedForm) {
  for (double a : {0.05, 0.1, 0.25}) {
    const Dmc d = bsc_channel(a);
    EXPECT_NEAR(mutual_information(d, InputDistribution::uniform(2)), bsc_capacity(a), 1e-14);
  }
}

TEST(Channel, KlConventions) {
  const Dmc z = z_channel(0.1);
  EXPECT_EQ(row_divergence(z, 1, 0), kInf);
  EXPECT_NEAR(row_divergence(z, 0, 1), std::log(10.0), 1e-15);
  EXPECT_EQ(row_divergence(z, 0, 0), 0.0);
  EXPECT_TRUE(is_zero_error_capable(z));
  EXPECT_EQ(worst_llr_bound(z), kInf);
}

TEST(ChannelProperty, InformationBounds) {
  std::mt19937_64 rng(101);
  for (int t = 0; t < 200; ++t) {
    const int K = 2 + t % 5, J = 2 + (t / 5) % 4;
    const Dmc d = random_channel(rng, K, J);
    Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(
        K, [&]() { return std::uniform_real_distribution<double>(0, 1)(rng); });
    const InputDistribution phi(w / w.sum());
    const double i = mutual_information(d, phi);
    EXPECT_GE(i, -1e-15);
    EXPECT_LE(i, std::min(std::log(K), std::log(J)) + 1e-12);
    EXPECT_NEAR(i, testing::info_direct(d, phi.probs()), 1e-12);
  }
}

TEST(ChannelProperty, InformationIsConcave) {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    const int K = 2 + t % 4;
    const Dmc d = random_channel(rng, K, 2 + t % 3);
    auto draw = [&]() {
      Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(K, [&]() { return u(rng); });
      return InputDistribution(w / w.sum());
    };
    const auto a = draw(), b = draw();
    const double lam = u(rng);
    EXPECT_GE(mutual_information(d, mix(a, b, lam)),
              lam * mutual_information(d, a) + (1 - lam) * mutual_information(d, b) - 1e-9);
  }
}

TEST(ChannelProperty, LetterDivergencesAreExhaustiveMaxima) {
  std::mt19937_64 rng(103);
  for (int t = 0; t < 100; ++t) {
    const int K = 2 + t % 7;
    const Dmc d = random_channel(rng, K, 2 + t % 4);
    const LetterDivergences ld = letter_divergences(d);
    const auto oracle = testing::letter_divergence_oracle(d);
    for (int k = 0; k < K; ++k) {
      EXPECT_NEAR(ld.d(k), oracle[k], 1e-13);
      for (int m = 0; m < K; ++m) EXPECT_GE(ld.d(k), row_divergence(d, k, m));
      EXPECT_EQ(ld.d(k), row_divergence(d, k, ld.argmax_letter[k]));
      // ties toward the smallest index
      for (Eigen::Index m = 0; m < ld.argmax_letter[k]; ++m) {
        EXPECT_LT(row_divergence(d, k, m), ld.d(k));
      }
    }
  }
}

TEST(ChannelProperty, WorstLlrFiniteIffNoZeros) {
  std::mt19937_64 rng(104);
  for (int t = 0; t < 50; ++t) {
    const Dmc d = random_channel(rng, 3, 3);
    EXPECT_FALSE(is_zero_error_capable(d));
    EXPECT_TRUE(std::isfinite(worst_llr_bound(d)));
  }
  EXPECT_FALSE(std::isfinite(worst_llr_bound(z_channel(0.3))));
  const Dmc ex1 = free_symbol_bsc_channel(0.1);
  EXPECT_NEAR(worst_llr_bound(ex1), std::log(9.0), 1e-14);
}

TEST(Channel, ZeroCostLettersInOrder) {
  const Dmc d = mixed_channel();
  ASSERT_EQ(zero_cost_letters(d).size(), 1u);
  EXPECT_EQ(zero_cost_letters(d)[0], 0);
}

}  // namespace
}  // namespace feedrel
