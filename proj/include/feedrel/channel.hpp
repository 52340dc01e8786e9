#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <limits>
#include <vector>

#include "feedrel/error.hpp"

namespace feedrel {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Tolerance on row sums of a transition matrix and on probability vectors.
inline constexpr double kStochasticTol = 1e-12;

/// Checks a (transition, costs) pair. Throws ChannelError naming the first
/// violated condition.
void validate(const Eigen::MatrixXd& transition, const Eigen::VectorXd& costs);

/// A cost-constrained discrete memoryless channel. Rows are input letters,
/// columns output letters. Immutable once constructed.
class Dmc {
 public:
  /// Validates, then renormalizes rows that are within tolerance of 1.
  Dmc(Eigen::MatrixXd transition, Eigen::VectorXd costs);

  const Eigen::MatrixXd& transition() const noexcept { return transition_; }
  const Eigen::VectorXd& costs() const noexcept { return costs_; }
  /// Entry-wise natural log of the transition matrix (-inf on zeros).
  const Eigen::MatrixXd& log_transition() const noexcept { return log_transition_; }

  Eigen::Index inputs() const noexcept { return transition_.rows(); }
  Eigen::Index outputs() const noexcept { return transition_.cols(); }
  double cost(Eigen::Index k) const { return costs_(k); }
  double max_cost() const { return costs_.maxCoeff(); }

 private:
  Eigen::MatrixXd transition_;
  Eigen::VectorXd costs_;
  Eigen::MatrixXd log_transition_;
};

void validate(const Dmc& dmc);

/// Probability assignment over the input alphabet.
class InputDistribution {
 public:
  InputDistribution() = default;
  /// Throws Error if an entry is negative or the sum is off by more than
  /// kStochasticTol; otherwise renormalizes.
  explicit InputDistribution(Eigen::VectorXd probs);

  static InputDistribution point_mass(Eigen::Index size, Eigen::Index letter);
  static InputDistribution uniform(Eigen::Index size);

  const Eigen::VectorXd& probs() const noexcept { return probs_; }
  double operator[](Eigen::Index k) const { return probs_(k); }
  Eigen::Index size() const noexcept { return probs_.size(); }

 private:
  Eigen::VectorXd probs_;
};

/// Convex combination w*a + (1-w)*b.
InputDistribution mix(const InputDistribution& a, const InputDistribution& b, double w);

struct LetterDivergences {
  Eigen::VectorXd d;                      // D_k, may be +inf
  std::vector<Eigen::Index> argmax_letter;  // reject letter m_k
};

/// KL divergence between two rows (nats), with 0 ln(0/x) = 0 and
/// x ln(x/0) = +inf.
double row_divergence(const Dmc& dmc, Eigen::Index k, Eigen::Index m);

double mutual_information(const Dmc& dmc, const InputDistribution& phi);
double average_cost(const Dmc& dmc, const InputDistribution& phi);
LetterDivergences letter_divergences(const Dmc& dmc);
double worst_llr_bound(const Dmc& dmc);
bool is_zero_error_capable(const Dmc& dmc);

/// Output distribution induced by phi.
Eigen::VectorXd output_distribution(const Dmc& dmc, const InputDistribution& phi);

/// Letters with zero cost, in increasing index order.
std::vector<Eigen::Index> zero_cost_letters(const Dmc& dmc);

}  // namespace feedrel
