#include "feedrel/channel.hpp"

#include <cmath>
#include <sstream>

namespace feedrel {

const char* to_string(ChannelFault fault) {
  switch (fault) {
    case ChannelFault::kDegenerateDimensions: return "DegenerateDimensions";
    case ChannelFault::kNegativeEntry: return "NegativeEntry";
    case ChannelFault::kRowSum: return "RowSumViolation";
    case ChannelFault::kNegativeCost: return "NegativeCost";
    case ChannelFault::kNoZeroCostLetter: return "NoZeroCostLetter";
    case ChannelFault::kUnreachableOutput: return "UnreachableOutput";
    case ChannelFault::kNonFinite: return "NonFinite";
  }
  return "Unknown";
}

namespace {

[[noreturn]] void fail(ChannelFault fault, const std::string& detail) {
  throw ChannelError(fault, std::string(to_string(fault)) + ": " + detail);
}

}  // namespace

void validate(const Eigen::MatrixXd& transition, const Eigen::VectorXd& costs) {
  if (transition.rows() < 2 || transition.cols() < 2) {
    std::ostringstream os;
    os << "need at least 2 inputs and 2 outputs, got " << transition.rows() << "x"
       << transition.cols();
    fail(ChannelFault::kDegenerateDimensions, os.str());
  }
  if (costs.size() != transition.rows()) {
    std::ostringstream os;
    os << "cost vector has " << costs.size() << " entries for " << transition.rows()
       << " inputs";
    fail(ChannelFault::kDegenerateDimensions, os.str());
  }
  if (!transition.allFinite() || !costs.allFinite()) {
    fail(ChannelFault::kNonFinite, "transition matrix and costs must be finite");
  }
  for (Eigen::Index k = 0; k < transition.rows(); ++k) {
    for (Eigen::Index j = 0; j < transition.cols(); ++j) {
      if (transition(k, j) < 0.0) {
        std::ostringstream os;
        os << "P(" << k << "," << j << ") = " << transition(k, j);
        fail(ChannelFault::kNegativeEntry, os.str());
      }
    }
    const double sum = transition.row(k).sum();
    if (std::abs(sum - 1.0) > kStochasticTol) {
      std::ostringstream os;
      os.precision(17);
      os << "row " << k << " sums to " << sum;
      fail(ChannelFault::kRowSum, os.str());
    }
  }
  bool has_free = false;
  for (Eigen::Index k = 0; k < costs.size(); ++k) {
    if (costs(k) < 0.0) {
      std::ostringstream os;
      os << "cost of letter " << k << " is " << costs(k);
      fail(ChannelFault::kNegativeCost, os.str());
    }
    has_free = has_free || costs(k) == 0.0;
  }
  if (!has_free) fail(ChannelFault::kNoZeroCostLetter, "no letter has cost exactly 0");
  for (Eigen::Index j = 0; j < transition.cols(); ++j) {
    if (transition.col(j).maxCoeff() <= 0.0) {
      std::ostringstream os;
      os << "output " << j << " cannot be reached from any input";
      fail(ChannelFault::kUnreachableOutput, os.str());
    }
  }
}

void validate(const Dmc& dmc) { validate(dmc.transition(), dmc.costs()); }

Dmc::Dmc(Eigen::MatrixXd transition, Eigen::VectorXd costs)
    : transition_(std::move(transition)), costs_(std::move(costs)) {
  validate(transition_, costs_);
  for (Eigen::Index k = 0; k < transition_.rows(); ++k) {
    transition_.row(k) /= transition_.row(k).sum();
  }
  log_transition_ = transition_.array().log().matrix();
}

InputDistribution::InputDistribution(Eigen::VectorXd probs) : probs_(std::move(probs)) {
  if (probs_.size() == 0) throw Error("input distribution is empty");
  if (!probs_.allFinite() || probs_.minCoeff() < 0.0) {
    throw Error("input distribution has a negative or non-finite entry");
  }
  const double sum = probs_.sum();
  if (std::abs(sum - 1.0) > kStochasticTol) {
    std::ostringstream os;
    os.precision(17);
    os << "input distribution sums to " << sum;
    throw Error(os.str());
  }
  probs_ /= sum;
}

InputDistribution InputDistribution::point_mass(Eigen::Index size, Eigen::Index letter) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(size);
  p(letter) = 1.0;
  return InputDistribution(std::move(p));
}

InputDistribution InputDistribution::uniform(Eigen::Index size) {
  return InputDistribution(Eigen::VectorXd::Constant(size, 1.0 / static_cast<double>(size)));
}

InputDistribution mix(const InputDistribution& a, const InputDistribution& b, double w) {
  Eigen::VectorXd p = w * a.probs() + (1.0 - w) * b.probs();
  p = p.cwiseMax(0.0);
  return InputDistribution(p / p.sum());
}

double row_divergence(const Dmc& dmc, Eigen::Index k, Eigen::Index m) {
  const auto& P = dmc.transition();
  double d = 0.0;
  for (Eigen::Index j = 0; j < P.cols(); ++j) {
    const double a = P(k, j);
    if (a <= 0.0) continue;
    const double b = P(m, j);
    if (b <= 0.0) return kInf;
    d += a * std::log(a / b);
  }
  return std::max(d, 0.0);
}

Eigen::VectorXd output_distribution(const Dmc& dmc, const InputDistribution& phi) {
  return dmc.transition().transpose() * phi.probs();
}

double mutual_information(const Dmc& dmc, const InputDistribution& phi) {
  const auto& P = dmc.transition();
  const Eigen::VectorXd q = output_distribution(dmc, phi);
  double info = 0.0;
  for (Eigen::Index k = 0; k < P.rows(); ++k) {
    if (phi[k] <= 0.0) continue;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      const double pkj = P(k, j);
      if (pkj <= 0.0) continue;
      info += phi[k] * pkj * std::log(pkj / q(j));
    }
  }
  return std::max(info, 0.0);
}

double average_cost(const Dmc& dmc, const InputDistribution& phi) {
  return dmc.costs().dot(phi.probs());
}

LetterDivergences letter_divergences(const Dmc& dmc) {
  const Eigen::Index n = dmc.inputs();
  LetterDivergences out{Eigen::VectorXd::Zero(n), std::vector<Eigen::Index>(n, 0)};
  for (Eigen::Index k = 0; k < n; ++k) {
    double best = 0.0;
    Eigen::Index arg = k;
    // strict comparison keeps the smallest maximizing index
    for (Eigen::Index m = 0; m < n; ++m) {
      const double d = row_divergence(dmc, k, m);
      if (d > best || (d == best && m < arg)) {
        best = d;
        arg = m;
      }
    }
    out.d(k) = best;
    out.argmax_letter[k] = arg;
  }
  return out;
}

double worst_llr_bound(const Dmc& dmc) {
  const auto& P = dmc.transition();
  double worst = 0.0;
  for (Eigen::Index j = 0; j < P.cols(); ++j) {
    const double hi = P.col(j).maxCoeff();
    const double lo = P.col(j).minCoeff();
    if (lo <= 0.0) return kInf;  // hi > 0 by reachability
    worst = std::max(worst, std::log(hi / lo));
  }
  return worst;
}

bool is_zero_error_capable(const Dmc& dmc) {
  return (dmc.transition().array() == 0.0).any();
}

std::vector<Eigen::Index> zero_cost_letters(const Dmc& dmc) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index k = 0; k < dmc.inputs(); ++k) {
    if (dmc.cost(k) == 0.0) out.push_back(k);
  }
  return out;
}

}  // namespace feedrel
