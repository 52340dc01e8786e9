#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "feedrel/capacity.hpp"
#include "feedrel/divergence.hpp"
#include "feedrel/stats.hpp"

namespace feedrel {

using LetterMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class AcceptRule {
  /// accept iff sum_i ln(P[xA_i, y_i] / P[xR_i, y_i]) >= threshold
  kLlrThreshold,
  /// accept iff some output is impossible under the reject word
  kImpossibleUnderReject,
};

/// Error-and-erasure code used once per round: a block code for the message
/// followed by a confirmation word chosen by the feedback.
struct TwoPhaseCode {
  int ell1 = 0;
  int ell2 = 0;
  std::size_t messages = 0;
  double rate = 0.0;
  double power = 0.0;
  double eta = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  LetterMatrix codebook;  // messages x ell1
  Eigen::VectorXi accept_word;
  Eigen::VectorXi reject_word;
  double threshold = 0.0;
  AcceptRule rule = AcceptRule::kLlrThreshold;
  std::uint64_t seed = 0;

  int ell() const { return ell1 + ell2; }
};

struct CodeOptions {
  double kappa = 0.1;
  double message_cap = 4096;
  int repair_attempts = 1000;
};

/// Builds the two-phase code at rate r and power p with phase split eta
/// (the optimal split when omitted). Throws CodeSizeError when
/// ceil(exp(ell * r)) exceeds the message cap.
TwoPhaseCode build_code(const Dmc& dmc, const CapacityCurve& caps, const DivergenceCurve& divs,
                        double r, double p, std::optional<double> eta, int ell,
                        std::uint64_t seed, const CodeOptions& opts = {});

/// Code for channels with a zero transition probability: phase 2 lasts
/// ceil(ln ell) symbols and accepts only on an output the reject word
/// cannot produce, so an accepted decision is never wrong.
TwoPhaseCode build_zero_error_code(const Dmc& dmc, const CapacityCurve& caps, double r,
                                   double p, int ell,
                                   std::uint64_t seed, const CodeOptions& opts = {});

/// Per-message record of everything the receiver saw.
struct Transcript {
  std::uint64_t trial = 0;
  std::size_t message = 0;
  std::vector<std::uint8_t> outputs;  // rounds * ell channel outputs
  std::vector<std::size_t> tentative;  // phase-1 decision per round
  bool accepted = false;               // false only for truncated trials
  double energy = 0.0;
};

struct SimOptions {
  std::uint64_t max_rounds = 100000;
  /// Keep transcripts of the first `record` trials.
  std::size_t record = 0;
  /// Worker threads; 0 means hardware concurrency capped by FE_THREADS.
  unsigned threads = 0;
  /// Track the receiver's full Bayes posterior over all rounds and record
  /// its entropy and error mass at the stopping time.
  bool track_posterior = false;
};

struct SimResult {
  std::uint64_t trials = 0;
  std::uint64_t errors = 0;
  std::uint64_t truncated = 0;
  std::vector<std::uint64_t> rounds_histogram;  // index = rounds used
  double p_e_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double tau_bar = 0.0;
  double energy_rate = 0.0;
  Moments tau;
  Moments energy;        // per message
  Moments round_energy;  // per round
  Moments wrong_rounds;  // rounds with a wrong tentative decision, per message
  Moments final_entropy;    // posterior entropy at the stopping time (nats)
  Moments posterior_error;  // posterior mass off the decoded message
  std::uint64_t rounds = 0;
  std::uint64_t accepts_wrong = 0;
  std::uint64_t rejects_right = 0;
  /// Exact phase-2 error probabilities of the code.
  double p_ra = 0.0;
  double p_ar = 0.0;
  /// p_ra * E[wrong rounds]: unbiased for the error probability with far
  /// smaller variance than the raw error count when errors are rare.
  double p_e_rb = 0.0;
  double p_e_rb_se = 0.0;
  std::uint64_t seed = 0;
  std::vector<Transcript> transcripts;
};

SimResult simulate_trials(const TwoPhaseCode& code, const Dmc& dmc, std::uint64_t n_trials,
                          std::uint64_t seed, const SimOptions& opts = {});

/// Builds the zero-error code and simulates it. Throws ConsistencyError if
/// an accepted decision is ever wrong.
SimResult simulate_zero_error(const Dmc& dmc, const CapacityCurve& caps, double r, double p,
                              int ell,
                              std::uint64_t n_trials, std::uint64_t seed,
                              const SimOptions& opts = {}, const CodeOptions& code_opts = {});

struct Phase2Errors {
  double p_ra = 0.0;  // accept although the reject word was sent
  double p_ar = 0.0;  // reject although the accept word was sent
  bool binned = false;
  double resolution = 0.0;  // widest merged LLR bin, 0 when exact
  std::size_t atoms = 0;
};

Phase2Errors phase2_error_probs(const TwoPhaseCode& code, const Dmc& dmc,
                                std::size_t atom_cap = 200000);

/// Maximum-likelihood phase-1 decision on ell1 outputs (lowest index on ties).
std::size_t decode_phase1(const TwoPhaseCode& code, const Dmc& dmc, const std::uint8_t* y);

/// Entropy (nats) and normalized weight of `index` for the distribution
/// proportional to exp(log_weights); -inf weights are allowed. `off_mass`
/// is 1 - mass computed without cancellation.
struct PosteriorSummary {
  double entropy = 0.0;
  double mass = 0.0;
  double off_mass = 0.0;
};
PosteriorSummary summarize_posterior(const Eigen::VectorXd& log_weights, Eigen::Index index);

/// Phase-2 decision on ell2 outputs.
bool accept_decision(const TwoPhaseCode& code, const Dmc& dmc, const std::uint8_t* y);

}  // namespace feedrel
