#pragma once

#include <string>
#include <vector>

#include "feedrel/capacity.hpp"
#include "feedrel/divergence.hpp"
#include "feedrel/reliability.hpp"
#include "feedrel/simulator.hpp"

namespace feedrel {

/// Receiver-side view of one message transmission, symbol by symbol.
struct EntropyTrace {
  std::vector<double> h;   // posterior entropy after n symbols, n = 0..tau
  std::vector<double> s;   // energy spent on the true message after n symbols
  std::vector<double> es;  // posterior mean of the energy after n symbols
  std::size_t tau = 0;
  std::size_t tau1 = 0;  // first n with h[n] <= threshold, capped at tau
  std::size_t messages = 0;
  bool message_correct = false;
  double decision_error = 0.0;  // posterior mass off the decoded message at tau
};

/// Replays a transcript through the exact Bayes recursion, using the
/// feedback-dependent encoding of the code. Throws ConsistencyError when
/// the transcript could not have come from this code.
EntropyTrace posterior_trace(const TwoPhaseCode& code, const Dmc& dmc,
                             const Transcript& transcript, double entropy_threshold = 1.0);

std::vector<EntropyTrace> posterior_traces(const TwoPhaseCode& code, const Dmc& dmc,
                                           const std::vector<Transcript>& transcripts,
                                           double entropy_threshold = 1.0);

/// p (ln m - ln p + 1), with value 0 at p = 0.
double fano_bound(double p_e, double m);

/// Lower bound on the expected duration of any feedback code with m
/// messages, error probability p_e and power p. +inf when C(p) = 0.
double duration_lower_bound(const CapacityCurve& caps, double m, double p, double p_e);

/// Asymptotic ceiling on -ln(P_e) / E[tau].
double exponent_ceiling(const ReliabilityPoint& rel);

enum class CheckStatus { kPass, kFail, kVacuous, kAsymptoticNote };

const char* to_string(CheckStatus status);

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::kPass;
  double margin = 0.0;
  std::string details;

  bool ok() const { return status != CheckStatus::kFail; }
};

/// Mean final entropy against the Fano bound at error probability p_e.
CheckResult fano_check(const Moments& final_entropy, double p_e, double m);

/// Mean duration against the duration lower bound at the measured power.
CheckResult duration_check(const CapacityCurve& caps, double tau_bar, double m,
                           double power, double p_e);

struct PhaseBounds {
  double p1 = 0.0;  // measured power before tau1
  double p2 = 0.0;  // measured power after tau1
  double e_tau1 = 0.0;
  double e_tau2 = 0.0;  // mean of tau - tau1
  double e_tau1_lb = 0.0;
  double e_tau2_lb = 0.0;
  double p_e = 0.0;
  CheckResult first;
  CheckResult second;
};

/// Evaluates the two phase-duration lower bounds at the measured phase
/// powers. `divs` may be null for channels with an infinite divergence.
PhaseBounds phase_bounds(const std::vector<EntropyTrace>& traces, const Dmc& dmc,
                         const CapacityCurve& caps, const DivergenceCurve* divs);

struct DriftBin {
  std::size_t n_lo = 0;
  std::size_t n_hi = 0;  // inclusive
  Moments increment;
};

struct SubmartingaleReport {
  std::vector<DriftBin> v_bins;
  std::vector<DriftBin> w_bins;
  CheckResult v;
  CheckResult w;
  CheckResult telescoping;
};

/// Statistical drift tests on the entropy-energy processes
///   V_n = H_n + n C(p) + g_C (E[S_n | F_n] - n p)
///   W_n = ln H_n + n D(p) + g_D (E[S_n | F_n] - n p)
/// binned by time. A bin fails when its mean increment is below -3 SE.
SubmartingaleReport check_submartingales(const std::vector<EntropyTrace>& traces,
                                         const CapacityCurve& caps,
                                         const DivergenceCurve* divs, double p,
                                         std::size_t min_bin = 1000);

/// Pathwise check that the log-entropy never drops by more than f_bound in
/// one step.
CheckResult check_entropy_drop(const std::vector<EntropyTrace>& traces, double f_bound,
                               double slack = 1e-9);

}  // namespace feedrel
