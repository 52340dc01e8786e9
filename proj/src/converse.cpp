#include "feedrel/converse.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace feedrel {

EntropyTrace posterior_trace(const TwoPhaseCode& code, const Dmc& dmc,
                             const Transcript& transcript, double entropy_threshold) {
  const auto M = static_cast<Eigen::Index>(code.messages);
  const int ell = code.ell();
  const std::size_t rounds = transcript.tentative.size();
  if (transcript.outputs.size() != rounds * static_cast<std::size_t>(ell)) {
    throw ConsistencyError("transcript length does not match the round structure");
  }
  if (transcript.message >= code.messages) {
    throw ConsistencyError("transcript message index outside the code");
  }
  const auto& logP = dmc.log_transition();
  EntropyTrace tr;
  tr.messages = code.messages;
  tr.tau = rounds * static_cast<std::size_t>(ell);
  tr.h.reserve(tr.tau + 1);
  tr.s.reserve(tr.tau + 1);
  tr.es.reserve(tr.tau + 1);

  Eigen::VectorXd lw = Eigen::VectorXd::Zero(M);
  Eigen::VectorXd energy = Eigen::VectorXd::Zero(M);
  const auto theta = static_cast<Eigen::Index>(transcript.message);
  auto record = [&]() {
    const PosteriorSummary ps = summarize_posterior(lw, 0);
    tr.h.push_back(ps.entropy);
    tr.s.push_back(energy(theta));
    Eigen::Index mx = 0;
    const double top = lw.maxCoeff(&mx);
    const Eigen::ArrayXd w = (lw.array() - top).exp();
    tr.es.push_back((w * energy.array()).sum() / w.sum());
  };
  record();

  std::size_t guess = 0;
  for (std::size_t r = 0; r < rounds; ++r) {
    const std::uint8_t* y = transcript.outputs.data() + r * ell;
    guess = decode_phase1(code, dmc, y);
    if (guess != transcript.tentative[r]) {
      std::ostringstream os;
      os << "trial " << transcript.trial << " round " << r << ": recorded decision "
         << transcript.tentative[r] << " but the code decodes " << guess;
      throw ConsistencyError(os.str());
    }
    for (int i = 0; i < code.ell1; ++i) {
      for (Eigen::Index m = 0; m < M; ++m) {
        const int x = code.codebook(m, i);
        lw(m) += logP(x, y[i]);
        energy(m) += dmc.cost(x);
      }
      record();
    }
    for (int i = 0; i < code.ell2; ++i) {
      const std::uint8_t yi = y[code.ell1 + i];
      for (Eigen::Index m = 0; m < M; ++m) {
        const int x = static_cast<std::size_t>(m) == guess ? code.accept_word(i)
                                                           : code.reject_word(i);
        lw(m) += logP(x, yi);
        energy(m) += dmc.cost(x);
      }
      record();
    }
  }
  tr.tau1 = tr.tau;
  for (std::size_t n = 0; n <= tr.tau; ++n) {
    if (tr.h[n] <= entropy_threshold) {
      tr.tau1 = n;
      break;
    }
  }
  tr.message_correct = guess == transcript.message;
  tr.decision_error = summarize_posterior(lw, static_cast<Eigen::Index>(guess)).off_mass;
  return tr;
}

std::vector<EntropyTrace> posterior_traces(const TwoPhaseCode& code, const Dmc& dmc,
                                           const std::vector<Transcript>& transcripts,
                                           double entropy_threshold) {
  std::vector<EntropyTrace> out;
  out.reserve(transcripts.size());
  for (const auto& t : transcripts) out.push_back(posterior_trace(code, dmc, t, entropy_threshold));
  return out;
}

double fano_bound(double p_e, double m) {
  if (p_e <= 0.0) return 0.0;
  return p_e * (std::log(m) - std::log(p_e) + 1.0);
}

double duration_lower_bound(const CapacityCurve& caps, double m, double p, double p_e) {
  const double c = caps.value(p);
  if (!(c > 0.0)) return kInf;
  return std::max(0.0, (std::log(m) - fano_bound(p_e, m)) / c);
}

double exponent_ceiling(const ReliabilityPoint& rel) { return rel.exponent; }

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::kPass: return "pass";
    case CheckStatus::kFail: return "fail";
    case CheckStatus::kVacuous: return "vacuous";
    case CheckStatus::kAsymptoticNote: return "asymptotic-note";
  }
  return "unknown";
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

CheckResult fano_check(const Moments& final_entropy, double p_e, double m) {
  CheckResult res;
  res.name = "fano";
  const double bound = fano_bound(p_e, m);
  const double slack = 3.0 * final_entropy.se();
  res.margin = bound + slack - final_entropy.mean();
  res.status = res.margin >= 0.0 ? CheckStatus::kPass : CheckStatus::kFail;
  res.details = "mean final entropy " + fmt(final_entropy.mean()) + " vs bound " + fmt(bound) +
                " + 3 SE " + fmt(slack) + " at error probability " + fmt(p_e);
  return res;
}

CheckResult duration_check(const CapacityCurve& caps, double tau_bar, double m, double power,
                           double p_e) {
  CheckResult res;
  res.name = "duration";
  const double bound = duration_lower_bound(caps, m, power, p_e);
  res.margin = tau_bar - bound;
  if (bound <= 0.0) {
    res.status = CheckStatus::kVacuous;
  } else {
    res.status = res.margin >= 0.0 ? CheckStatus::kPass : CheckStatus::kFail;
  }
  res.details = "mean duration " + fmt(tau_bar) + " vs lower bound " + fmt(bound) +
                " at power " + fmt(power);
  return res;
}

PhaseBounds phase_bounds(const std::vector<EntropyTrace>& traces, const Dmc& dmc,
                         const CapacityCurve& caps, const DivergenceCurve* divs) {
  PhaseBounds out;
  out.first.name = "first-phase-duration";
  out.second.name = "second-phase-duration";
  if (traces.empty()) {
    out.first.status = out.second.status = CheckStatus::kVacuous;
    out.first.details = out.second.details = "no traces";
    return out;
  }
  const double ln_m = std::log(static_cast<double>(traces.front().messages));
  Moments t1, t2, err;
  double s1 = 0.0, s2 = 0.0;
  for (const auto& tr : traces) {
    t1.add(static_cast<double>(tr.tau1));
    t2.add(static_cast<double>(tr.tau - tr.tau1));
    s1 += tr.s[tr.tau1];
    s2 += tr.s[tr.tau] - tr.s[tr.tau1];
    err.add(tr.decision_error);
  }
  out.p_e = err.mean();
  out.e_tau1 = t1.mean();
  out.e_tau2 = t2.mean();
  out.p1 = t1.sum > 0.0 ? s1 / t1.sum : 0.0;
  out.p2 = t2.sum > 0.0 ? s2 / t2.sum : 0.0;

  const double c1 = caps.value(out.p1);
  const double num1 = ln_m * (1.0 - fano_bound(out.p_e, std::exp(ln_m)) - 1.0 / ln_m);
  out.e_tau1_lb = c1 > 0.0 ? std::max(0.0, num1 / c1) : (num1 > 0.0 ? kInf : 0.0);
  out.first.margin = out.e_tau1 - out.e_tau1_lb;
  if (out.e_tau1_lb <= 0.0) {
    out.first.status = CheckStatus::kVacuous;
  } else {
    out.first.status =
        out.first.margin >= -3.0 * t1.se() ? CheckStatus::kPass : CheckStatus::kFail;
  }
  out.first.details = "mean " + fmt(out.e_tau1) + " vs lower bound " + fmt(out.e_tau1_lb) +
                      " at power " + fmt(out.p1);

  const double f = worst_llr_bound(dmc);
  if (divs == nullptr || !std::isfinite(f)) {
    out.second.status = CheckStatus::kVacuous;
    out.second.details = "channel has a zero transition probability";
    return out;
  }
  if (t2.sum == 0.0) {
    out.second.status = CheckStatus::kVacuous;
    out.second.details = "no trace reached the second phase";
    return out;
  }
  if (out.p_e <= 0.0) {
    out.second.status = CheckStatus::kFail;
    out.second.details = "zero error probability on a channel without zero transitions";
    return out;
  }
  const double d2 = divs->value(out.p2);
  const double num2 = -std::log(out.p_e) - f - std::log(ln_m - std::log(out.p_e) + 1.0);
  out.e_tau2_lb = d2 > 0.0 ? std::max(0.0, num2 / d2) : (num2 > 0.0 ? kInf : 0.0);
  out.second.margin = out.e_tau2 - out.e_tau2_lb;
  if (out.e_tau2_lb <= 0.0) {
    out.second.status = CheckStatus::kVacuous;
  } else {
    out.second.status =
        out.second.margin >= -3.0 * t2.se() ? CheckStatus::kPass : CheckStatus::kFail;
  }
  out.second.details = "mean " + fmt(out.e_tau2) + " vs lower bound " + fmt(out.e_tau2_lb) +
                       " at power " + fmt(out.p2);
  return out;
}

namespace {

// merges consecutive per-step bins until each holds at least min_bin samples
std::vector<DriftBin> pool(const std::vector<Moments>& per_step, std::size_t min_bin) {
  std::vector<DriftBin> bins;
  DriftBin cur;
  bool open = false;
  for (std::size_t n = 0; n < per_step.size(); ++n) {
    if (per_step[n].n == 0) continue;
    if (!open) {
      cur = DriftBin{n, n, {}};
      open = true;
    }
    cur.n_hi = n;
    cur.increment.merge(per_step[n]);
    if (cur.increment.n >= min_bin) {
      bins.push_back(cur);
      open = false;
    }
  }
  if (open) {
    if (bins.empty()) {
      bins.push_back(cur);
    } else {
      bins.back().n_hi = cur.n_hi;
      bins.back().increment.merge(cur.increment);
    }
  }
  return bins;
}

// absolute allowance for rounding in increments whose true mean is exactly 0
constexpr double kRoundoff = 1e-9;

CheckResult judge(const std::string& name, const std::vector<DriftBin>& bins) {
  CheckResult res;
  res.name = name;
  res.margin = kInf;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const auto& b = bins[i].increment;
    const double m = b.mean() + 3.0 * b.se();
    if (m < res.margin) {
      res.margin = m;
      worst = i;
    }
  }
  if (bins.empty()) {
    res.status = CheckStatus::kVacuous;
    res.margin = 0.0;
    res.details = "no steps";
    return res;
  }
  res.status = res.margin >= -kRoundoff ? CheckStatus::kPass : CheckStatus::kFail;
  const auto& b = bins[worst];
  res.details = std::to_string(bins.size()) + " bins; tightest n in [" +
                std::to_string(b.n_lo) + ", " + std::to_string(b.n_hi) + "] mean " +
                fmt(b.increment.mean()) + " SE " + fmt(b.increment.se());
  return res;
}

struct Multipliers {
  double left, right;
};

}  // namespace

SubmartingaleReport check_submartingales(const std::vector<EntropyTrace>& traces,
                                         const CapacityCurve& caps,
                                         const DivergenceCurve* divs, double p,
                                         std::size_t min_bin) {
  SubmartingaleReport rep;
  std::size_t longest = 0;
  for (const auto& tr : traces) longest = std::max(longest, tr.tau);
  const double c = caps.value(p);
  // at a breakpoint both one-sided slopes are valid multipliers; test each
  const Multipliers gc{p > 1e-9 ? caps.slope(p - 1e-9) : caps.slope(p), caps.slope(p)};

  CheckResult v_worst;
  v_worst.margin = kInf;
  CheckResult tele_worst;
  tele_worst.margin = kInf;
  for (double g : {gc.left, gc.right}) {
    std::vector<Moments> steps(longest);
    Moments end;
    for (const auto& tr : traces) {
      for (std::size_t n = 0; n < tr.tau; ++n) {
        steps[n].add(tr.h[n + 1] - tr.h[n] + c + g * (tr.es[n + 1] - tr.es[n] - p));
      }
      const auto t = static_cast<double>(tr.tau);
      end.add(tr.h[tr.tau] + t * c + g * (tr.es[tr.tau] - t * p));
    }
    auto bins = pool(steps, min_bin);
    CheckResult r = judge("entropy-energy drift", bins);
    if (r.margin < v_worst.margin) {
      v_worst = r;
      rep.v_bins = std::move(bins);
    }
    if (!traces.empty()) {
      const double ln_m = std::log(static_cast<double>(traces.front().messages));
      CheckResult tele;
      tele.name = "stopped entropy-energy";
      tele.margin = end.mean() + 3.0 * end.se() - ln_m;
      tele.status = tele.margin >= 0.0 ? CheckStatus::kPass : CheckStatus::kFail;
      tele.details = "mean at stopping " + fmt(end.mean()) + " vs initial " + fmt(ln_m);
      if (tele.margin < tele_worst.margin) tele_worst = tele;
    }
  }
  rep.v = v_worst;
  rep.telescoping = tele_worst;
  if (traces.empty()) {
    rep.telescoping.name = "stopped entropy-energy";
    rep.telescoping.status = CheckStatus::kVacuous;
    rep.telescoping.margin = 0.0;
  }

  rep.w.name = "log-entropy-energy drift";
  if (divs == nullptr) {
    rep.w.status = CheckStatus::kVacuous;
    rep.w.details = "skipped: some letter has infinite divergence";
    return rep;
  }
  const double d = divs->value(p);
  const Multipliers gd{p > 1e-9 ? divs->slope(p - 1e-9) : divs->slope(p), divs->slope(p)};
  CheckResult w_worst;
  w_worst.margin = kInf;
  for (double g : {gd.left, gd.right}) {
    std::vector<Moments> steps(longest);
    for (const auto& tr : traces) {
      for (std::size_t n = 0; n < tr.tau; ++n) {
        steps[n].add(std::log(tr.h[n + 1]) - std::log(tr.h[n]) + d +
                     g * (tr.es[n + 1] - tr.es[n] - p));
      }
    }
    auto bins = pool(steps, min_bin);
    CheckResult r = judge("log-entropy-energy drift", bins);
    if (r.margin < w_worst.margin) {
      w_worst = r;
      rep.w_bins = std::move(bins);
    }
  }
  rep.w = w_worst;
  return rep;
}

CheckResult check_entropy_drop(const std::vector<EntropyTrace>& traces, double f_bound,
                               double slack) {
  CheckResult res;
  res.name = "entropy-drop";
  std::size_t violations = 0;
  std::size_t steps = 0;
  double worst = -kInf;
  std::string first;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    const auto& h = traces[t].h;
    for (std::size_t n = 0; n + 1 < h.size(); ++n) {
      ++steps;
      const double drop = std::log(h[n]) - std::log(h[n + 1]);
      worst = std::max(worst, drop);
      if (!(drop <= f_bound + slack)) {
        if (violations == 0) {
          first = "trace " + std::to_string(t) + " step " + std::to_string(n) + " drop " +
                  fmt(drop);
        }
        ++violations;
      }
    }
  }
  res.margin = f_bound - worst;
  res.status = violations == 0 ? CheckStatus::kPass : CheckStatus::kFail;
  res.details = std::to_string(steps) + " steps, " + std::to_string(violations) +
                " violations, largest drop " + fmt(worst) + " vs bound " + fmt(f_bound);
  if (violations) res.details += "; first at " + first;
  return res;
}

}  // namespace feedrel
