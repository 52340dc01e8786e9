#include "feedrel/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <thread>

#include "feedrel/reliability.hpp"
#include "feedrel/rng.hpp"

namespace feedrel {

namespace {

constexpr std::uint32_t kTrialStream = 0;
constexpr std::uint32_t kCodebookStream = 1;
constexpr int kExpurgationPasses = 64;
constexpr int kExpurgationRedraws = 256;
constexpr std::uint64_t kBlockTrials = 4096;

std::size_t message_count(double ell_r, double cap) {
  const double m = std::ceil(std::exp(ell_r));
  if (!(m <= cap)) {
    std::ostringstream os;
    os << "code needs " << m << " messages, cap is " << cap << "; lower ell * r";
    throw CodeSizeError(os.str(), m, cap);
  }
  return static_cast<std::size_t>(std::max(1.0, m));
}

// cumulative row laws with every entry from the last reachable output on
// pinned to 1, so sampling never lands on an impossible output
std::vector<std::vector<double>> cumulative_rows(const Dmc& dmc) {
  const auto& P = dmc.transition();
  std::vector<std::vector<double>> out(P.rows(), std::vector<double>(P.cols()));
  for (Eigen::Index k = 0; k < P.rows(); ++k) {
    Eigen::Index last = 0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      if (P(k, j) > 0.0) last = j;
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      acc += P(k, j);
      out[k][j] = j >= last ? 1.0 : acc;
    }
  }
  return out;
}

inline int sample_row(const std::vector<double>& cdf, double u) {
  int j = 0;
  const int last = static_cast<int>(cdf.size()) - 1;
  while (j < last && u >= cdf[j]) ++j;
  return j;
}

int draw_letter(const Eigen::VectorXd& cdf, double u) {
  Eigen::Index k = 0;
  while (k + 1 < cdf.size() && u >= cdf(k)) ++k;
  return static_cast<int>(k);
}

Eigen::VectorXd letter_cdf(const InputDistribution& phi) {
  Eigen::VectorXd cdf(phi.size());
  double acc = 0.0;
  Eigen::Index last = 0;
  for (Eigen::Index k = 0; k < phi.size(); ++k) {
    acc += phi[k];
    cdf(k) = acc;
    if (phi[k] > 0.0) last = k;
  }
  for (Eigen::Index k = last; k < phi.size(); ++k) cdf(k) = 1.0;
  return cdf;
}

// true when codeword m is the ML decision for its own most likely output
// sequence, so every message has a positive chance of being decoded
bool self_decodes(const Dmc& dmc, const LetterMatrix& book, Eigen::Index m) {
  const auto& logP = dmc.log_transition();
  const Eigen::Index n = book.cols();
  std::vector<Eigen::Index> y(static_cast<std::size_t>(n));
  double own = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    logP.row(book(m, i)).maxCoeff(&best);
    y[static_cast<std::size_t>(i)] = best;
    own += logP(book(m, i), best);
  }
  for (Eigen::Index o = 0; o < book.rows(); ++o) {
    if (o == m) continue;
    double score = 0.0;
    for (Eigen::Index i = 0; i < n && score > -kInf; ++i) {
      score += logP(book(o, i), y[static_cast<std::size_t>(i)]);
    }
    if (score > own || (score == own && o < m)) return false;
  }
  return true;
}

LetterMatrix draw_codebook(const Dmc& dmc, const InputDistribution& phi, std::size_t messages,
                           int ell1, double cap, std::uint64_t seed, int attempts) {
  const Eigen::VectorXd cdf = letter_cdf(phi);
  attempts = std::max(1, attempts);
  // substitution letter: the zero-cost letter the distribution favors most
  Eigen::Index free_letter = -1;
  for (Eigen::Index k : zero_cost_letters(dmc)) {
    if (free_letter < 0 || phi[k] > phi[free_letter]) free_letter = k;
  }
  LetterMatrix book(static_cast<Eigen::Index>(messages), ell1);
  auto draw = [&](std::size_t m, int generation) {
    double energy = 0.0;
    for (int a = 0; a < attempts; ++a) {
      const auto attempt = static_cast<std::uint64_t>(generation) * attempts + a;
      Philox rng(seed, kCodebookStream, (attempt << 32) | m);
      energy = 0.0;
      for (int i = 0; i < ell1; ++i) {
        const int x = draw_letter(cdf, rng.uniform());
        book(m, i) = x;
        energy += dmc.cost(x);
      }
      if (energy <= cap) return;
    }
    std::vector<int> order(ell1);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return dmc.cost(book(m, a)) > dmc.cost(book(m, b));
    });
    for (int i : order) {
      if (energy <= cap) break;
      energy -= dmc.cost(book(m, i));
      book(m, i) = static_cast<int>(free_letter);
    }
  };
  for (std::size_t m = 0; m < messages; ++m) draw(m, 0);

  // expurgation: redraw words that no output sequence decodes to
  std::vector<int> generation(messages, 0);
  for (int pass = 0; pass < kExpurgationPasses; ++pass) {
    bool changed = false;
    for (std::size_t m = 0; m < messages; ++m) {
      if (self_decodes(dmc, book, static_cast<Eigen::Index>(m))) continue;
      if (generation[m] >= kExpurgationRedraws) continue;
      draw(m, ++generation[m]);
      changed = true;
    }
    if (!changed) break;
  }
  return book;
}

// largest-remainder apportionment of n symbols to the weights of phi
Eigen::VectorXi apportion(const InputDistribution& phi, int n) {
  const Eigen::Index K = phi.size();
  Eigen::VectorXi counts(K);
  std::vector<std::pair<double, Eigen::Index>> rem;
  int used = 0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const double share = phi[k] * n;
    counts(k) = static_cast<int>(std::floor(share));
    used += counts(k);
    rem.push_back({share - counts(k), k});
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; used < n; ++i, ++used) counts(rem[i].second) += 1;
  return counts;
}

double llr_term(const Dmc& dmc, int a, int b, int y) {
  const double pa = dmc.transition()(a, y);
  const double pb = dmc.transition()(b, y);
  if (pa > 0.0 && pb > 0.0) return dmc.log_transition()(a, y) - dmc.log_transition()(b, y);
  if (pa > 0.0) return kInf;
  if (pb > 0.0) return -kInf;
  return 0.0;
}

bool accepts(AcceptRule rule, double threshold, double llr) {
  if (rule == AcceptRule::kImpossibleUnderReject) return llr == kInf;
  if (threshold == -kInf) return true;
  if (threshold == kInf) return false;
  return llr >= threshold;
}

unsigned worker_count(unsigned requested, std::uint64_t blocks) {
  unsigned n = requested;
  if (n == 0) {
    n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("FE_THREADS")) {
      const long cap = std::strtol(env, nullptr, 10);
      if (cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
  }
  return static_cast<unsigned>(std::max<std::uint64_t>(1, std::min<std::uint64_t>(n, blocks)));
}

struct BlockStats {
  std::uint64_t errors = 0;
  std::uint64_t truncated = 0;
  std::uint64_t rounds = 0;
  std::uint64_t accepts_wrong = 0;
  std::uint64_t rejects_right = 0;
  std::vector<std::uint64_t> histogram;
  Moments tau, energy, round_energy, wrong_rounds, final_entropy, posterior_error;
};

// Precomputed per-code tables shared by all workers.
struct Engine {
  const TwoPhaseCode& code;
  const Dmc& dmc;
  std::vector<std::vector<double>> cdf;
  Eigen::MatrixXd score;  // messages x (ell1 * outputs) log-likelihood table
  Eigen::MatrixXd llr;    // ell2 x outputs
  std::vector<double> word_energy;
  double accept_energy = 0.0;
  double reject_energy = 0.0;
  int outputs = 0;

  Engine(const TwoPhaseCode& c, const Dmc& d) : code(c), dmc(d), cdf(cumulative_rows(d)) {
    outputs = static_cast<int>(d.outputs());
    const auto M = static_cast<Eigen::Index>(c.messages);
    score.resize(M, static_cast<Eigen::Index>(c.ell1) * outputs);
    word_energy.assign(c.messages, 0.0);
    for (Eigen::Index m = 0; m < M; ++m) {
      for (int i = 0; i < c.ell1; ++i) {
        const int x = c.codebook(m, i);
        word_energy[m] += d.cost(x);
        for (int y = 0; y < outputs; ++y) score(m, i * outputs + y) = d.log_transition()(x, y);
      }
    }
    llr.resize(c.ell2, outputs);
    for (int i = 0; i < c.ell2; ++i) {
      accept_energy += d.cost(c.accept_word(i));
      reject_energy += d.cost(c.reject_word(i));
      for (int y = 0; y < outputs; ++y) {
        llr(i, y) = llr_term(d, c.accept_word(i), c.reject_word(i), y);
      }
    }
  }

  void run(std::uint64_t first, std::uint64_t last, std::uint64_t seed,
           const SimOptions& opts, std::vector<Transcript>* keep, BlockStats& st) const {
    const std::size_t M = code.messages;
    const std::uint64_t max_rounds = opts.max_rounds;
    Eigen::VectorXd s(static_cast<Eigen::Index>(M));
    Eigen::VectorXd lw(static_cast<Eigen::Index>(M));
    std::vector<std::uint8_t> y1(code.ell1), y2(code.ell2);
    for (std::uint64_t t = first; t < last; ++t) {
      Philox rng(seed, kTrialStream, t);
      const std::size_t theta = M > 1 ? static_cast<std::size_t>(rng.below(M)) : 0;
      Transcript* tr = keep && t < keep->size() ? &(*keep)[t] : nullptr;
      if (tr) {
        tr->trial = t;
        tr->message = theta;
      }
      double energy = 0.0;
      std::uint64_t rounds = 0;
      std::uint64_t wrong = 0;
      bool done = false;
      bool error = false;
      std::size_t last_guess = 0;
      if (opts.track_posterior) lw.setZero();
      while (!done && rounds < max_rounds) {
        ++rounds;
        s.setZero();
        for (int i = 0; i < code.ell1; ++i) {
          const int x = code.codebook(theta, i);
          const int y = sample_row(cdf[x], rng.uniform());
          y1[i] = static_cast<std::uint8_t>(y);
          s += score.col(i * outputs + y);
        }
        std::size_t guess = 0;
        for (std::size_t m = 1; m < M; ++m) {
          if (s(m) > s(guess)) guess = m;
        }
        const bool right = guess == theta;
        last_guess = guess;
        if (!right) ++wrong;
        const Eigen::VectorXi& word = right ? code.accept_word : code.reject_word;
        double sum = 0.0;
        bool pos = false, neg = false;
        for (int i = 0; i < code.ell2; ++i) {
          const int y = sample_row(cdf[word(i)], rng.uniform());
          y2[i] = static_cast<std::uint8_t>(y);
          const double v = llr(i, y);
          if (v == kInf) {
            pos = true;
          } else if (v == -kInf) {
            neg = true;
          } else {
            sum += v;
          }
        }
        const double total = neg ? -kInf : (pos ? kInf : sum);
        if (opts.track_posterior) {
          // phase 2 depends on the message only through whether it matches
          // the tentative decision
          double la = 0.0, lr = 0.0;
          for (int i = 0; i < code.ell2; ++i) {
            la += dmc.log_transition()(code.accept_word(i), y2[i]);
            lr += dmc.log_transition()(code.reject_word(i), y2[i]);
          }
          lw += s;
          for (std::size_t m = 0; m < M; ++m) lw(m) += m == guess ? la : lr;
        }
        const double round_energy =
            word_energy[theta] + (right ? accept_energy : reject_energy);
        energy += round_energy;
        st.round_energy.add(round_energy);
        done = accepts(code.rule, code.threshold, total);
        if (done && !right) {
          error = true;
          ++st.accepts_wrong;
        }
        if (!done && right) ++st.rejects_right;
        if (tr) {
          tr->outputs.insert(tr->outputs.end(), y1.begin(), y1.end());
          tr->outputs.insert(tr->outputs.end(), y2.begin(), y2.end());
          tr->tentative.push_back(guess);
        }
      }
      if (tr) {
        tr->accepted = done;
        tr->energy = energy;
      }
      if (!done) ++st.truncated;
      if (error) ++st.errors;
      st.rounds += rounds;
      if (st.histogram.size() <= rounds) st.histogram.resize(rounds + 1, 0);
      ++st.histogram[rounds];
      st.tau.add(static_cast<double>(rounds) * code.ell());
      st.energy.add(energy);
      st.wrong_rounds.add(static_cast<double>(wrong));
      if (opts.track_posterior) {
        const PosteriorSummary ps = summarize_posterior(lw, static_cast<Eigen::Index>(last_guess));
        st.final_entropy.add(ps.entropy);
        st.posterior_error.add(ps.off_mass);
      }
    }
  }
};

}  // namespace

TwoPhaseCode build_code(const Dmc& dmc, const CapacityCurve& caps, const DivergenceCurve& divs,
                        double r, double p, std::optional<double> eta, int ell,
                        std::uint64_t seed, const CodeOptions& opts) {
  if (ell < 2) throw DomainError("block length must be at least 2", 2.0);
  const auto [lo, hi] = feasible_interval(caps, r, p);
  double split = 0.0;
  if (eta) {
    split = *eta;
    if (!(split >= lo - 1e-12 && split <= hi + 1e-12)) {
      std::ostringstream os;
      os.precision(12);
      os << "phase split " << split << " outside feasible interval [" << lo << ", " << hi << "]";
      throw InfeasibleSplit(os.str(), lo, hi);
    }
    split = std::clamp(split, lo, hi);
  } else {
    split = reliability(caps, divs, r, p).eta_opt;
  }
  if (split >= 1.0) throw InfeasibleSplit("phase split leaves no room for phase 2", lo, hi);

  TwoPhaseCode code;
  code.messages = message_count(ell * r, opts.message_cap);
  code.ell1 = std::clamp(static_cast<int>(std::lround(split * ell)), 1, ell - 1);
  code.ell2 = ell - code.ell1;
  code.rate = r;
  code.power = p;
  code.eta = split;
  code.seed = seed;
  const double target = std::clamp(r / split, caps.c0(), caps.c_star());
  code.p1 = std::min(capacity_inverse(caps, target), caps.p_star());
  code.p2 = std::max(0.0, (p - split * code.p1) / (1.0 - split));

  const InputDistribution phi1 = capacity_at(dmc, code.p1).phi;
  code.codebook = draw_codebook(dmc, phi1, code.messages, code.ell1,
                                code.ell1 * code.p1 + 1e-9, seed, opts.repair_attempts);

  const DivergencePoint dp = divergence_at(divs, code.p2);
  Eigen::VectorXi counts = apportion(dp.phi, code.ell2);
  auto word_cost = [&]() {
    double e = 0.0;
    for (Eigen::Index k = 0; k < counts.size(); ++k) e += counts(k) * dmc.cost(k);
    return e;
  };
  while (word_cost() > code.ell2 * code.p2 + 1e-9) {
    Eigen::Index dear = -1, cheap = -1;
    for (Eigen::Index k = 0; k < counts.size(); ++k) {
      if (dp.phi[k] <= 0.0 && counts(k) == 0) continue;
      if (counts(k) > 0 && (dear < 0 || dmc.cost(k) > dmc.cost(dear))) dear = k;
      if (cheap < 0 || dmc.cost(k) < dmc.cost(cheap)) cheap = k;
    }
    if (dear < 0 || cheap < 0 || dmc.cost(cheap) >= dmc.cost(dear)) break;
    --counts(dear);
    ++counts(cheap);
  }
  const LetterDivergences ld = letter_divergences(dmc);
  code.accept_word.resize(code.ell2);
  code.reject_word.resize(code.ell2);
  double dsum = 0.0;
  int pos = 0;
  for (Eigen::Index k = 0; k < counts.size(); ++k) {
    for (int c = 0; c < counts(k); ++c, ++pos) {
      code.accept_word(pos) = static_cast<int>(k);
      code.reject_word(pos) = static_cast<int>(ld.argmax_letter[k]);
      dsum += ld.d(k);
    }
  }
  code.threshold = (1.0 - opts.kappa) * dsum;
  code.rule = AcceptRule::kLlrThreshold;
  return code;
}

TwoPhaseCode build_zero_error_code(const Dmc& dmc, const CapacityCurve& caps, double r,
                                   double p, int ell, std::uint64_t seed,
                                   const CodeOptions& opts) {
  if (!is_zero_error_capable(dmc)) {
    throw DomainError("channel has no zero transition probability", 0.0);
  }
  if (ell < 2) throw DomainError("block length must be at least 2", 2.0);
  const double cp = caps.value(p);
  if (!(r > 0.0 && r < cp)) throw DomainError("rate must lie in (0, C(p))", cp);

  TwoPhaseCode code;
  code.ell2 = std::max(1, static_cast<int>(std::ceil(std::log(static_cast<double>(ell)))));
  code.ell1 = ell - code.ell2;
  if (code.ell1 < 1) throw DomainError("block too short for the confirmation phase", ell);
  code.messages = message_count(ell * r, opts.message_cap);
  code.rate = r;
  code.power = p;
  code.eta = static_cast<double>(code.ell1) / ell;
  code.p1 = p;
  code.seed = seed;

  // cheapest letter k with a partner m that cannot produce some output k can;
  // ties go to the pair with the larger per-symbol chance of such an output
  const auto& P = dmc.transition();
  int best_k = -1, best_m = -1;
  double best_mass = -1.0;
  for (Eigen::Index k = 0; k < P.rows(); ++k) {
    for (Eigen::Index m = 0; m < P.rows(); ++m) {
      double mass = 0.0;
      for (Eigen::Index j = 0; j < P.cols(); ++j) {
        if (P(m, j) == 0.0) mass += P(k, j);
      }
      if (mass <= 0.0) continue;
      const bool better = best_k < 0 || dmc.cost(k) < dmc.cost(best_k) ||
                          (dmc.cost(k) == dmc.cost(best_k) && mass > best_mass);
      if (better) {
        best_k = static_cast<int>(k);
        best_m = static_cast<int>(m);
        best_mass = mass;
      }
    }
  }
  code.p2 = dmc.cost(best_k);
  code.accept_word = Eigen::VectorXi::Constant(code.ell2, best_k);
  code.reject_word = Eigen::VectorXi::Constant(code.ell2, best_m);
  code.threshold = kInf;
  code.rule = AcceptRule::kImpossibleUnderReject;

  const InputDistribution phi1 = capacity_at(dmc, p).phi;
  code.codebook = draw_codebook(dmc, phi1, code.messages, code.ell1, code.ell1 * p + 1e-9, seed,
                                opts.repair_attempts);
  return code;
}

SimResult simulate_trials(const TwoPhaseCode& code, const Dmc& dmc, std::uint64_t n_trials,
                          std::uint64_t seed, const SimOptions& opts) {
  if (n_trials < 1) throw DomainError("need at least one trial", 1.0);
  const Engine engine(code, dmc);
  const std::uint64_t blocks = (n_trials + kBlockTrials - 1) / kBlockTrials;
  std::vector<BlockStats> stats(blocks);
  std::vector<Transcript> keep(std::min<std::uint64_t>(opts.record, n_trials));
  std::atomic<std::uint64_t> next{0};
  auto worker = [&]() {
    for (std::uint64_t b = next++; b < blocks; b = next++) {
      const std::uint64_t first = b * kBlockTrials;
      const std::uint64_t last = std::min(n_trials, first + kBlockTrials);
      engine.run(first, last, seed, opts, keep.empty() ? nullptr : &keep, stats[b]);
    }
  };
  const unsigned n_workers = worker_count(opts.threads, blocks);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SimResult res;
  res.trials = n_trials;
  res.seed = seed;
  for (const auto& st : stats) {
    res.errors += st.errors;
    res.truncated += st.truncated;
    res.rounds += st.rounds;
    res.accepts_wrong += st.accepts_wrong;
    res.rejects_right += st.rejects_right;
    if (res.rounds_histogram.size() < st.histogram.size()) {
      res.rounds_histogram.resize(st.histogram.size(), 0);
    }
    for (std::size_t i = 0; i < st.histogram.size(); ++i) res.rounds_histogram[i] += st.histogram[i];
    res.tau.merge(st.tau);
    res.energy.merge(st.energy);
    res.round_energy.merge(st.round_energy);
    res.wrong_rounds.merge(st.wrong_rounds);
    res.final_entropy.merge(st.final_entropy);
    res.posterior_error.merge(st.posterior_error);
  }
  res.p_e_hat = static_cast<double>(res.errors) / static_cast<double>(n_trials);
  const ConfidenceInterval ci = wilson_interval(res.errors, n_trials);
  res.ci_low = ci.lo;
  res.ci_high = ci.hi;
  res.tau_bar = res.tau.mean();
  res.energy_rate = res.tau.sum > 0.0 ? res.energy.sum / res.tau.sum : 0.0;
  const Phase2Errors pe = phase2_error_probs(code, dmc);
  res.p_ra = pe.p_ra;
  res.p_ar = pe.p_ar;
  res.p_e_rb = pe.p_ra * res.wrong_rounds.mean();
  res.p_e_rb_se = pe.p_ra * res.wrong_rounds.se();
  res.transcripts = std::move(keep);
  return res;
}

SimResult simulate_zero_error(const Dmc& dmc, const CapacityCurve& caps, double r, double p,
                              int ell, std::uint64_t n_trials, std::uint64_t seed,
                              const SimOptions& opts, const CodeOptions& code_opts) {
  const TwoPhaseCode code = build_zero_error_code(dmc, caps, r, p, ell, seed, code_opts);
  SimResult res = simulate_trials(code, dmc, n_trials, seed, opts);
  if (res.errors != 0) {
    std::ostringstream os;
    os << res.errors << " wrong decisions were accepted by the zero-error scheme";
    throw ConsistencyError(os.str());
  }
  return res;
}

Phase2Errors phase2_error_probs(const TwoPhaseCode& code, const Dmc& dmc, std::size_t atom_cap) {
  struct Atom {
    double v, pa, pr;
  };
  const auto& P = dmc.transition();
  std::vector<Atom> atoms{{0.0, 1.0, 1.0}}, next;
  Phase2Errors out;
  for (int i = 0; i < code.ell2; ++i) {
    const int a = code.accept_word(i);
    const int b = code.reject_word(i);
    next.clear();
    for (const Atom& at : atoms) {
      for (Eigen::Index y = 0; y < P.cols(); ++y) {
        const double pa = at.pa * P(a, y);
        const double pr = at.pr * P(b, y);
        if (pa == 0.0 && pr == 0.0) continue;
        next.push_back({at.v + llr_term(dmc, a, b, static_cast<int>(y)), pa, pr});
      }
    }
    std::sort(next.begin(), next.end(), [](const Atom& x, const Atom& y) { return x.v < y.v; });
    atoms.clear();
    for (const Atom& at : next) {
      if (!atoms.empty()) {
        Atom& back = atoms.back();
        const bool same = back.v == at.v ||
                          (std::isfinite(at.v) &&
                           std::abs(back.v - at.v) <= 1e-12 * std::max(1.0, std::abs(at.v)));
        if (same) {
          back.pa += at.pa;
          back.pr += at.pr;
          continue;
        }
      }
      atoms.push_back(at);
    }
    if (atoms.size() > atom_cap) {
      double lo = kInf, hi = -kInf;
      for (const Atom& at : atoms) {
        if (std::isfinite(at.v)) {
          lo = std::min(lo, at.v);
          hi = std::max(hi, at.v);
        }
      }
      const double width = (hi - lo) / static_cast<double>(atom_cap / 2);
      std::vector<Atom> binned;
      long current = -1;
      for (const Atom& at : atoms) {
        if (!std::isfinite(at.v)) {
          binned.push_back(at);
          current = -1;
          continue;
        }
        const long bin = static_cast<long>((at.v - lo) / width);
        if (bin == current && !binned.empty()) {
          Atom& back = binned.back();
          const double w0 = back.pa + back.pr;
          const double w1 = at.pa + at.pr;
          back.v = (back.v * w0 + at.v * w1) / (w0 + w1);
          back.pa += at.pa;
          back.pr += at.pr;
        } else {
          binned.push_back(at);
          current = bin;
        }
      }
      atoms = std::move(binned);
      out.binned = true;
      out.resolution = std::max(out.resolution, width);
    }
  }
  for (const Atom& at : atoms) {
    if (accepts(code.rule, code.threshold, at.v)) {
      out.p_ra += at.pr;
    } else {
      out.p_ar += at.pa;
    }
  }
  out.atoms = atoms.size();
  return out;
}

PosteriorSummary summarize_posterior(const Eigen::VectorXd& log_weights, Eigen::Index index) {
  Eigen::Index mx = 0;
  const double top = log_weights.maxCoeff(&mx);
  if (!std::isfinite(top)) throw ConsistencyError("outputs are impossible under every message");
  double rest = 0.0;
  for (Eigen::Index m = 0; m < log_weights.size(); ++m) {
    if (m != mx) rest += std::exp(log_weights(m) - top);
  }
  const double z = 1.0 + rest;
  const double lz = std::log1p(rest);
  PosteriorSummary out;
  // -p ln p for the top entry is ln(z)/z; the others are p_m (ln z - d_m)
  out.entropy = lz / z;
  for (Eigen::Index m = 0; m < log_weights.size(); ++m) {
    if (m == mx) continue;
    const double d = log_weights(m) - top;
    if (d == -kInf) continue;
    out.entropy += std::exp(d) / z * (lz - d);
  }
  out.entropy = std::max(0.0, out.entropy);
  const double di = log_weights(index) - top;
  if (index == mx) {
    out.mass = 1.0 / z;
    out.off_mass = rest / z;
  } else {
    const double wi = di == -kInf ? 0.0 : std::exp(di);
    out.mass = wi / z;
    out.off_mass = (1.0 + rest - wi) / z;
  }
  return out;
}

std::size_t decode_phase1(const TwoPhaseCode& code, const Dmc& dmc, const std::uint8_t* y) {
  std::size_t best = 0;
  double best_score = -kInf;
  for (std::size_t m = 0; m < code.messages; ++m) {
    double s = 0.0;
    for (int i = 0; i < code.ell1; ++i) s += dmc.log_transition()(code.codebook(m, i), y[i]);
    if (m == 0 || s > best_score) {
      best = m;
      best_score = s;
    }
  }
  return best;
}

bool accept_decision(const TwoPhaseCode& code, const Dmc& dmc, const std::uint8_t* y) {
  double sum = 0.0;
  bool pos = false, neg = false;
  for (int i = 0; i < code.ell2; ++i) {
    const double v = llr_term(dmc, code.accept_word(i), code.reject_word(i), y[i]);
    if (v == kInf) {
      pos = true;
    } else if (v == -kInf) {
      neg = true;
    } else {
      sum += v;
    }
  }
  return accepts(code.rule, code.threshold, neg ? -kInf : (pos ? kInf : sum));
}

}  // namespace feedrel
