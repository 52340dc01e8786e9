#include <gtest/gtest.h>

#include "feedrel/converse.hpp"
#include "feedrel/io.hpp"

namespace feedrel {
namespace {

struct Fixture {
  Dmc dmc = free_symbol_bsc_channel(0.1);
  CapacityCurve caps = build_capacity_curve(dmc);
  DivergenceCurve divs = build_divergence_curve(dmc);
  double p = 0.5;
  TwoPhaseCode code = build_code(dmc, caps, divs, 0.25 * caps.c_star(), p, std::nullopt, 16, 21);
  SimResult sim = [this] {
    SimOptions o;
    o.record = 400;
    return simulate_trials(code, dmc, 400, 22, o);
  }();
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

TEST(Fano, Values) {
  EXPECT_EQ(fano_bound(0.0, 100), 0.0);
  EXPECT_NEAR(fano_bound(0.1, 100), 0.1 * (std::log(100.0) - std::log(0.1) + 1), 1e-15);
  Moments low;
  for (int i = 0; i < 100; ++i) low.add(0.01);
  EXPECT_EQ(fano_check(low, 0.1, 100).status, CheckStatus::kPass);
  Moments high;
  for (int i = 0; i < 100; ++i) high.add(2.0);
  EXPECT_EQ(fano_check(high, 0.1, 100).status, CheckStatus::kFail);
}

TEST(Duration, LowerBound) {
  const auto& f = fx();
  const double c = f.caps.value(0.5);
  EXPECT_NEAR(duration_lower_bound(f.caps, 50, 0.5, 0.0), std::log(50.0) / c, 1e-12);
  EXPECT_NEAR(duration_lower_bound(f.caps, 50, 0.5, 0.01),
              (std::log(50.0) - fano_bound(0.01, 50)) / c, 1e-12);
  EXPECT_EQ(duration_lower_bound(f.caps, 50, 0.0, 0.01), kInf);
  EXPECT_EQ(duration_lower_bound(f.caps, 50, 0.5, 0.9), 0.0);
  EXPECT_EQ(duration_check(f.caps, 1.0, 50, 0.5, 0.9).status, CheckStatus::kVacuous);
  EXPECT_EQ(duration_check(f.caps, 1.0, 50, 0.5, 0.0).status, CheckStatus::kFail);
}

// posterior over messages, recomputed from scratch
struct Replay {
  std::vector<double> lw;
  std::vector<double> energy;
};

double entropy_of(const std::vector<double>& lw) {
  std::size_t top = 0;
  for (std::size_t m = 1; m < lw.size(); ++m) {
    if (lw[m] > lw[top]) top = m;
  }
  double rest = 0.0;
  for (std::size_t m = 0; m < lw.size(); ++m) {
    if (m != top) rest += std::exp(lw[m] - lw[top]);
  }
  // the top term -q ln q equals log1p(rest) / (1 + rest); naive evaluation
  // loses every digit once the entropy is near machine epsilon
  const double lz = std::log1p(rest);
  double h = lz / (1.0 + rest);
  for (std::size_t m = 0; m < lw.size(); ++m) {
    const double d = lw[m] - lw[top];
    if (m != top && d > -kInf) h += std::exp(d) / (1.0 + rest) * (lz - d);
  }
  return h;
}

std::vector<double> weights(const std::vector<double>& lw) {
  double top = -kInf;
  for (double v : lw) top = std::max(top, v);
  std::vector<double> w(lw.size());
  double z = 0.0;
  for (std::size_t m = 0; m < lw.size(); ++m) z += w[m] = std::exp(lw[m] - top);
  for (double& v : w) v /= z;
  return w;
}

TEST(PosteriorTrace, InvariantsAndIndependentReplay) {
  const auto& f = fx();
  const auto M = f.code.messages;
  const double ln_m = std::log(static_cast<double>(M));
  for (const auto& t : f.sim.transcripts) {
    const EntropyTrace tr = posterior_trace(f.code, f.dmc, t);
    ASSERT_EQ(tr.h.size(), tr.tau + 1);
    EXPECT_EQ(tr.tau, t.tentative.size() * f.code.ell());
    EXPECT_NEAR(tr.h[0], ln_m, 1e-12);
    EXPECT_EQ(tr.s[0], 0.0);
    for (std::size_t n = 0; n <= tr.tau; ++n) {
      EXPECT_GE(tr.h[n], 0.0);
      EXPECT_LE(tr.h[n], ln_m + 1e-12);
      if (n > 0) {
        const double ds = tr.s[n] - tr.s[n - 1];
        bool is_cost = false;
        for (Eigen::Index k = 0; k < f.dmc.inputs(); ++k) is_cost |= ds == f.dmc.cost(k);
        EXPECT_TRUE(is_cost);
      }
    }
    for (std::size_t n = 0; n < tr.tau1; ++n) EXPECT_GT(tr.h[n], 1.0);
    if (tr.tau1 < tr.tau) EXPECT_LE(tr.h[tr.tau1], 1.0);
    EXPECT_EQ(tr.message_correct, t.tentative.back() == t.message);

    Replay rp{std::vector<double>(M, 0.0), std::vector<double>(M, 0.0)};
    std::size_t n = 0;
    for (std::size_t r = 0; r < t.tentative.size(); ++r) {
      for (int i = 0; i < f.code.ell(); ++i) {
        const int y = t.outputs[r * f.code.ell() + i];
        for (std::size_t m = 0; m < M; ++m) {
          const int x = i < f.code.ell1 ? f.code.codebook(m, i)
                                        : (m == t.tentative[r] ? f.code.accept_word(i - f.code.ell1)
                                                               : f.code.reject_word(i - f.code.ell1));
          rp.lw[m] += std::log(f.dmc.transition()(x, y));
          rp.energy[m] += f.dmc.cost(x);
        }
        ++n;
        ASSERT_NEAR(tr.h[n], entropy_of(rp.lw), 1e-10);
        const auto w = weights(rp.lw);
        double es = 0.0;
        for (std::size_t m = 0; m < M; ++m) es += w[m] * rp.energy[m];
        ASSERT_NEAR(tr.es[n], es, 1e-10);
        ASSERT_EQ(tr.s[n], rp.energy[t.message]);
      }
    }
  }
}

TEST(PosteriorTrace, TamperedTranscriptIsRejected) {
  const auto& f = fx();
  Transcript t = f.sim.transcripts.front();
  t.tentative[0] = (t.tentative[0] + 1) % f.code.messages;
  EXPECT_THROW(posterior_trace(f.code, f.dmc, t), ConsistencyError);
  t = f.sim.transcripts.front();
  t.outputs.pop_back();
  EXPECT_THROW(posterior_trace(f.code, f.dmc, t), ConsistencyError);
  t = f.sim.transcripts.front();
  t.message = f.code.messages;
  EXPECT_THROW(posterior_trace(f.code, f.dmc, t), ConsistencyError);
}

// exact conditional drift of both processes from every state on recorded paths
TEST(Drift, ExactConditionalIncrementsAreNonnegative) {
  const auto& f = fx();
  const auto M = f.code.messages;
  const auto& P = f.dmc.transition();
  const double c = f.caps.value(f.p), d = f.divs.value(f.p);
  const double gc[] = {f.caps.slope(f.p - 1e-9), f.caps.slope(f.p)};
  const double gd[] = {f.divs.slope(f.p - 1e-9), f.divs.slope(f.p)};
  double worst_v = kInf, worst_w = kInf;
  for (std::size_t k = 0; k < 40; ++k) {
    const Transcript& t = f.sim.transcripts[k];
    std::vector<double> lw(M, 0.0);
    for (std::size_t r = 0; r < t.tentative.size(); ++r) {
      for (int i = 0; i < f.code.ell(); ++i) {
        std::vector<int> x(M);
        for (std::size_t m = 0; m < M; ++m) {
          x[m] = i < f.code.ell1 ? f.code.codebook(m, i)
                                 : (m == t.tentative[r] ? f.code.accept_word(i - f.code.ell1)
                                                        : f.code.reject_word(i - f.code.ell1));
        }
        const auto w = weights(lw);
        const double h0 = entropy_of(lw);
        double pn = 0.0;
        for (std::size_t m = 0; m < M; ++m) pn += w[m] * f.dmc.cost(x[m]);
        double eh = 0.0, elh = 0.0;
        for (Eigen::Index y = 0; y < P.cols(); ++y) {
          double q = 0.0;
          std::vector<double> next(M);
          for (std::size_t m = 0; m < M; ++m) {
            q += w[m] * P(x[m], y);
            next[m] = lw[m] + std::log(P(x[m], y));
          }
          const double h1 = entropy_of(next);
          eh += q * h1;
          elh += q * std::log(h1);
        }
        for (double g : gc) worst_v = std::min(worst_v, eh - h0 + c + g * (pn - f.p));
        for (double g : gd) worst_w = std::min(worst_w, elh - std::log(h0) + d + g * (pn - f.p));
        const int y = t.outputs[r * f.code.ell() + i];
        for (std::size_t m = 0; m < M; ++m) lw[m] += std::log(P(x[m], y));
      }
    }
  }
  EXPECT_GE(worst_v, -1e-10);
  EXPECT_GE(worst_w, -1e-10);
}

TEST(Drift, StatisticalCheckPassesOnRealTraces) {
  const auto& f = fx();
  const auto traces = posterior_traces(f.code, f.dmc, f.sim.transcripts);
  const SubmartingaleReport rep = check_submartingales(traces, f.caps, &f.divs, f.p, 200);
  EXPECT_TRUE(rep.v.ok()) << rep.v.details;
  EXPECT_TRUE(rep.w.ok()) << rep.w.details;
  EXPECT_TRUE(rep.telescoping.ok()) << rep.telescoping.details;
  EXPECT_FALSE(rep.v_bins.empty());
  const SubmartingaleReport no_div = check_submartingales(traces, f.caps, nullptr, f.p, 200);
  EXPECT_EQ(no_div.w.status, CheckStatus::kVacuous);
}

EntropyTrace synthetic(double drop_per_step, std::size_t steps) {
  EntropyTrace tr;
  tr.messages = 100;
  tr.tau = steps;
  double h = std::log(100.0);
  for (std::size_t n = 0; n <= steps; ++n) {
    tr.h.push_back(h);
    tr.s.push_back(0.0);
    tr.es.push_back(0.0);
    h *= std::exp(-drop_per_step);
  }
  return tr;
}

TEST(Drift, FastEntropyCollapseFails) {
  const auto& f = fx();
  // zero power, so the capacity term vanishes and any decrease is a violation
  const std::vector<EntropyTrace> traces(50, synthetic(0.5, 20));
  const SubmartingaleReport rep = check_submartingales(traces, f.caps, &f.divs, 0.0, 10);
  EXPECT_EQ(rep.v.status, CheckStatus::kFail);
  EXPECT_EQ(rep.w.status, CheckStatus::kPass);  // log drop 0.5 < D(0)
}

TEST(EntropyDrop, BoundAndViolations) {
  const auto& f = fx();
  const auto traces = posterior_traces(f.code, f.dmc, f.sim.transcripts);
  const CheckResult ok = check_entropy_drop(traces, worst_llr_bound(f.dmc));
  EXPECT_EQ(ok.status, CheckStatus::kPass) << ok.details;
  EXPECT_GT(ok.margin, 0.0);
  const CheckResult bad = check_entropy_drop({synthetic(3.0, 5)}, 2.0);
  EXPECT_EQ(bad.status, CheckStatus::kFail);
  EXPECT_NEAR(bad.margin, -1.0, 1e-12);
}

TEST(PhaseBounds, MeasuredPowersAndStatuses) {
  const auto& f = fx();
  const auto traces = posterior_traces(f.code, f.dmc, f.sim.transcripts);
  const PhaseBounds pb = phase_bounds(traces, f.dmc, f.caps, &f.divs);
  EXPECT_GE(pb.p1, 0.0);
  EXPECT_GE(pb.p2, 0.0);
  EXPECT_LE(pb.p1, f.dmc.max_cost());
  EXPECT_LE(pb.p2, f.dmc.max_cost());
  EXPECT_TRUE(pb.first.ok()) << pb.first.details;
  EXPECT_TRUE(pb.second.ok()) << pb.second.details;
  EXPECT_EQ(phase_bounds(traces, f.dmc, f.caps, nullptr).second.status, CheckStatus::kVacuous);
}

}  // namespace
}  // namespace feedrel
