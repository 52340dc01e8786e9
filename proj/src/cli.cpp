#include "feedrel/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "feedrel/capacity.hpp"
#include "feedrel/converse.hpp"
#include "feedrel/divergence.hpp"
#include "feedrel/io.hpp"
#include "feedrel/reliability.hpp"
#include "feedrel/simulator.hpp"

namespace feedrel {

namespace {

struct Config {
  std::string channel;
  double power = 0.0;
  std::optional<double> rate;
  std::string rate_grid;
  int ell = 64;
  std::optional<double> eta;
  std::uint64_t trials = 10000;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "csv";
  bool verify = false;
  double kappa = 0.1;
  double m_cap = 4096;
  double alpha = 0.1;
  bool with_limit = false;
  int points = 128;
  double gap_tol = 1e-9;
  std::size_t traces = 20000;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3) throw UsageError("--rate-grid expects lo:hi:n");
  double lo = 0.0, hi = 0.0;
  long n = 0;
  try {
    std::size_t used = 0;
    lo = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("lo");
    hi = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("hi");
    n = std::stol(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("n");
  } catch (const std::exception&) {
    throw UsageError("--rate-grid expects lo:hi:n with numeric fields");
  }
  if (n <= 0) throw UsageError("empty rate grid");
  if (!(lo > 0.0) || hi < lo) throw UsageError("rate grid needs 0 < lo <= hi");
  std::vector<double> grid(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    grid[static_cast<std::size_t>(i)] =
        n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return grid;
}

RunMetadata metadata(const std::string& command, const Config& cfg, const Dmc& dmc,
                     std::vector<std::pair<std::string, std::string>> extra) {
  RunMetadata meta;
  meta.command = command;
  meta.channel = cfg.channel;
  meta.channel_hash = channel_hash(dmc);
  meta.seed = cfg.seed;
  meta.config = std::move(extra);
  return meta;
}

void emit(const Config& cfg, std::ostream& out, const std::string& doc) {
  if (cfg.out.empty()) {
    out << doc;
    return;
  }
  std::ofstream f(cfg.out, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write '" + cfg.out + "'");
  f << doc;
  if (!f) throw InputError("failed writing '" + cfg.out + "'");
}

void require_format(const Config& cfg) {
  if (cfg.format != "csv" && cfg.format != "json") {
    throw UsageError("--format must be csv or json");
  }
}

CapacityCurve curve_for(const Dmc& dmc, const Config& cfg) {
  CurveGrid grid;
  grid.points = cfg.points;
  CapacityOptions opts;
  opts.gap_tol = cfg.gap_tol;
  return build_capacity_curve(dmc, grid, opts);
}

int cmd_capacity(const Config& cfg, std::ostream& out) {
  require_format(cfg);
  const Dmc dmc = load_channel(cfg.channel);
  const CapacityCurve caps = curve_for(dmc, cfg);
  const RunMetadata meta =
      metadata("capacity", cfg, dmc,
               {{"points", std::to_string(cfg.points)}, {"gap_tol", format_double(cfg.gap_tol)},
                {"format", cfg.format}});
  std::ostringstream doc;
  if (cfg.format == "csv") {
    write_capacity_csv(doc, caps, meta);
  } else {
    doc << capacity_json(caps, meta);
  }
  emit(cfg, out, doc.str());
  if (!cfg.out.empty()) {
    out << "C(0) = " << format_double(caps.c0()) << '\n'
        << "C* = " << format_double(caps.c_star()) << '\n'
        << "P* = " << format_double(caps.p_star()) << '\n'
        << "beta = " << format_double(caps.beta()) << '\n';
  }
  return kExitOk;
}

int cmd_divergence(const Config& cfg, std::ostream& out) {
  require_format(cfg);
  const Dmc dmc = load_channel(cfg.channel);
  const DivergenceCurve divs = build_divergence_curve(dmc);
  const RunMetadata meta = metadata("divergence", cfg, dmc, {{"format", cfg.format}});
  std::ostringstream doc;
  if (cfg.format == "csv") {
    write_divergence_csv(doc, divs, meta);
  } else {
    doc << divergence_json(divs, meta);
  }
  emit(cfg, out, doc.str());
  return kExitOk;
}

int cmd_reliability(const Config& cfg, std::ostream& out) {
  require_format(cfg);
  if (cfg.rate.has_value() == !cfg.rate_grid.empty()) {
    throw UsageError("give exactly one of --rate and --rate-grid");
  }
  if (cfg.power < 0.0) throw UsageError("--power must be non-negative");
  const std::vector<double> grid = cfg.rate ? std::vector<double>{*cfg.rate}
                                            : parse_grid(cfg.rate_grid);
  const Dmc dmc = load_channel(cfg.channel);
  if (is_zero_error_capable(dmc)) {
    throw UsageError("channel has a zero transition probability; the exponent is infinite "
                     "below capacity (use simulate)");
  }
  const CapacityCurve caps = curve_for(dmc, cfg);
  const DivergenceCurve divs = build_divergence_curve(dmc);
  const double c = caps.value(cfg.power);
  for (double r : grid) {
    if (!(r > 0.0) || !(r < c)) {
      std::ostringstream os;
      os << "rate " << format_double(r) << " is outside (0, C(p)); C(" << format_double(cfg.power)
         << ") = " << format_double(c);
      throw UsageError(os.str());
    }
  }
  std::vector<ReliabilityPoint> points;
  if (cfg.eta) {
    for (double r : grid) {
      ReliabilityPoint pt;
      pt.r = r;
      pt.p = cfg.power;
      const auto iv = feasible_interval(caps, r, cfg.power);
      pt.interval_lo = iv.first;
      pt.interval_hi = iv.second;
      pt.eta_star = iv.first;
      pt.eta_opt = *cfg.eta;
      pt.exponent = exponent_at(caps, divs, r, cfg.power, *cfg.eta);
      pt.p1 = capacity_inverse(caps, std::min(r / *cfg.eta, caps.c_star()));
      pt.p2 = *cfg.eta < 1.0 ? std::max(0.0, (cfg.power - *cfg.eta * pt.p1) / (1.0 - *cfg.eta))
                             : 0.0;
      points.push_back(pt);
    }
  } else {
    points = reliability_curve(caps, divs, cfg.power, grid);
  }
  std::optional<std::pair<double, double>> limit;
  if (cfg.with_limit) limit = std::make_pair(c, reliability_at_capacity(caps, divs, cfg.power));

  std::vector<std::pair<std::string, std::string>> extra{{"power", format_double(cfg.power)}};
  if (cfg.rate) extra.emplace_back("rate", format_double(*cfg.rate));
  if (!cfg.rate_grid.empty()) extra.emplace_back("rate_grid", cfg.rate_grid);
  if (cfg.eta) extra.emplace_back("eta", format_double(*cfg.eta));
  extra.emplace_back("with_limit", cfg.with_limit ? "true" : "false");
  extra.emplace_back("points", std::to_string(cfg.points));
  extra.emplace_back("format", cfg.format);
  const RunMetadata meta = metadata("reliability", cfg, dmc, std::move(extra));
  std::ostringstream doc;
  if (cfg.format == "csv") {
    write_reliability_csv(doc, points, limit, meta);
  } else {
    doc << reliability_json(points, limit, meta);
  }
  emit(cfg, out, doc.str());
  return kExitOk;
}

std::vector<CheckResult> converse_checks(const SimResult& res, const TwoPhaseCode& code,
                                         const Dmc& dmc, const CapacityCurve& caps,
                                         const DivergenceCurve* divs) {
  std::vector<CheckResult> checks;
  const double m = static_cast<double>(code.messages);
  const double p_e = res.posterior_error.mean();
  checks.push_back(fano_check(res.final_entropy, p_e, m));
  checks.push_back(duration_check(caps, res.tau_bar, m, res.energy_rate, p_e));

  const auto traces = posterior_traces(code, dmc, res.transcripts);
  PhaseBounds pb = phase_bounds(traces, dmc, caps, divs);
  checks.push_back(pb.first);
  checks.push_back(pb.second);
  const double f = worst_llr_bound(dmc);
  if (std::isfinite(f)) {
    checks.push_back(check_entropy_drop(traces, f));
  } else {
    CheckResult c;
    c.name = "entropy-drop";
    c.status = CheckStatus::kVacuous;
    c.details = "no finite per-step bound on a channel with zero transitions";
    checks.push_back(c);
  }
  SubmartingaleReport sub = check_submartingales(traces, caps, divs, code.power);
  checks.push_back(sub.v);
  checks.push_back(sub.w);
  checks.push_back(sub.telescoping);
  return checks;
}

int cmd_simulate(const Config& cfg, std::ostream& out) {
  if (cfg.format != "json") throw UsageError("simulate writes json only");
  if (!cfg.rate) throw UsageError("--rate is required");
  if (cfg.ell < 2) throw UsageError("--ell must be at least 2");
  if (cfg.trials < 1) throw UsageError("--trials must be positive");
  const Dmc dmc = load_channel(cfg.channel);
  const CapacityCurve caps = curve_for(dmc, cfg);
  CodeOptions copts;
  copts.kappa = cfg.kappa;
  copts.message_cap = cfg.m_cap;
  SimOptions sopts;
  if (cfg.verify) {
    sopts.record = static_cast<std::size_t>(std::min<std::uint64_t>(cfg.trials, cfg.traces));
    sopts.track_posterior = true;
  }

  std::optional<DivergenceCurve> divs;
  TwoPhaseCode code;
  SimResult res;
  if (is_zero_error_capable(dmc)) {
    code = build_zero_error_code(dmc, caps, *cfg.rate, cfg.power, cfg.ell, cfg.seed, copts);
    res = simulate_zero_error(dmc, caps, *cfg.rate, cfg.power, cfg.ell, cfg.trials, cfg.seed,
                              sopts, copts);
  } else {
    divs = build_divergence_curve(dmc);
    code = build_code(dmc, caps, *divs, *cfg.rate, cfg.power, cfg.eta, cfg.ell, cfg.seed, copts);
    res = simulate_trials(code, dmc, cfg.trials, cfg.seed, sopts);
  }

  std::vector<CheckResult> checks;
  if (cfg.verify) checks = converse_checks(res, code, dmc, caps, divs ? &*divs : nullptr);

  std::vector<std::pair<std::string, std::string>> extra{
      {"power", format_double(cfg.power)}, {"rate", format_double(*cfg.rate)},
      {"ell", std::to_string(cfg.ell)},    {"trials", std::to_string(cfg.trials)},
      {"kappa", format_double(cfg.kappa)}, {"m_cap", format_double(cfg.m_cap)},
      {"verify", cfg.verify ? "true" : "false"}};
  if (cfg.eta) extra.emplace_back("eta", format_double(*cfg.eta));
  if (cfg.verify) extra.emplace_back("traces", std::to_string(sopts.record));
  const RunMetadata meta = metadata("simulate", cfg, dmc, std::move(extra));
  emit(cfg, out, simulation_json(res, code, checks, meta));
  for (const auto& c : checks) {
    if (!c.ok()) return kExitCheckFailed;
  }
  return kExitOk;
}

struct Row {
  std::string name;
  double value;
  double expected;
  double tol;
  bool pass() const { return std::abs(value - expected) <= tol; }
};

int cmd_verify_examples(const Config& cfg, std::ostream& out) {
  const double a = cfg.alpha;
  if (!(a > 0.0 && a < 0.5)) throw UsageError("--alpha must lie in (0, 1/2)");
  std::vector<Row> rows;
  std::vector<std::pair<std::string, bool>> flags;

  const Dmc ex1 = free_symbol_bsc_channel(a);
  const CapacityCurve c1 = build_capacity_curve(ex1);
  const DivergenceCurve d1 = build_divergence_curve(ex1);
  const double cb = std::log(2.0) + a * std::log(a) + (1 - a) * std::log(1 - a);
  const double dz = 0.5 * std::log(1.0 / (4.0 * a * (1.0 - a)));
  const double dt = (1.0 - 2.0 * a) * std::log((1.0 - a) / a);
  for (int i = 1; i <= 9; ++i) {
    const double p = 0.1 * i;
    std::ostringstream n;
    n << "example1 C(" << p << ")";
    rows.push_back({n.str(), capacity_at(ex1, p).c, p * cb, 1e-5});
  }
  rows.push_back({"example1 beta", c1.beta(), 1.0, 1e-4});
  for (double p : {0.2, 0.5, 0.8, 1.0}) {
    for (double f : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double r = f * p * cb;
      const double eta = r / cb;
      std::ostringstream n;
      n << "example1 E(" << f << " C(p), " << p << ")";
      rows.push_back({n.str(), reliability(c1, d1, r, p).exponent,
                      (1 - eta) * dz + (p - eta) * (dt - dz), 1e-5});
    }
  }
  rows.push_back({"example1 E at capacity, p = 0.5", reliability_at_capacity(c1, d1, 0.5),
                  0.25 * std::log(1.0 / (4.0 * a * (1.0 - a))), 1e-4});

  const Dmc ex2 = mixed_channel();
  const CapacityCurve c2 = build_capacity_curve(ex2);
  const DivergenceCurve d2 = build_divergence_curve(ex2);
  const double tol = 1e-5;
  for (double p : {0.5, 2.5}) {
    for (int i = 1; i <= 15; ++i) {
      const double r = c2.value(p) * i / 16.0;
      const ReliabilityPoint pt = reliability(c2, d2, r, p);
      const bool low = std::abs(pt.p1 - 1.0) <= tol && pt.p2 < 1.0 - tol && pt.p2 > -tol;
      const bool mid = pt.p1 > 1.0 + tol && pt.p1 < 4.0 - tol && std::abs(pt.p2 - 1.0) <= tol;
      const bool high = std::abs(pt.p1 - 4.0) <= tol && pt.p2 > 1.0 + tol;
      std::ostringstream n;
      n << "example2 regime p=" << p << " r=" << i << "/16 C(p) (p1=" << std::setprecision(6)
        << pt.p1 << ", p2=" << pt.p2 << ")";
      flags.emplace_back(n.str(), int(low) + int(mid) + int(high) == 1);
    }
  }

  bool all = true;
  out << std::left;
  for (const auto& r : rows) {
    all = all && r.pass();
    out << std::setw(40) << r.name << ' ' << std::setw(22) << format_double(r.value) << ' '
        << std::setw(22) << format_double(r.expected) << ' ' << (r.pass() ? "PASS" : "FAIL")
        << '\n';
  }
  for (const auto& [name, ok] : flags) {
    all = all && ok;
    out << std::setw(86) << name << ' ' << (ok ? "PASS" : "FAIL") << '\n';
  }
  out << (all ? "all checks passed" : "some checks failed") << '\n';
  return all ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reliability of feedback codes on cost-constrained channels", "feedrel"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));
  Config cfg;

  auto add_channel = [&](CLI::App* sub) {
    sub->add_option("--channel", cfg.channel,
                    "channel file or builtin: bsc(a), example1(a), example2, zchannel(a)")
        ->required();
  };
  auto add_output = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "output file (stdout when omitted)");
    sub->add_option("--format", cfg.format, "csv or json")->capture_default_str();
  };
  auto add_curve = [&](CLI::App* sub) {
    sub->add_option("--points", cfg.points, "capacity curve resolution")
        ->check(CLI::Range(2, 100000))
        ->capture_default_str();
    sub->add_option("--gap-tol", cfg.gap_tol, "capacity solver duality gap tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  };

  auto* cap = app.add_subcommand("capacity", "capacity curve C(p) and its landmarks");
  add_channel(cap);
  add_output(cap);
  add_curve(cap);

  auto* div = app.add_subcommand("divergence", "divergence curve D(p) at its breakpoints");
  add_channel(div);
  add_output(div);

  auto* rel = app.add_subcommand("reliability", "reliability function over a rate grid");
  add_channel(rel);
  add_output(rel);
  add_curve(rel);
  rel->add_option("--power", cfg.power, "power constraint")->required();
  rel->add_option("--rate", cfg.rate, "single rate (nats per symbol)");
  rel->add_option("--rate-grid", cfg.rate_grid, "lo:hi:n evenly spaced rates");
  rel->add_option("--eta", cfg.eta, "fixed phase split instead of the optimum");
  rel->add_flag("--with-limit", cfg.with_limit, "append the limit at r = C(p)");

  auto* sim = app.add_subcommand("simulate", "simulate the two-phase scheme");
  add_channel(sim);
  add_curve(sim);
  sim->add_option("--out", cfg.out, "output file (stdout when omitted)");
  sim->add_option("--format", cfg.format, "json");
  sim->add_option("--power", cfg.power, "power constraint")->required();
  sim->add_option("--rate", cfg.rate, "rate (nats per symbol)")->required();
  sim->add_option("--ell", cfg.ell, "block length per round")->capture_default_str();
  sim->add_option("--eta", cfg.eta, "phase split (optimal when omitted)");
  sim->add_option("--trials", cfg.trials, "number of messages")->capture_default_str();
  sim->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  sim->add_flag("--verify", cfg.verify, "attach converse checks");
  sim->add_option("--traces", cfg.traces, "transcripts replayed by --verify")
      ->capture_default_str();
  sim->add_option("--kappa", cfg.kappa, "phase-2 threshold backoff")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sim->add_option("--m-cap", cfg.m_cap, "largest message set allowed")->capture_default_str();

  auto* ver = app.add_subcommand("verify-examples", "recompute the reference example numbers");
  ver->add_option("--alpha", cfg.alpha, "crossover of the binary letters")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (sim->parsed() && sim->count("--format") == 0) cfg.format = "json";

  try {
    if (cap->parsed()) return cmd_capacity(cfg, out);
    if (div->parsed()) return cmd_divergence(cfg, out);
    if (rel->parsed()) return cmd_reliability(cfg, out);
    if (sim->parsed()) return cmd_simulate(cfg, out);
    if (ver->parsed()) return cmd_verify_examples(cfg, out);
  } catch (const CodeSizeError& e) {
    err << "error: " << e.what() << " (lower --ell or --rate, or raise --m-cap)\n";
    return kExitUsage;
  } catch (const ZeroErrorRegime& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << " (gap " << e.gap() << ")\n";
    return kExitCheckFailed;
  } catch (const ConsistencyError& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace feedrel
