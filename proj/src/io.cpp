#include "feedrel/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "feedrel/rng.hpp"

#ifndef FEEDREL_VERSION
#define FEEDREL_VERSION "dev"
#endif

namespace feedrel {

using ojson = nlohmann::ordered_json;

const char* version() { return FEEDREL_VERSION; }

Dmc bsc_channel(double a) {
  Eigen::MatrixXd t(2, 2);
  t << 1.0 - a, a, a, 1.0 - a;
  return Dmc(t, Eigen::VectorXd::Zero(2));
}

Dmc free_symbol_bsc_channel(double a) {
  Eigen::MatrixXd t(3, 2);
  t << 0.5, 0.5, a, 1.0 - a, 1.0 - a, a;
  Eigen::VectorXd c(3);
  c << 0.0, 1.0, 1.0;
  return Dmc(t, c);
}

Dmc mixed_channel() {
  const double e = 1.0 / 75.0;
  const double d = 1.0 / 100.0;
  Eigen::MatrixXd t(7, 4);
  t << 0.25, 0.25, 0.25, 0.25,
       d, d, 0.5 - d, 0.5 - d,
       0.5 - d, 0.5 - d, d, d,
       1 - 3 * e, e, e, e,
       e, 1 - 3 * e, e, e,
       e, e, 1 - 3 * e, e,
       e, e, e, 1 - 3 * e;
  Eigen::VectorXd c(7);
  c << 0, 1, 1, 4, 4, 4, 4;
  return Dmc(t, c);
}

Dmc z_channel(double a) {
  Eigen::MatrixXd t(2, 2);
  t << 1.0, 0.0, a, 1.0 - a;
  Eigen::VectorXd c(2);
  c << 0.0, 1.0;
  return Dmc(t, c);
}

namespace {

double parse_param(const std::string& s, const std::string& spec) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InputError("bad channel parameter in '" + spec + "'");
  }
  return v;
}

void require_crossover(double a, const std::string& spec) {
  if (!(a > 0.0 && a < 0.5)) {
    throw InputError("parameter of '" + spec + "' must lie in (0, 1/2)");
  }
}

}  // namespace

std::optional<Dmc> builtin_channel(const std::string& spec) {
  static const std::regex re(R"(^\s*([a-z0-9]+)\s*(?:\(\s*([^)\s]*)\s*\))?\s*$)");
  std::smatch m;
  if (!std::regex_match(spec, m, re)) return std::nullopt;
  const std::string name = m[1];
  const bool has_arg = m[2].matched && m[2].length() > 0;
  const double a = has_arg ? parse_param(m[2], spec) : 0.1;
  if (name == "bsc") {
    require_crossover(a, spec);
    return bsc_channel(a);
  }
  if (name == "example1") {
    require_crossover(a, spec);
    return free_symbol_bsc_channel(a);
  }
  if (name == "example2") {
    if (m[2].matched) throw InputError("example2 takes no parameter");
    return mixed_channel();
  }
  if (name == "zchannel") {
    if (!(a > 0.0 && a < 1.0)) throw InputError("zchannel parameter must lie in (0, 1)");
    return z_channel(a);
  }
  return std::nullopt;
}

Dmc parse_channel_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed channel JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("transition") || !j.contains("costs")) {
    throw InputError("channel JSON needs \"transition\" and \"costs\"");
  }
  const auto& t = j["transition"];
  const auto& c = j["costs"];
  if (!t.is_array() || t.empty() || !t[0].is_array() || !c.is_array()) {
    throw InputError("\"transition\" must be a non-empty array of arrays, \"costs\" an array");
  }
  const auto rows = static_cast<Eigen::Index>(t.size());
  const auto cols = static_cast<Eigen::Index>(t[0].size());
  Eigen::MatrixXd mat(rows, cols);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const auto& row = t[static_cast<std::size_t>(k)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw InputError("row " + std::to_string(k) + " has the wrong length");
    }
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
      const auto& v = row[static_cast<std::size_t>(j2)];
      if (!v.is_number()) throw InputError("non-numeric transition entry");
      mat(k, j2) = v.get<double>();
    }
  }
  if (static_cast<Eigen::Index>(c.size()) != rows) {
    throw InputError("\"costs\" must have one entry per row");
  }
  Eigen::VectorXd costs(rows);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const auto& v = c[static_cast<std::size_t>(k)];
    if (!v.is_number()) throw InputError("non-numeric cost");
    costs(k) = v.get<double>();
  }
  return Dmc(std::move(mat), std::move(costs));
}

Dmc load_channel(const std::string& spec) {
  if (auto b = builtin_channel(spec)) return *b;
  std::ifstream in(spec, std::ios::binary);
  if (!in) throw InputError("cannot open channel file '" + spec + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_channel_json(ss.str());
}

namespace {

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void f64(double v) {
    std::uint64_t u;
    static_assert(sizeof u == sizeof v);
    std::memcpy(&u, &v, sizeof u);
    u64(u);
  }
};

}  // namespace

std::uint64_t channel_hash(const Dmc& dmc) {
  Fnv f;
  f.u64(static_cast<std::uint64_t>(dmc.inputs()));
  f.u64(static_cast<std::uint64_t>(dmc.outputs()));
  for (Eigen::Index k = 0; k < dmc.inputs(); ++k) {
    for (Eigen::Index j = 0; j < dmc.outputs(); ++j) f.f64(dmc.transition()(k, j));
  }
  for (Eigen::Index k = 0; k < dmc.inputs(); ++k) f.f64(dmc.cost(k));
  return f.h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

void write_meta(std::ostream& os, const RunMetadata& meta) {
  os << "# feedrel " << version() << '\n';
  os << "# command: " << meta.command << '\n';
  os << "# channel: " << meta.channel << '\n';
  os << "# channel_hash: " << hex64(meta.channel_hash) << '\n';
  os << "# seed: " << meta.seed << '\n';
  for (const auto& [k, v] : meta.config) os << "# config." << k << ": " << v << '\n';
}

ojson num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

ojson meta_json(const RunMetadata& meta) {
  ojson cfg = ojson::object();
  for (const auto& [k, v] : meta.config) cfg[k] = v;
  return ojson{{"version", version()},
               {"command", meta.command},
               {"channel", meta.channel},
               {"channel_hash", hex64(meta.channel_hash)},
               {"seed", meta.seed},
               {"config", cfg}};
}

ojson landmarks_json(const CapacityLandmarks& l) {
  return ojson{{"c0", num(l.c0)}, {"c_star", num(l.c_star)}, {"p_star", num(l.p_star)},
               {"beta", num(l.beta)}};
}

ojson point_json(const ReliabilityPoint& pt) {
  return ojson{{"r", num(pt.r)},
               {"p", num(pt.p)},
               {"exponent", num(pt.exponent)},
               {"eta_opt", num(pt.eta_opt)},
               {"p1", num(pt.p1)},
               {"p2", num(pt.p2)},
               {"eta_star", num(pt.eta_star)},
               {"interval_lo", num(pt.interval_lo)},
               {"interval_hi", num(pt.interval_hi)},
               {"p1_saturated", pt.p1_saturated},
               {"used_grid_fallback", pt.used_grid_fallback}};
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

}  // namespace

void write_capacity_csv(std::ostream& os, const CapacityCurve& curve, const RunMetadata& meta) {
  write_meta(os, meta);
  const auto& l = curve.landmarks();
  os << "# c0: " << format_double(l.c0) << '\n'
     << "# c_star: " << format_double(l.c_star) << '\n'
     << "# p_star: " << format_double(l.p_star) << '\n'
     << "# beta: " << format_double(l.beta) << '\n';
  const Eigen::Index k = curve.samples().empty() ? 0 : curve.samples().front().phi.size();
  os << "p,c,gamma";
  for (Eigen::Index i = 0; i < k; ++i) os << ",phi" << i;
  os << '\n';
  for (const auto& s : curve.samples()) {
    os << format_double(s.p) << ',' << format_double(s.c) << ',' << format_double(s.gamma);
    for (Eigen::Index i = 0; i < k; ++i) os << ',' << format_double(s.phi[i]);
    os << '\n';
  }
}

void write_divergence_csv(std::ostream& os, const DivergenceCurve& curve,
                          const RunMetadata& meta) {
  write_meta(os, meta);
  os << "p,d,gamma\n";
  for (const auto& seg : curve.segments()) {
    os << format_double(seg.p_lo) << ',' << format_double(seg.d_lo) << ','
       << format_double(seg.slope) << '\n';
  }
  os << format_double(curve.saturation_cost()) << ',' << format_double(curve.max_value())
     << ",0\n";
}

void write_reliability_csv(std::ostream& os, const std::vector<ReliabilityPoint>& points,
                           std::optional<std::pair<double, double>> limit,
                           const RunMetadata& meta) {
  write_meta(os, meta);
  os << "r,exponent,eta_opt,p1,p2\n";
  for (const auto& pt : points) {
    os << format_double(pt.r) << ',' << format_double(pt.exponent) << ','
       << format_double(pt.eta_opt) << ',' << format_double(pt.p1) << ','
       << format_double(pt.p2) << '\n';
  }
  if (limit) os << format_double(limit->first) << ',' << format_double(limit->second) << ",,,\n";
}

std::string capacity_json(const CapacityCurve& curve, const RunMetadata& meta) {
  ojson samples = ojson::array();
  for (const auto& s : curve.samples()) {
    ojson phi = ojson::array();
    for (Eigen::Index i = 0; i < s.phi.size(); ++i) phi.push_back(num(s.phi[i]));
    samples.push_back(ojson{{"p", num(s.p)}, {"c", num(s.c)}, {"gamma", num(s.gamma)},
                            {"phi", phi}});
  }
  return dump(ojson{{"meta", meta_json(meta)},
                    {"landmarks", landmarks_json(curve.landmarks())},
                    {"samples", samples}});
}

std::string divergence_json(const DivergenceCurve& curve, const RunMetadata& meta) {
  ojson segs = ojson::array();
  for (const auto& s : curve.segments()) {
    segs.push_back(ojson{{"p_lo", num(s.p_lo)},
                         {"p_hi", num(s.p_hi)},
                         {"d_lo", num(s.d_lo)},
                         {"d_hi", num(s.d_hi)},
                         {"slope", num(s.slope)},
                         {"letters", {s.letter_lo, s.letter_hi}}});
  }
  return dump(ojson{{"meta", meta_json(meta)},
                    {"saturation_cost", num(curve.saturation_cost())},
                    {"max_value", num(curve.max_value())},
                    {"segments", segs}});
}

std::string reliability_json(const std::vector<ReliabilityPoint>& points,
                             std::optional<std::pair<double, double>> limit,
                             const RunMetadata& meta) {
  ojson pts = ojson::array();
  for (const auto& pt : points) pts.push_back(point_json(pt));
  ojson out{{"meta", meta_json(meta)}, {"points", pts}};
  if (limit) out["limit"] = ojson{{"r", num(limit->first)}, {"exponent", num(limit->second)}};
  return dump(out);
}

std::string simulation_json(const SimResult& res, const TwoPhaseCode& code,
                            const std::vector<CheckResult>& checks, const RunMetadata& meta) {
  ojson hist = ojson::array();
  for (auto h : res.rounds_histogram) hist.push_back(h);
  ojson out{{"meta", meta_json(meta)},
            {"generator", Philox::kName},
            {"seed", res.seed},
            {"trials", res.trials},
            {"errors", res.errors},
            {"p_e_hat", num(res.p_e_hat)},
            {"ci_low", num(res.ci_low)},
            {"ci_high", num(res.ci_high)},
            {"tau_bar", num(res.tau_bar)},
            {"energy_rate", num(res.energy_rate)},
            {"rounds_histogram", hist},
            {"truncated", res.truncated},
            {"p_ra", num(res.p_ra)},
            {"p_ar", num(res.p_ar)},
            {"p_e_rb", num(res.p_e_rb)},
            {"p_e_rb_se", num(res.p_e_rb_se)},
            {"code",
             ojson{{"ell1", code.ell1},
                   {"ell2", code.ell2},
                   {"messages", code.messages},
                   {"rate", num(code.rate)},
                   {"power", num(code.power)},
                   {"eta", num(code.eta)},
                   {"p1", num(code.p1)},
                   {"p2", num(code.p2)},
                   {"threshold", num(code.threshold)},
                   {"rule", code.rule == AcceptRule::kLlrThreshold ? "llr-threshold"
                                                                   : "impossible-under-reject"}}}};
  if (!checks.empty()) {
    ojson arr = ojson::array();
    for (const auto& c : checks) {
      arr.push_back(ojson{{"name", c.name},
                          {"status", to_string(c.status)},
                          {"margin", num(c.margin)},
                          {"details", c.details}});
    }
    out["checks"] = arr;
  }
  return dump(out);
}

}  // namespace feedrel
