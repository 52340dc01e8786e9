#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "feedrel/capacity.hpp"
#include "feedrel/converse.hpp"
#include "feedrel/divergence.hpp"
#include "feedrel/reliability.hpp"
#include "feedrel/simulator.hpp"

namespace feedrel {

/// Malformed input file or argument.
class InputError : public Error {
 public:
  using Error::Error;
};

const char* version();

/// bsc(a), example1(a), example1, example2, zchannel(a). Returns nothing
/// when `spec` does not name a builtin.
std::optional<Dmc> builtin_channel(const std::string& spec);

Dmc bsc_channel(double a);
Dmc free_symbol_bsc_channel(double a);
Dmc mixed_channel();
Dmc z_channel(double a);

/// Parses {"transition": [[...], ...], "costs": [...]}.
Dmc parse_channel_json(const std::string& text);

/// Builtin name or path to a channel file.
Dmc load_channel(const std::string& spec);

/// FNV-1a over the dimensions, transition entries and costs.
std::uint64_t channel_hash(const Dmc& dmc);
std::string hex64(std::uint64_t v);

/// Embedded in every output: provenance of the run.
struct RunMetadata {
  std::string command;
  std::string channel;
  std::uint64_t channel_hash = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
};

/// Shortest decimal that round-trips.
std::string format_double(double v);

void write_capacity_csv(std::ostream& os, const CapacityCurve& curve, const RunMetadata& meta);
void write_divergence_csv(std::ostream& os, const DivergenceCurve& curve,
                          const RunMetadata& meta);
/// Columns r, exponent, eta_opt, p1, p2. A limit row, when present, has
/// empty phase columns.
void write_reliability_csv(std::ostream& os, const std::vector<ReliabilityPoint>& points,
                           std::optional<std::pair<double, double>> limit,
                           const RunMetadata& meta);

std::string capacity_json(const CapacityCurve& curve, const RunMetadata& meta);
std::string divergence_json(const DivergenceCurve& curve, const RunMetadata& meta);
std::string reliability_json(const std::vector<ReliabilityPoint>& points,
                             std::optional<std::pair<double, double>> limit,
                             const RunMetadata& meta);

/// SimResult plus optional converse checks, as one JSON document.
std::string simulation_json(const SimResult& result, const TwoPhaseCode& code,
                            const std::vector<CheckResult>& checks, const RunMetadata& meta);

}  // namespace feedrel
