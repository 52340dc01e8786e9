#include <gtest/gtest.h>

#include <json.hpp>
#include <sstream>

#include "feedrel/cli.hpp"
#include "feedrel/io.hpp"

namespace feedrel {
namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "feedrel");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

TEST(Builtins, ParseAndValidate) {
  EXPECT_TRUE(builtin_channel("bsc(0.2)").has_value());
  EXPECT_EQ(builtin_channel("example1")->transition()(1, 0), 0.1);
  EXPECT_EQ(builtin_channel("example2")->inputs(), 7);
  EXPECT_EQ(builtin_channel("zchannel(0.3)")->transition()(0, 1), 0.0);
  EXPECT_FALSE(builtin_channel("nosuch.json").has_value());
  EXPECT_THROW(builtin_channel("bsc(0.7)"), Error);
  EXPECT_THROW(builtin_channel("zchannel(1.5)"), Error);
}

TEST(ChannelJson, ParsesAndRejects) {
  const Dmc d = parse_channel_json(R"({"transition": [[0.9, 0.1], [0.2, 0.8]], "costs": [0, 1]})");
  EXPECT_EQ(d.inputs(), 2);
  EXPECT_EQ(d.cost(1), 1.0);
  EXPECT_THROW(parse_channel_json("{"), InputError);
  EXPECT_THROW(parse_channel_json(R"({"transition": [[0.9, 0.1]]})"), InputError);
  EXPECT_THROW(parse_channel_json(R"({"transition": [[0.9, 0.1], [0.5]], "costs": [0, 1]})"),
               Error);
  EXPECT_THROW(parse_channel_json(R"({"transition": [[0.9, 0.2], [0.2, 0.8]], "costs": [0, 1]})"),
               Error);
  EXPECT_NE(channel_hash(d), channel_hash(bsc_channel(0.1)));
  EXPECT_EQ(channel_hash(bsc_channel(0.1)), channel_hash(*builtin_channel("bsc(0.1)")));
}

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(kInf), "inf");
  EXPECT_EQ(format_double(-kInf), "-inf");
  EXPECT_EQ(std::stod(format_double(1.0 / 3)), 1.0 / 3);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"capacity"}).code, kExitUsage);
  EXPECT_EQ(run({"capacity", "--channel", "/nonexistent/file.json"}).code, kExitUsage);
  EXPECT_EQ(run({"capacity", "--channel", "bsc(0.1)"}).code, kExitOk);
  EXPECT_EQ(run({"reliability", "--channel", "example1", "--power", "0.5", "--rate-grid",
                 "0.1:0.2:0"})
                .code,
            kExitUsage);
  EXPECT_EQ(run({"simulate", "--channel", "example1", "--power", "0.5", "--rate", "0.15",
                 "--ell", "200"})
                .code,
            kExitUsage);
}

TEST(Cli, RateAboveCapacityNamesTheCapacity) {
  const CliRun r = run({"reliability", "--channel", "example1", "--power", "0.5", "--rate", "0.3"});
  EXPECT_EQ(r.code, kExitUsage);
  const std::string c = format_double(build_capacity_curve(free_symbol_bsc_channel(0.1)).value(0.5));
  EXPECT_NE(r.err.find("C(p)"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find(c), std::string::npos) << r.err;
}

TEST(Cli, CsvHeadersAndMetadata) {
  const CliRun cap = run({"capacity", "--channel", "example1"});
  ASSERT_EQ(cap.code, kExitOk) << cap.err;
  EXPECT_NE(cap.out.find("# channel_hash: "), std::string::npos);
  EXPECT_NE(cap.out.find("\np,c,gamma,phi0"), std::string::npos);
  const CliRun div = run({"divergence", "--channel", "example2"});
  ASSERT_EQ(div.code, kExitOk) << div.err;
  EXPECT_NE(div.out.find("\np,d,gamma"), std::string::npos);
  const CliRun rel = run({"reliability", "--channel", "example1", "--power", "0.5", "--rate-grid",
                       "0.02:0.15:5", "--with-limit"});
  ASSERT_EQ(rel.code, kExitOk) << rel.err;
  EXPECT_NE(rel.out.find("\nr,exponent,eta_opt,p1,p2"), std::string::npos);
}

TEST(Cli, SimulateJsonAndDeterminism) {
  const std::vector<std::string> args{"simulate", "--channel", "example1", "--power", "0.5",
                                      "--rate", "0.092", "--ell", "16", "--trials", "3000",
                                      "--seed", "5", "--verify", "--traces", "500"};
  const CliRun a = run(args), b = run(args);
  ASSERT_EQ(a.code, kExitOk) << a.err << a.out;
  EXPECT_EQ(a.out, b.out);
  const auto j = nlohmann::json::parse(a.out);
  EXPECT_EQ(j["trials"], 3000);
  EXPECT_EQ(j["seed"], 5);
  EXPECT_TRUE(j.contains("checks"));
  for (const auto& c : j["checks"]) EXPECT_NE(c["status"], "fail") << c.dump();
}

TEST(Cli, VerifyExamplesPasses) {
  const CliRun r = run({"verify-examples"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

}  // namespace
}  // namespace feedrel
