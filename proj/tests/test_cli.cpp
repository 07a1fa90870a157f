#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "hmcst/explorer.hpp"

using namespace hmcst;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

bool has(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = text.find(needle); at != std::string::npos; at = text.find(needle, at + 1)) ++n;
  return n;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hmcst-cli-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, CheckNfaAll) {
  const auto r = run({"check-nfa", "all", "--no-timing"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(count(r.out, " PASS"), 20u);
  EXPECT_EQ(count(r.out, " N/A"), 1u);
  EXPECT_TRUE(has(r.out, "manifest.command=check-nfa all\n"));
  EXPECT_TRUE(has(r.out, "manifest.result=PASS\n"));
  EXPECT_FALSE(has(r.out, "elapsed"));
}

TEST(Cli, CheckNfaNext) {
  const auto r = run({"check-nfa", "next"});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(has(r.out, "nfa next: 5 states"));
  EXPECT_TRUE(has(r.out, "manifest.elapsed_ms="));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"check-nfa", "bogus"}).code, 2);
  EXPECT_EQ(run({"explore", "elsewhere"}).code, 2);
  EXPECT_EQ(run({"explore", "root", "--mutation", "nope"}).code, 2);
  EXPECT_EQ(run({"replay", "/nonexistent/trace"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ExportSingle) {
  const auto next = run({"export", "next", "--no-timing"});
  EXPECT_EQ(next.code, 0);
  EXPECT_EQ(next.out.rfind("// hmcst-nfa-v1\n", 0), 0u);
  EXPECT_EQ(count(next.out, "shape="), 5u);
  const auto root = run({"export", "root-status", "--no-timing"});
  EXPECT_EQ(count(root.out, "shape="), 10u);
  EXPECT_EQ(root.out, run({"export", "root-status", "--no-timing"}).out);
}

TEST(Cli, ExportAllToDirectory) {
  const auto dir = scratch("export");
  const auto r = run({"export", "all", "--out", dir.string(), "--no-timing"});
  EXPECT_EQ(r.code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    ++files;
    EXPECT_EQ(slurp(e.path()).rfind("// hmcst-nfa-v1", 0), 0u);
  }
  EXPECT_EQ(files, 3u);
}

TEST(Cli, ExploreRootPasses) {
  const auto r = run({"explore", "root", "--no-timing"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(has(r.out, "coverage.root-status.covered=23\n"));
  EXPECT_TRUE(has(r.out, "coverage.next.covered=13\n"));
  EXPECT_TRUE(has(r.out, "explore.violations=0\n"));
  EXPECT_TRUE(has(r.out, "manifest.digest=" + digest_hex(root_config().digest()) + "\n"));
  EXPECT_EQ(r.out, run({"explore", "root", "--no-timing"}).out);
}

TEST(Cli, ExploreUnderpoweredWarnsButPasses) {
  const auto r = run({"explore", "root", "--rounds", "1", "--no-timing"});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(has(r.out, "warning: coverage of root-status below 100%"));
}

TEST(Cli, ExploreStateCap) {
  const auto r = run({"explore", "root", "--state-cap", "50", "--no-timing"});
  EXPECT_EQ(r.code, 3);
  EXPECT_TRUE(has(r.out, "manifest.result=STATE-CAP"));
}

TEST(Cli, ViolationTraceReplays) {
  const auto dir = scratch("violation");
  const auto r = run({"explore", "root", "--mutation", "no-timeout-no-pass", "--out", dir.string(), "--no-timing"});
  EXPECT_EQ(r.code, 1);
  const auto trace_path = dir / "root-violation-0.trace";
  ASSERT_TRUE(fs::exists(trace_path)) << r.out;
  EXPECT_TRUE(has(r.out, trace_path.string()));
  const auto trace = parse_trace(slurp(trace_path));

  const auto rep = run({"replay", trace_path.string(), "--no-timing"});
  EXPECT_EQ(rep.code, 1);
  EXPECT_TRUE(has(rep.out, "violation at step " + std::to_string(trace.steps.size() - 1) + ": deadlock"));
  EXPECT_EQ(rep.out, run({"replay", trace_path.string(), "--no-timing"}).out);
}

TEST(Cli, ReplayPassingPrefix) {
  const auto dir = scratch("prefix");
  Model m(root_config());
  auto s = m.initial();
  std::vector<TraceStep> steps;
  for (int i = 0; i < 6; ++i) {
    const auto step = m.enabled(s).front();
    ASSERT_FALSE(m.advance(s, step));
    steps.push_back(step);
  }
  const auto path = dir / "prefix.trace";
  std::ofstream(path) << write_trace(make_trace(root_config(), steps));
  const auto r = run({"replay", path.string(), "--no-timing"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_TRUE(has(r.out, "replay.steps=6\n"));
  EXPECT_TRUE(has(r.out, "step 0 (0,proceed)\n    t0 node0.status R->W [self,begin]\n"));
}

TEST(Cli, ReplayEditedDigest) {
  const auto dir = scratch("digest");
  auto t = make_trace(root_config(), {{0, Choice::Proceed}});
  t.digest ^= 0xff;
  const auto path = dir / "edited.trace";
  std::ofstream(path) << write_trace(t);
  const auto r = run({"replay", path.string(), "--no-timing"});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(has(r.out, "manifest.result=DIGEST-MISMATCH"));
}
