#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "hmcst/explorer.hpp"
#include "hmcst/nfa.hpp"
#include "hmcst/report.hpp"

namespace hmcst::cli {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::vector<Nfa> select_nfas(const std::string& which) {
  if (which == "root-status") return {build_root_status_nfa()};
  if (which == "nonroot-status") return {build_nonroot_status_nfa()};
  if (which == "next") return {build_next_nfa()};
  return {build_root_status_nfa(), build_nonroot_status_nfa(), build_next_nfa()};
}

const std::vector<std::string> kWhich = {"root-status", "nonroot-status", "next", "all"};

struct Common {
  bool no_timing = false;
  Clock::time_point start = Clock::now();

  void finish(RunManifest& m, std::ostream& out) const {
    if (!no_timing) {
      m.elapsed_ms = static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
    }
    out << m.text();
  }
};

int cmd_check_nfa(const std::string& which, const Common& common, std::ostream& out) {
  bool ok = true;
  for (const auto& nfa : select_nfas(which)) {
    const auto lines = run_nfa_checks(nfa);
    ok = ok && all_passed(lines);
    out << render_nfa_checks(nfa, lines);
  }
  RunManifest m;
  m.command = "check-nfa " + which;
  m.result = ok ? "PASS" : "FAIL";
  common.finish(m, out);
  return ok ? kPass : kViolation;
}

int cmd_export(const std::string& which, const std::string& out_path, const Common& common, std::ostream& out,
               std::ostream& err) {
  const auto nfas = select_nfas(which);
  RunManifest m;
  m.command = "export " + which;
  if (out_path.empty()) {
    for (const auto& nfa : nfas) out << export_graph(nfa);
  } else {
    const bool dir = which == "all";
    if (dir) fs::create_directories(out_path);
    for (const auto& nfa : nfas) {
      const fs::path p = dir ? fs::path(out_path) / (nfa.name() + ".dot") : fs::path(out_path);
      std::ofstream f(p);
      if (!f) {
        err << "cannot write " << p.string() << "\n";
        return kUsage;
      }
      f << export_graph(nfa);
      out << "wrote " << p.string() << "\n";
    }
  }
  m.result = "PASS";
  common.finish(m, out);
  return kPass;
}

struct ExploreArgs {
  std::string preset;
  std::uint64_t state_cap = ExploreOptions{}.state_cap;
  std::optional<unsigned> threshold;
  std::optional<unsigned> rounds;
  std::string mutation;
  std::string out_dir;
};

std::vector<std::string> required_coverage(const std::string& preset) {
  if (preset == "root") return {"root-status", "next"};
  return {"nonroot-status"};
}

int cmd_explore(const ExploreArgs& a, const Common& common, std::ostream& out, std::ostream& err) {
  Config config = *hmcst::preset(a.preset);
  bool overridden = false;
  if (a.threshold) {
    config.passing_threshold = *a.threshold;
    overridden = true;
  }
  if (a.rounds) {
    for (auto& t : config.threads) t.rounds = *a.rounds;
    overridden = true;
  }
  if (!a.mutation.empty()) {
    const auto m = mutation_from_string(a.mutation);
    if (!m) {
      err << "unknown mutation '" << a.mutation << "'\n";
      return kUsage;
    }
    config.mutation = *m;
    overridden = overridden || *m != Mutation::None;
  }
  Topology check(config);

  RunManifest manifest;
  manifest.command = "explore " + a.preset;
  manifest.digest = digest_hex(config.digest());

  ExploreOptions opts;
  opts.state_cap = a.state_cap;
  ExplorationReport report;
  try {
    report = explore(config, opts);
  } catch (const ResourceBudgetExceeded& e) {
    out << "error: " << e.what() << "\n";
    manifest.result = "STATE-CAP";
    common.finish(manifest, out);
    return kStateCap;
  }
  out << report.text();
  out << "explore.states=" << report.states << "\n";
  out << "explore.protocol_states=" << report.protocol_states << "\n";
  out << "explore.transitions=" << report.transitions << "\n";
  out << "explore.max_depth=" << report.max_depth << "\n";
  out << "explore.terminal_states=" << report.terminal_states << "\n";
  out << "explore.violations=" << report.violations.size() << "\n";

  int code = kPass;
  if (!report.violations.empty()) {
    code = kViolation;
    const fs::path dir = a.out_dir.empty() ? fs::path(".") : fs::path(a.out_dir);
    fs::create_directories(dir);
    for (std::size_t i = 0; i < report.violations.size(); ++i) {
      const auto& v = report.violations[i];
      const fs::path p = dir / (config.name + "-violation-" + std::to_string(i) + ".trace");
      std::ofstream(p) << write_trace(v.trace);
      out << "violation " << to_string(v.kind) << " trace written to " << p.string() << "\n";
    }
  }
  bool coverage_ok = true;
  for (const auto& nfa : required_coverage(a.preset)) {
    if (!report.full_published_coverage(nfa)) {
      coverage_ok = false;
      out << "warning: coverage of " << nfa << " below 100%\n";
    } else if (!report.full_coverage(nfa)) {
      out << "note: some extension edges of " << nfa << " are not reachable in this configuration\n";
    }
  }
  if (code == kPass && !coverage_ok && !overridden) code = kViolation;
  manifest.result = code == kPass ? (coverage_ok ? "PASS" : "PASS-PARTIAL-COVERAGE") : "FAIL";
  common.finish(manifest, out);
  return code;
}

int cmd_replay(const std::string& path, const Common& common, std::ostream& out, std::ostream& err) {
  std::ifstream f(path);
  if (!f) {
    err << "cannot read " << path << "\n";
    return kUsage;
  }
  std::stringstream buf;
  buf << f.rdbuf();
  RunManifest manifest;
  manifest.command = "replay " + fs::path(path).filename().string();
  ReplayResult r;
  Config config;
  try {
    const auto trace = parse_trace(buf.str());
    manifest.digest = digest_hex(trace.digest);
    config = parse_config(trace.config);
    r = replay(config, trace);
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      const auto& s = trace.steps[i];
      out << "step " << i << " (" << static_cast<unsigned>(s.thread) << "," << to_string(s.choice) << ")\n";
      for (const auto& l : r.labels[i]) out << "    " << l.to_string() << "\n";
    }
  } catch (const DigestMismatch& e) {
    err << "error: " << e.what() << "\n";
    manifest.result = "DIGEST-MISMATCH";
    common.finish(manifest, out);
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    manifest.result = "ERROR";
    common.finish(manifest, out);
    return kUsage;
  }
  Protocol proto(config);
  out << "final state:\n" << proto.describe(r.final_state);
  int code = kPass;
  if (r.violation) {
    code = kViolation;
    out << "violation at step " << r.violation_step << ": " << to_string(r.violation->kind) << ": "
        << r.violation->detail << "\n";
    out << "replay.violation_step=" << r.violation_step << "\n";
  }
  out << "replay.steps=" << r.labels.size() << "\n";
  manifest.result = code == kPass ? "PASS" : "FAIL";
  common.finish(manifest, out);
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exhaustive model of the HMCS-T abortable hierarchical lock", "hmcst"};
  app.require_subcommand(1);
  Common common;

  std::string which = "all";
  auto* check = app.add_subcommand("check-nfa", "Run the structural checks on the per-node automata");
  check->add_option("which", which)->check(CLI::IsMember(kWhich));
  check->add_flag("--no-timing", common.no_timing, "Leave elapsed time out of the manifest");

  ExploreArgs ex;
  auto* explore_cmd = app.add_subcommand("explore", "Explore every interleaving of a preset");
  explore_cmd->add_option("preset", ex.preset)->required()->check(CLI::IsMember({"root", "nonroot"}));
  explore_cmd->add_option("--state-cap", ex.state_cap, "Abort once this many states are stored");
  explore_cmd->add_option("--passing-threshold", ex.threshold, "Cohort passes before a parent release");
  explore_cmd->add_option("--rounds", ex.rounds, "Rounds for every thread");
  explore_cmd->add_option("--mutation", ex.mutation, "Seeded protocol fault");
  explore_cmd->add_option("--out", ex.out_dir, "Directory for violation traces (default: current)");
  explore_cmd->add_flag("--no-timing", common.no_timing, "Leave elapsed time out of the manifest");

  std::string export_which = "all";
  std::string export_out;
  auto* export_cmd = app.add_subcommand("export", "Write the automata as graph text");
  export_cmd->add_option("which", export_which)->check(CLI::IsMember(kWhich));
  export_cmd->add_option("--out", export_out, "File, or directory for 'all'");
  export_cmd->add_flag("--no-timing", common.no_timing, "Leave elapsed time out of the manifest");

  std::string trace_path;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a recorded trace and re-check it");
  replay_cmd->add_option("trace", trace_path)->required();
  replay_cmd->add_flag("--no-timing", common.no_timing, "Leave elapsed time out of the manifest");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (check->parsed()) return cmd_check_nfa(which, common, out);
    if (explore_cmd->parsed()) return cmd_explore(ex, common, out, err);
    if (export_cmd->parsed()) return cmd_export(export_which, export_out, common, out, err);
    if (replay_cmd->parsed()) return cmd_replay(trace_path, common, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace hmcst::cli
