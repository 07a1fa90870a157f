#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hmcst/nfa.hpp"

namespace hmcst {

// One per CLI invocation. Printed last, as key=value lines.
struct RunManifest {
  std::string command;
  std::string digest = "-";
  std::string version = HMCST_VERSION;
  std::string result;
  std::optional<std::uint64_t> elapsed_ms;  // left out under --no-timing

  std::string text() const;
};

enum class CheckStatus : std::uint8_t { Pass, Fail, NotApplicable };
const char* to_string(CheckStatus s);

struct CheckLine {
  std::string property;
  CheckStatus status = CheckStatus::Pass;
  std::string detail;
  std::vector<std::string> witness;
};

// Every structural check applicable to the automaton. Checks that need owner
// states are N/A on automata without them.
std::vector<CheckLine> run_nfa_checks(const Nfa& nfa);
bool all_passed(const std::vector<CheckLine>& lines);
std::string render_nfa_checks(const Nfa& nfa, const std::vector<CheckLine>& lines);

}  // namespace hmcst
