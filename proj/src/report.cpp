#include "hmcst/report.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <string_view>
#include <utility>

namespace hmcst {

std::string RunManifest::text() const {
  std::string out;
  out += "manifest.command=" + command + "\n";
  out += "manifest.digest=" + digest + "\n";
  out += "manifest.version=" + version + "\n";
  out += "manifest.result=" + result + "\n";
  if (elapsed_ms) out += "manifest.elapsed_ms=" + std::to_string(*elapsed_ms) + "\n";
  return out;
}

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "PASS";
    case CheckStatus::Fail: return "FAIL";
    case CheckStatus::NotApplicable: return "N/A";
  }
  return "?";
}

std::vector<CheckLine> run_nfa_checks(const Nfa& nfa) {
  const std::vector<std::pair<const char*, std::function<Verdict(const Nfa&)>>> checks = {
      {"livelock-freedom", check_livelock_freedom},
      {"starvation-freedom", check_starvation_freedom},
      {"bounded-release", check_bounded_release},
      {"bounded-timeout", check_bounded_timeout},
      {"deadlock-freedom", check_deadlock_freedom},
      {"three-participants", check_three_participants},
      {"round-bound", [](const Nfa& n) { return check_round_bound(n); }},
  };
  std::vector<CheckLine> out;
  for (const auto& [name, fn] : checks) {
    CheckLine line;
    line.property = name;
    try {
      const auto v = fn(nfa);
      line.status = v.pass ? CheckStatus::Pass : CheckStatus::Fail;
      line.detail = v.detail;
      line.witness = v.witness;
    } catch (const NoOwnerStates&) {
      // Bounded release quantifies over owner states, so it holds vacuously.
      // Starvation freedom is about ownership and does not apply.
      if (std::string_view(name) == "bounded-release") {
        line.status = CheckStatus::Pass;
        line.detail = "vacuous: no owner states";
      } else {
        line.status = CheckStatus::NotApplicable;
        line.detail = "no owner states";
      }
    }
    out.push_back(std::move(line));
  }
  return out;
}

bool all_passed(const std::vector<CheckLine>& lines) {
  return std::none_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.status == CheckStatus::Fail; });
}

std::string render_nfa_checks(const Nfa& nfa, const std::vector<CheckLine>& lines) {
  std::ostringstream out;
  out << "nfa " << nfa.name() << ": " << nfa.states().size() << " states, " << nfa.edges().size() << " edges\n";
  for (const auto& l : lines) {
    out << "  " << l.property;
    for (std::size_t pad = l.property.size(); pad < 20; ++pad) out << ' ';
    out << to_string(l.status);
    if (!l.detail.empty()) out << "  (" << l.detail << ")";
    out << '\n';
    if (l.status == CheckStatus::Fail && !l.witness.empty()) {
      out << "    witness:";
      for (const auto& w : l.witness) out << ' ' << w;
      out << '\n';
    }
  }
  std::size_t pass = 0;
  std::size_t fail = 0;
  for (const auto& l : lines) {
    if (l.status == CheckStatus::Pass) ++pass;
    if (l.status == CheckStatus::Fail) ++fail;
  }
  out << "check." << nfa.name() << ".pass=" << pass << '\n';
  out << "check." << nfa.name() << ".fail=" << fail << '\n';
  return out.str();
}

}  // namespace hmcst
