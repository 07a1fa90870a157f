#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hmcst/explorer.hpp"

namespace hmcst::oracle {

// Hit counts per edge, read back from the report table.
inline std::vector<std::pair<std::string, std::uint64_t>> edge_hits(const ExplorationReport& r, const std::string& nfa) {
  std::vector<std::pair<std::string, std::uint64_t>> out;
  std::istringstream in(r.coverage_table);
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (line.rfind("coverage ", 0) == 0) {
      inside = line.rfind("coverage " + nfa + ":", 0) == 0;
      continue;
    }
    if (!inside || line.rfind("  ", 0) != 0) continue;
    const auto close = line.find(']');
    out.emplace_back(line.substr(2, close - 1), std::stoull(line.substr(close + 1)));
  }
  return out;
}

}  // namespace hmcst::oracle
