#pragma once

// Breadth-first traversal over the same step function, kept apart from the
// explorer's own search so the two can be compared.

#include <cstdint>
#include <deque>
#include <string>
#include <unordered_set>

#include "hmcst/explorer.hpp"

namespace hmcst::oracle {

struct BfsResult {
  std::uint64_t states = 0;
  std::uint64_t terminal_states = 0;
  std::uint64_t violations = 0;
};

inline BfsResult bfs_explore(const Config& config) {
  Model model(config);
  BfsResult r;
  std::unordered_set<std::string> seen;
  std::deque<SearchState> frontier;
  const auto init = model.initial();
  seen.insert(init.encode());
  if (model.check_state(init)) {
    ++r.violations;
  } else {
    frontier.push_back(init);
  }
  while (!frontier.empty()) {
    const SearchState s = std::move(frontier.front());
    frontier.pop_front();
    for (const auto& step : model.enabled(s)) {
      SearchState child = s;
      if (model.advance(child, step)) {
        ++r.violations;
        continue;
      }
      if (!seen.insert(child.encode()).second) continue;
      if (model.terminal(child)) ++r.terminal_states;
      if (model.check_state(child)) {
        ++r.violations;
        continue;
      }
      frontier.push_back(std::move(child));
    }
  }
  r.states = seen.size();
  return r;
}

}  // namespace hmcst::oracle
