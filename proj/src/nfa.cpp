#include "hmcst/nfa.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <sstream>

namespace hmcst {

bool matches(ValueClass cls, Field field, std::uint16_t raw) {
  if (field == Field::Status) {
    const auto v = StatusValue::decode(raw);
    switch (cls) {
      case ValueClass::Recycled: return v.is(StatusKind::Recycled);
      case ValueClass::Wait: return v.is(StatusKind::Wait);
      case ValueClass::Abandoned: return v.is(StatusKind::Abandoned);
      case ValueClass::Unlocked: return v.is(StatusKind::UnlockedRoot);
      case ValueClass::CohortStart: return v.is_cohort_start();
      case ValueClass::PassAll: return v.is_pass_all();
      case ValueClass::PassOrParent: return v.is_pass_all() || v.is(StatusKind::ParentPrefix);
      case ValueClass::Parent: return v.is(StatusKind::ParentPrefix);
      default: return false;
    }
  }
  const auto v = NextValue::decode(raw);
  switch (cls) {
    case ValueClass::Null: return v.is(NextKind::Null);
    case ValueClass::Successor: return v.is(NextKind::Successor);
    case ValueClass::PredecessorMark: return v.is(NextKind::PredecessorMark);
    case ValueClass::Impatience: return v.is(NextKind::ImpatienceMark);
    default: return false;
  }
}

const char* to_string(ValueClass cls) {
  switch (cls) {
    case ValueClass::Recycled: return "R";
    case ValueClass::Wait: return "W";
    case ValueClass::Abandoned: return "A";
    case ValueClass::Unlocked: return "U";
    case ValueClass::CohortStart: return "C";
    case ValueClass::PassAll: return "V";
    case ValueClass::PassOrParent: return "V/P";
    case ValueClass::Parent: return "P";
    case ValueClass::Null: return "0";
    case ValueClass::Successor: return "S";
    case ValueClass::PredecessorMark: return "P";
    case ValueClass::Impatience: return "M";
  }
  return "?";
}

const char* to_string(NfaField f) {
  switch (f) {
    case NfaField::StatusRoot: return "root-status";
    case NfaField::StatusNonRoot: return "nonroot-status";
    case NfaField::Next: return "next";
  }
  return "?";
}

std::size_t Nfa::add_state(NfaState s) {
  if (has_state(s.name)) throw MalformedNfa("duplicate state " + s.name);
  states_.push_back(std::move(s));
  return states_.size() - 1;
}

std::size_t Nfa::add_edge(std::string_view from, std::string_view to, Actor actor, EdgeKind kind, bool extension) {
  edges_.push_back({state_index(from), state_index(to), actor, kind, extension});
  return edges_.size() - 1;
}

std::size_t Nfa::remove_edges(std::string_view from, std::string_view to) {
  const auto f = state_index(from);
  const auto t = state_index(to);
  const auto before = edges_.size();
  std::erase_if(edges_, [&](const NfaEdge& e) { return e.from == f && e.to == t; });
  return before - edges_.size();
}

std::size_t Nfa::state_index(std::string_view name) const {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (states_[i].name == name) return i;
  }
  throw MalformedNfa(name_ + ": unknown state " + std::string(name));
}

bool Nfa::has_state(std::string_view name) const {
  return std::any_of(states_.begin(), states_.end(), [&](const NfaState& s) { return s.name == name; });
}

std::size_t Nfa::start() const {
  std::size_t found = states_.size();
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (!states_[i].is_start) continue;
    if (found != states_.size()) throw MalformedNfa(name_ + ": more than one start state");
    found = i;
  }
  if (found == states_.size()) throw MalformedNfa(name_ + ": no start state");
  return found;
}

std::vector<std::size_t> Nfa::owner_states() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (states_[i].is_owner) out.push_back(i);
  }
  return out;
}

bool Nfa::has_edge(std::string_view from, std::string_view to, Actor actor, EdgeKind kind) const {
  if (!has_state(from) || !has_state(to)) return false;
  const auto f = state_index(from);
  const auto t = state_index(to);
  return std::any_of(edges_.begin(), edges_.end(), [&](const NfaEdge& e) {
    return e.from == f && e.to == t && e.actor == actor && e.kind == kind;
  });
}

std::string Nfa::edge_name(std::size_t edge) const {
  const auto& e = edges_.at(edge);
  return states_[e.from].name + "->" + states_[e.to].name + " [" + to_string(e.actor) + "," + to_string(e.kind) + "]";
}

void Nfa::validate() const {
  for (const auto& e : edges_) {
    if (e.from >= states_.size() || e.to >= states_.size()) throw MalformedNfa(name_ + ": dangling edge");
  }
  if (states_.empty()) return;
  const auto s = start();
  std::vector<bool> seen(states_.size(), false);
  std::deque<std::size_t> work{s};
  seen[s] = true;
  while (!work.empty()) {
    const auto u = work.front();
    work.pop_front();
    for (const auto& e : edges_) {
      if (e.from == u && !seen[e.to]) {
        seen[e.to] = true;
        work.push_back(e.to);
      }
    }
  }
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (!seen[i]) throw MalformedNfa(name_ + ": state " + states_[i].name + " unreachable from start");
  }
}

namespace {

constexpr auto kSelf = Actor::Self;
constexpr auto kPred = Actor::Predecessor;
constexpr auto kSucc = Actor::Successor;
constexpr auto kBegin = EdgeKind::BeginAcquisition;
constexpr auto kNormal = EdgeKind::Normal;
constexpr auto kTimeout = EdgeKind::Timeout;
constexpr bool kExtension = true;

NfaState st(std::string name, ValueClass v, bool start = false, bool owner = false) {
  return NfaState{std::move(name), v, start, owner, start};
}

}  // namespace

Nfa build_root_status_nfa() {
  Nfa n("root-status", NfaField::StatusRoot);
  n.add_state(st("R1", ValueClass::Recycled, true));
  n.add_state(st("W1", ValueClass::Wait));
  n.add_state(st("W2", ValueClass::Wait));
  n.add_state(st("W3", ValueClass::Wait));
  n.add_state(st("W4", ValueClass::Wait));
  n.add_state(st("A1", ValueClass::Abandoned));
  n.add_state(st("U1", ValueClass::Unlocked, false, true));
  n.add_state(st("U2", ValueClass::Unlocked));
  n.add_state(st("U3", ValueClass::Unlocked));
  n.add_state(st("R2", ValueClass::Recycled));

  // Fresh acquisition: the status swap, with or without a predecessor behind the tail.
  n.add_edge("R1", "W1", kSelf, kBegin);
  n.add_edge("R1", "W2", kSelf, kBegin);
  // No predecessor: take the lock.
  n.add_edge("W2", "U1", kSelf, kNormal);
  // Release with the successor linked or no successor at all.
  n.add_edge("U1", "R1", kSelf, kNormal);
  // Release gives up waiting for a tardy successor to link.
  n.add_edge("U1", "U3", kSelf, kTimeout);
  // The tardy successor links, finds the impatience mark and recycles.
  n.add_edge("U3", "R1", kSucc, kNormal);
  // Re-acquire before recycling; wait for it, give up, or see it recycled.
  n.add_edge("U3", "W4", kSelf, kBegin);
  n.add_edge("W4", "U3", kSelf, kTimeout);
  n.add_edge("W4", "R2", kSucc, kNormal);
  // Predecessor hands over the lock.
  n.add_edge("W1", "U1", kPred, kNormal);
  // Waiting times out.
  n.add_edge("W1", "A1", kSelf, kTimeout);
  // Predecessor hands the lock to the abandoned node and walks past it.
  n.add_edge("A1", "U2", kPred, kNormal);
  // Re-acquire after abandoning: resume waiting in place.
  n.add_edge("A1", "W1", kSelf, kBegin);
  // Walking predecessor finishes and recycles the abandoned node.
  n.add_edge("U2", "R1", kPred, kNormal);
  // Walking predecessor runs out of patience on the abandoned node's next.
  n.add_edge("U2", "U3", kPred, kTimeout);
  // Re-acquire while the walker still owns the node.
  n.add_edge("U2", "W3", kSelf, kBegin);
  n.add_edge("W3", "U2", kSelf, kTimeout);
  // Recycled by the walker, or by the successor after walker impatience.
  n.add_edge("W3", "R2", kPred, kNormal);
  n.add_edge("W3", "R2", kSucc, kNormal);
  // Walker was impatient while the owner re-waited, the owner then gave up:
  // the late successor recycles from U2.
  n.add_edge("U2", "R1", kSucc, kNormal, kExtension);
  // Re-enqueued with status left recycled: own the lock or time out.
  n.add_edge("R2", "U1", kSelf, kNormal);
  n.add_edge("R2", "U1", kPred, kNormal);
  n.add_edge("R2", "A1", kSelf, kTimeout);
  return n;
}

Nfa build_nonroot_status_nfa() {
  Nfa n("nonroot-status", NfaField::StatusNonRoot);
  n.add_state(st("R1", ValueClass::Recycled, true));
  n.add_state(st("W1", ValueClass::Wait));
  n.add_state(st("W2", ValueClass::Wait));
  n.add_state(st("W3", ValueClass::Wait));
  n.add_state(st("W4", ValueClass::Wait));
  n.add_state(st("W5", ValueClass::Wait));
  n.add_state(st("A1", ValueClass::Abandoned));
  n.add_state(st("C1", ValueClass::CohortStart, false, true));
  n.add_state(st("P1", ValueClass::Parent));
  n.add_state(st("P2", ValueClass::Parent));
  n.add_state(st("P3", ValueClass::Parent));
  n.add_state(st("V1", ValueClass::PassAll, false, true));
  n.add_state(st("V/P1", ValueClass::PassOrParent));
  n.add_state(st("R2", ValueClass::Recycled));
  n.add_state(st("R3", ValueClass::Recycled));

  n.add_edge("R1", "W1", kSelf, kBegin);
  n.add_edge("R1", "W2", kSelf, kBegin);
  // No predecessor: start a cohort.
  n.add_edge("W2", "C1", kSelf, kNormal);
  n.add_edge("C1", "R1", kSelf, kNormal);
  // Release gives up on a tardy successor and marks the node parent-only.
  n.add_edge("C1", "P2", kSelf, kTimeout);
  n.add_edge("P2", "R1", kSucc, kNormal);
  n.add_edge("P2", "W5", kSelf, kBegin);
  n.add_edge("W5", "P2", kSelf, kTimeout);
  // Late successor recycles; the later tail swap decides R3 (alone) or R2.
  n.add_edge("W5", "R3", kSucc, kNormal);
  n.add_edge("W5", "R2", kSucc, kNormal);
  // Reached through W3->P2 with the walker still active: the walker recycles.
  // Only seen with no predecessor at the re-enqueue.
  n.add_edge("W5", "R3", kPred, kNormal, kExtension);
  n.add_edge("R3", "C1", kSelf, kNormal);
  // A peer that inherited the lower levels re-enters and finds the cohort value.
  n.add_edge("C1", "W4", kSelf, kBegin);
  n.add_edge("W4", "C1", kSelf, kNormal);
  n.add_edge("W1", "A1", kSelf, kTimeout);
  // Walking predecessor hands a pass-all or parent-only value to the abandoned node.
  n.add_edge("A1", "V/P1", kPred, kNormal);
  n.add_edge("A1", "W1", kSelf, kBegin);
  n.add_edge("V/P1", "R1", kPred, kNormal);
  n.add_edge("V/P1", "P2", kPred, kTimeout);
  // Walker impatient on a node already holding P: no status write, the late
  // successor recycles it directly.
  n.add_edge("V/P1", "R1", kSucc, kNormal, kExtension);
  // Pass of every lock up to the root.
  n.add_edge("W1", "V1", kPred, kNormal);
  n.add_edge("V1", "R1", kSelf, kNormal);
  n.add_edge("V1", "P2", kSelf, kTimeout);
  // Pass of the local lock only.
  n.add_edge("W1", "P1", kPred, kNormal);
  n.add_edge("P1", "C1", kSelf, kNormal);
  // Re-acquire while the walker still owns the node.
  n.add_edge("V/P1", "W3", kSelf, kBegin);
  n.add_edge("W3", "P2", kSelf, kTimeout);
  // Gave up while the walker still held the node: the walker recycles it.
  n.add_edge("P2", "R1", kPred, kNormal, kExtension);
  n.add_edge("W3", "P3", kPred, kTimeout);
  n.add_edge("P3", "P2", kSelf, kTimeout);
  n.add_edge("P3", "R3", kSucc, kNormal);
  n.add_edge("P3", "R2", kSucc, kNormal);
  n.add_edge("W3", "R3", kPred, kNormal);
  n.add_edge("W3", "R2", kPred, kNormal);
  // Walker impatient on a P node while the owner re-waits; the successor
  // recycles straight from W3.
  n.add_edge("W3", "R3", kSucc, kNormal, kExtension);
  n.add_edge("W3", "R2", kSucc, kNormal, kExtension);
  n.add_edge("R2", "V1", kPred, kNormal);
  n.add_edge("R2", "P1", kPred, kNormal);
  n.add_edge("R2", "A1", kSelf, kTimeout);
  return n;
}

Nfa build_next_nfa() {
  Nfa n("next", NfaField::Next);
  n.add_state(st("0_1", ValueClass::Null, true));
  n.add_state(st("0_2", ValueClass::Null));
  n.add_state(st("S1", ValueClass::Successor));
  n.add_state(st("P1", ValueClass::PredecessorMark));
  n.add_state(st("M1", ValueClass::Impatience));

  // Start of an acquisition; the null is rewritten in place.
  n.add_edge("0_1", "0_2", kSelf, kBegin);
  // Relinquished with no successor, by the owner or by a walker on its behalf.
  n.add_edge("0_2", "0_1", kSelf, kNormal);
  n.add_edge("0_2", "0_1", kPred, kNormal);
  n.add_edge("0_2", "S1", kSucc, kNormal);
  // Reset before the next enqueue.
  n.add_edge("S1", "0_2", kSelf, kBegin);
  // Walker remembers its predecessor on the abandoned node.
  n.add_edge("S1", "P1", kPred, kNormal);
  // Re-acquire attempts that wait for recycling.
  n.add_edge("S1", "S1", kSelf, kBegin);
  n.add_edge("P1", "0_2", kSelf, kBegin);
  n.add_edge("P1", "P1", kSelf, kBegin);
  // Impatience mark, by the releasing owner or by a walker.
  n.add_edge("0_2", "M1", kSelf, kTimeout);
  n.add_edge("0_2", "M1", kPred, kTimeout);
  n.add_edge("M1", "M1", kSelf, kBegin);
  n.add_edge("M1", "S1", kSucc, kNormal);
  return n;
}

namespace {

bool is_begin_source(const Nfa& nfa, std::size_t s) {
  return std::any_of(nfa.edges().begin(), nfa.edges().end(),
                     [&](const NfaEdge& e) { return e.from == s && e.kind == EdgeKind::BeginAcquisition; });
}

bool is_timeout_source(const Nfa& nfa, std::size_t s) {
  return std::any_of(nfa.edges().begin(), nfa.edges().end(),
                     [&](const NfaEdge& e) { return e.from == s && e.kind == EdgeKind::Timeout; });
}

// States reachable from `from` (inclusive) over edges accepted by `keep`.
std::vector<bool> reach(const Nfa& nfa, std::size_t from, const std::function<bool(const NfaEdge&)>& keep) {
  std::vector<bool> seen(nfa.states().size(), false);
  std::deque<std::size_t> work{from};
  seen[from] = true;
  while (!work.empty()) {
    const auto u = work.front();
    work.pop_front();
    for (const auto& e : nfa.edges()) {
      if (e.from == u && keep(e) && !seen[e.to]) {
        seen[e.to] = true;
        work.push_back(e.to);
      }
    }
  }
  return seen;
}

bool self_only(const NfaEdge& e) { return e.actor == Actor::Self; }

// Every state must reach some target over self-actor edges (empty path allowed).
Verdict all_reach_by_self(const Nfa& nfa, const std::vector<std::size_t>& sources,
                          const std::function<bool(std::size_t)>& target, const std::string& what) {
  Verdict v;
  for (auto s : sources) {
    const auto seen = reach(nfa, s, self_only);
    bool ok = false;
    for (std::size_t i = 0; i < seen.size() && !ok; ++i) ok = seen[i] && target(i);
    if (!ok) {
      v.pass = false;
      v.witness.push_back(nfa.states()[s].name);
    }
  }
  if (!v.pass) v.detail = "no self-actor path to " + what;
  return v;
}

void require_owners(const Nfa& nfa) {
  if (nfa.owner_states().empty()) throw NoOwnerStates(nfa.name() + " has no lock-owner states");
}

}  // namespace

Verdict check_livelock_freedom(const Nfa& nfa) {
  nfa.validate();
  const auto n = nfa.states().size();
  // Colour-marking DFS over the graph without begin-acquisition edges.
  std::vector<int> colour(n, 0);
  std::vector<std::size_t> stack;
  Verdict v;
  std::function<bool(std::size_t)> dfs = [&](std::size_t u) {
    colour[u] = 1;
    stack.push_back(u);
    for (const auto& e : nfa.edges()) {
      if (e.from != u || e.kind == EdgeKind::BeginAcquisition) continue;
      if (colour[e.to] == 1) {
        auto it = std::find(stack.begin(), stack.end(), e.to);
        for (; it != stack.end(); ++it) v.witness.push_back(nfa.states()[*it].name);
        v.witness.push_back(nfa.states()[e.to].name);
        return true;
      }
      if (colour[e.to] == 0 && dfs(e.to)) return true;
    }
    stack.pop_back();
    colour[u] = 2;
    return false;
  };
  for (std::size_t s = 0; s < n; ++s) {
    if (colour[s] == 0 && dfs(s)) {
      v.pass = false;
      v.detail = "cycle without a begin-acquisition edge";
      return v;
    }
  }
  return v;
}

Verdict check_starvation_freedom(const Nfa& nfa) {
  nfa.validate();
  require_owners(nfa);
  std::set<std::size_t> sinks;
  for (const auto& e : nfa.edges()) {
    if (e.kind == EdgeKind::BeginAcquisition) sinks.insert(e.to);
  }
  Verdict v;
  for (auto s : sinks) {
    const auto seen = reach(nfa, s, [](const NfaEdge& e) { return e.kind != EdgeKind::Timeout; });
    bool ok = false;
    for (std::size_t i = 0; i < seen.size() && !ok; ++i) ok = seen[i] && nfa.states()[i].is_owner;
    if (!ok) {
      v.pass = false;
      v.witness.push_back(nfa.states()[s].name);
    }
  }
  if (!v.pass) v.detail = "wait state cannot reach an owner state without timing out";
  return v;
}

Verdict check_bounded_release(const Nfa& nfa) {
  nfa.validate();
  require_owners(nfa);
  return all_reach_by_self(nfa, nfa.owner_states(), [&](std::size_t s) { return is_begin_source(nfa, s); },
                           "a begin-acquisition source");
}

Verdict check_bounded_timeout(const Nfa& nfa) {
  nfa.validate();
  std::vector<std::size_t> sources;
  for (std::size_t s = 0; s < nfa.states().size(); ++s) {
    if (!is_begin_source(nfa, s)) sources.push_back(s);
  }
  return all_reach_by_self(nfa, sources, [&](std::size_t s) { return is_timeout_source(nfa, s); },
                           "a timeout source");
}

Verdict check_deadlock_freedom(const Nfa& nfa) {
  nfa.validate();
  std::vector<std::size_t> all(nfa.states().size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all_reach_by_self(nfa, all, [&](std::size_t s) { return is_begin_source(nfa, s); },
                           "a begin-acquisition source");
}

Verdict check_three_participants(const Nfa& nfa) {
  nfa.validate();
  std::set<Actor> roles;
  for (const auto& e : nfa.edges()) roles.insert(e.actor);
  Verdict v;
  for (auto r : roles) {
    if (r != Actor::Self && r != Actor::Predecessor && r != Actor::Successor) {
      v.pass = false;
      v.witness.push_back(to_string(r));
    }
  }
  v.detail = std::to_string(roles.size()) + " roles";
  return v;
}

Verdict check_round_bound(const Nfa& nfa, unsigned rounds) {
  nfa.validate();
  Verdict v;
  if (nfa.states().empty()) return v;
  // 0-1 BFS: cost of an edge is 1 for begin-acquisition, 0 otherwise.
  constexpr auto kInf = std::numeric_limits<unsigned>::max();
  std::vector<unsigned> dist(nfa.states().size(), kInf);
  std::deque<std::size_t> work;
  dist[nfa.start()] = 0;
  work.push_back(nfa.start());
  while (!work.empty()) {
    const auto u = work.front();
    work.pop_front();
    for (const auto& e : nfa.edges()) {
      if (e.from != u) continue;
      const unsigned w = e.kind == EdgeKind::BeginAcquisition ? 1 : 0;
      if (dist[u] + w < dist[e.to]) {
        dist[e.to] = dist[u] + w;
        if (w == 0) work.push_front(e.to); else work.push_back(e.to);
      }
    }
  }
  for (std::size_t i = 0; i < nfa.edges().size(); ++i) {
    const auto& e = nfa.edges()[i];
    const unsigned need = dist[e.from] + (e.kind == EdgeKind::BeginAcquisition ? 1 : 0);
    if (dist[e.from] == kInf || need > rounds) {
      v.pass = false;
      v.witness.push_back(nfa.edge_name(i));
    }
  }
  if (!v.pass) v.detail = "edges need more than " + std::to_string(rounds) + " acquisitions";
  return v;
}

std::string export_graph(const Nfa& nfa) {
  std::ostringstream out;
  out << "// hmcst-nfa-v1\n";
  out << "digraph \"" << nfa.name() << "\" {\n";
  for (const auto& s : nfa.states()) {
    out << "  \"" << s.name << "\" [value=\"" << to_string(s.value) << "\"";
    if (s.is_start) out << ", start=true";
    if (s.is_owner) out << ", style=filled, fillcolor=green";
    out << ", shape=" << (s.is_accept ? "doublecircle" : "circle") << "];\n";
  }
  for (const auto& e : nfa.edges()) {
    const char* colour = e.actor == Actor::Self ? "black" : e.actor == Actor::Predecessor ? "blue" : "red";
    const char* style = e.kind == EdgeKind::BeginAcquisition ? "bold"
                        : e.actor == Actor::Self             ? "solid"
                                                             : "dotted";
    if (e.extension) style = "dashed";
    out << "  \"" << nfa.states()[e.from].name << "\" -> \"" << nfa.states()[e.to].name << "\" [actor="
        << to_string(e.actor) << ", kind=" << to_string(e.kind) << ", color=" << colour << ", style=" << style
        << (e.extension ? ", extension=true" : "") << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace hmcst
