#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hmcst/nfa.hpp"
#include "hmcst/protocol.hpp"

namespace hmcst {

// One possible NFA position plus the edges taken to reach it that are not yet
// confirmed. Several candidates coexist while a label sequence is ambiguous
// (R1->W1 vs R1->W2 is only settled by the later tail swap).
struct Candidate {
  std::uint8_t state = 0;
  std::vector<std::uint16_t> pending;
  friend bool operator==(const Candidate&, const Candidate&) = default;
  friend auto operator<=>(const Candidate&, const Candidate&) = default;
};

struct Cursor {
  std::vector<Candidate> candidates;
  void encode(std::string& out) const;
  friend bool operator==(const Cursor&, const Cursor&) = default;
};

enum class ViolationKind : std::uint8_t { NoSuchEdge, WrongActor, WrongKind };
const char* to_string(ViolationKind k);

struct Violation {
  ViolationKind kind = ViolationKind::NoSuchEdge;
  ActionLabel label;
  std::string detail;
};

class Monitor {
 public:
  explicit Monitor(Nfa nfa);

  const Nfa& nfa() const { return nfa_; }
  Cursor start() const;

  // Advances the cursor over every edge consistent with the label. Edges are
  // counted once every surviving candidate agrees on them.
  std::optional<Violation> observe(Cursor& cursor, const ActionLabel& label);

  // True when every candidate sits in an accept state.
  bool at_accept(const Cursor& cursor) const;
  std::vector<std::string> state_names(const Cursor& cursor) const;

  const std::vector<std::uint64_t>& hits() const { return hits_; }
  std::vector<std::pair<std::string, std::uint64_t>> coverage() const;
  std::size_t covered() const;
  std::size_t total() const { return hits_.size(); }
  // Same counts restricted to edges of the published diagram.
  std::size_t published_covered() const;
  std::size_t published_total() const;
  std::vector<std::string> uncovered() const;
  void merge(const Monitor& other);

 private:
  Nfa nfa_;
  std::vector<std::uint64_t> hits_;
};

// Role of a thread relative to a node: self exactly when the node is on the
// thread's path.
class ActorResolution {
 public:
  explicit ActorResolution(const Topology& topo) : topo_(&topo) {}
  bool is_self(ThreadId t, NodeId n) const { return topo_->owns(t, n); }
  Actor resolve(ThreadId t, NodeId n, Actor context) const { return is_self(t, n) ? Actor::Self : context; }
  bool consistent(const ActionLabel& l) const { return (l.actor == Actor::Self) == is_self(l.thread, l.node); }

 private:
  const Topology* topo_;
};

// The three monitors and one status cursor plus one next cursor per node.
class Conformance {
 public:
  explicit Conformance(const Topology& topo);

  // Cursor layout: [status of node 0..n-1, next of node 0..n-1].
  std::vector<Cursor> initial_cursors() const;
  std::optional<Violation> observe(std::vector<Cursor>& cursors, const ActionLabel& label);
  bool quiescent(const std::vector<Cursor>& cursors, std::string* why = nullptr) const;

  Monitor& root_status() { return root_; }
  Monitor& nonroot_status() { return nonroot_; }
  Monitor& next() { return next_; }
  const Monitor& root_status() const { return root_; }
  const Monitor& nonroot_status() const { return nonroot_; }
  const Monitor& next() const { return next_; }
  // Monitors bound to at least one node of this topology.
  std::vector<const Monitor*> active() const;

  void merge(const Conformance& other);
  // Deterministic text table followed by key=value lines.
  std::string coverage_report() const;

 private:
  const Topology* topo_;
  ActorResolution actors_;
  Monitor root_;
  Monitor nonroot_;
  Monitor next_;
  Monitor& status_monitor(NodeId n);
  const Monitor& status_monitor(NodeId n) const;
};

}  // namespace hmcst
