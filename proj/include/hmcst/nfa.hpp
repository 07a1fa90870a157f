#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hmcst/values.hpp"

namespace hmcst {

class MalformedNfa : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoOwnerStates : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Which concrete cell values an NFA state stands for. Several states share a
// class; the subscripted state names tell the contexts apart.
enum class ValueClass : std::uint8_t {
  Recycled,
  Wait,
  Abandoned,
  Unlocked,
  CohortStart,   // Cohort(1)
  PassAll,       // Cohort(k >= 2)
  PassOrParent,  // Cohort(k >= 2) or ParentPrefix
  Parent,
  Null,
  Successor,
  PredecessorMark,
  Impatience,
};

bool matches(ValueClass cls, Field field, std::uint16_t raw);
const char* to_string(ValueClass cls);

enum class NfaField : std::uint8_t { StatusRoot, StatusNonRoot, Next };

const char* to_string(NfaField f);

struct NfaState {
  std::string name;
  ValueClass value;
  bool is_start = false;
  bool is_owner = false;
  bool is_accept = false;
};

struct NfaEdge {
  std::size_t from;
  std::size_t to;
  Actor actor;
  EdgeKind kind;
  // Not in the published diagram; needed by the model in some configurations.
  bool extension = false;
};

class Nfa {
 public:
  Nfa(std::string name, NfaField field) : name_(std::move(name)), field_(field) {}

  std::size_t add_state(NfaState s);
  // Endpoints by name; throws MalformedNfa for unknown names.
  std::size_t add_edge(std::string_view from, std::string_view to, Actor actor, EdgeKind kind,
                       bool extension = false);
  // Removes every edge from -> to. Returns the number removed.
  std::size_t remove_edges(std::string_view from, std::string_view to);

  const std::string& name() const { return name_; }
  NfaField field() const { return field_; }
  Field cell() const { return field_ == NfaField::Next ? Field::Next : Field::Status; }
  const std::vector<NfaState>& states() const { return states_; }
  const std::vector<NfaEdge>& edges() const { return edges_; }

  std::size_t state_index(std::string_view name) const;  // throws MalformedNfa
  bool has_state(std::string_view name) const;
  std::size_t start() const;                             // throws MalformedNfa
  std::vector<std::size_t> owner_states() const;
  bool has_edge(std::string_view from, std::string_view to, Actor actor, EdgeKind kind) const;
  std::string edge_name(std::size_t edge) const;

  // Endpoints valid, exactly one start state, every state reachable from it.
  void validate() const;

 private:
  std::string name_;
  NfaField field_;
  std::vector<NfaState> states_;
  std::vector<NfaEdge> edges_;
};

Nfa build_root_status_nfa();
Nfa build_nonroot_status_nfa();
Nfa build_next_nfa();

struct Verdict {
  bool pass = true;
  std::vector<std::string> witness;  // cycle or offending states
  std::string detail;
};

Verdict check_livelock_freedom(const Nfa& nfa);
Verdict check_starvation_freedom(const Nfa& nfa);  // throws NoOwnerStates
Verdict check_bounded_release(const Nfa& nfa);     // throws NoOwnerStates
Verdict check_bounded_timeout(const Nfa& nfa);
Verdict check_deadlock_freedom(const Nfa& nfa);

// No edge needs a role outside {self, predecessor, successor}, and every edge
// is reachable from the start with at most `rounds` begin-acquisition edges.
Verdict check_three_participants(const Nfa& nfa);
Verdict check_round_bound(const Nfa& nfa, unsigned rounds = 2);

// Deterministic graph text (DOT), first line "// hmcst-nfa-v1".
std::string export_graph(const Nfa& nfa);

}  // namespace hmcst
