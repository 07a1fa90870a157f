#include <gtest/gtest.h>

#include <random>
#include <set>
#include <string>
#include <vector>

#include "hmcst/nfa.hpp"
#include "hmcst/report.hpp"

using namespace hmcst;

namespace {

constexpr auto kSelf = Actor::Self;
constexpr auto kPred = Actor::Predecessor;
constexpr auto kSucc = Actor::Successor;
constexpr auto kBegin = EdgeKind::BeginAcquisition;
constexpr auto kNormal = EdgeKind::Normal;
constexpr auto kTimeout = EdgeKind::Timeout;

NfaState st(std::string name, ValueClass v, bool start = false, bool owner = false) {
  return NfaState{std::move(name), v, start, owner, start};
}

// Transitive closure by Floyd-Warshall over the edges accepted by keep.
template <class Keep>
std::vector<std::vector<bool>> closure(const Nfa& n, Keep keep) {
  const auto k = n.states().size();
  std::vector<std::vector<bool>> r(k, std::vector<bool>(k, false));
  for (std::size_t i = 0; i < k; ++i) r[i][i] = true;
  for (const auto& e : n.edges()) {
    if (keep(e)) r[e.from][e.to] = true;
  }
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (r[i][m] && r[m][j]) r[i][j] = true;
      }
    }
  }
  return r;
}

// Kahn's algorithm: acyclic iff every state can be peeled off.
bool oracle_livelock_free(const Nfa& n) {
  const auto k = n.states().size();
  std::vector<int> indeg(k, 0);
  for (const auto& e : n.edges()) {
    if (e.kind != kBegin) ++indeg[e.to];
  }
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < k; ++i) {
    if (indeg[i] == 0) ready.push_back(i);
  }
  std::size_t peeled = 0;
  while (!ready.empty()) {
    const auto u = ready.back();
    ready.pop_back();
    ++peeled;
    for (const auto& e : n.edges()) {
      if (e.from == u && e.kind != kBegin && --indeg[e.to] == 0) ready.push_back(e.to);
    }
  }
  return peeled == k;
}

bool begin_source(const Nfa& n, std::size_t s) {
  for (const auto& e : n.edges()) {
    if (e.from == s && e.kind == kBegin) return true;
  }
  return false;
}

bool timeout_source(const Nfa& n, std::size_t s) {
  for (const auto& e : n.edges()) {
    if (e.from == s && e.kind == kTimeout) return true;
  }
  return false;
}

bool oracle_starvation_free(const Nfa& n) {
  const auto r = closure(n, [](const NfaEdge& e) { return e.kind != kTimeout; });
  for (const auto& e : n.edges()) {
    if (e.kind != kBegin) continue;
    bool ok = false;
    for (std::size_t j = 0; j < n.states().size(); ++j) ok = ok || (r[e.to][j] && n.states()[j].is_owner);
    if (!ok) return false;
  }
  return true;
}

template <class From, class To>
bool oracle_self_reach(const Nfa& n, From from, To to) {
  const auto r = closure(n, [](const NfaEdge& e) { return e.actor == kSelf; });
  for (std::size_t i = 0; i < n.states().size(); ++i) {
    if (!from(i)) continue;
    bool ok = false;
    for (std::size_t j = 0; j < n.states().size(); ++j) ok = ok || (r[i][j] && to(j));
    if (!ok) return false;
  }
  return true;
}

bool oracle_deadlock_free(const Nfa& n) {
  return oracle_self_reach(n, [](std::size_t) { return true; }, [&](std::size_t j) { return begin_source(n, j); });
}

bool oracle_bounded_timeout(const Nfa& n) {
  return oracle_self_reach(n, [&](std::size_t i) { return !begin_source(n, i); },
                           [&](std::size_t j) { return timeout_source(n, j); });
}

bool oracle_bounded_release(const Nfa& n) {
  return oracle_self_reach(n, [&](std::size_t i) { return n.states()[i].is_owner; },
                           [&](std::size_t j) { return begin_source(n, j); });
}

// Random NFA whose states are all reachable from state 0.
Nfa random_nfa(std::mt19937& rng) {
  std::uniform_int_distribution<int> size(2, 6);
  const int k = size(rng);
  Nfa n("random", NfaField::StatusRoot);
  std::bernoulli_distribution coin(0.3);
  for (int i = 0; i < k; ++i) n.add_state(st("Q" + std::to_string(i), ValueClass::Wait, i == 0, i > 0 && coin(rng)));
  const Actor actors[] = {kSelf, kPred, kSucc};
  const EdgeKind kinds[] = {kBegin, kNormal, kTimeout};
  std::uniform_int_distribution<int> pick3(0, 2);
  for (int i = 1; i < k; ++i) {
    std::uniform_int_distribution<int> prev(0, i - 1);
    n.add_edge("Q" + std::to_string(prev(rng)), "Q" + std::to_string(i), actors[pick3(rng)], kinds[pick3(rng)]);
  }
  std::uniform_int_distribution<int> extra(0, 2 * k);
  std::uniform_int_distribution<int> any(0, k - 1);
  for (int e = extra(rng); e > 0; --e) {
    n.add_edge("Q" + std::to_string(any(rng)), "Q" + std::to_string(any(rng)), actors[pick3(rng)], kinds[pick3(rng)]);
  }
  return n;
}

std::size_t count_lines_with(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  std::size_t at = 0;
  while ((at = text.find(needle, at)) != std::string::npos) {
    ++count;
    at += needle.size();
  }
  return count;
}

}  // namespace

TEST(NfaBuild, RootShape) {
  const auto n = build_root_status_nfa();
  EXPECT_EQ(n.states().size(), 10u);
  EXPECT_EQ(n.states()[n.start()].name, "R1");
  EXPECT_TRUE(n.has_edge("W1", "U1", kPred, kNormal));
  EXPECT_TRUE(n.has_edge("U1", "U3", kSelf, kTimeout));
  EXPECT_TRUE(n.has_edge("U2", "U3", kPred, kTimeout));
  EXPECT_TRUE(n.has_edge("R2", "A1", kSelf, kTimeout));
  EXPECT_NO_THROW(n.validate());
}

TEST(NfaBuild, NonRootShape) {
  const auto n = build_nonroot_status_nfa();
  EXPECT_EQ(n.states().size(), 15u);
  EXPECT_TRUE(n.has_edge("C1", "W4", kSelf, kBegin));
  EXPECT_TRUE(n.has_edge("W4", "C1", kSelf, kNormal));
  EXPECT_TRUE(n.has_edge("V/P1", "W3", kSelf, kBegin));
  EXPECT_TRUE(n.has_edge("A1", "V/P1", kPred, kNormal));
  EXPECT_NO_THROW(n.validate());
}

TEST(NfaBuild, NextShape) {
  const auto n = build_next_nfa();
  EXPECT_EQ(n.states().size(), 5u);
  EXPECT_EQ(n.states()[n.start()].name, "0_1");
  EXPECT_TRUE(n.has_edge("0_2", "M1", kSelf, kTimeout));
  EXPECT_TRUE(n.has_edge("0_2", "M1", kPred, kTimeout));
  EXPECT_TRUE(n.has_edge("M1", "S1", kSucc, kNormal));
  for (const char* s : {"S1", "P1", "M1"}) EXPECT_TRUE(n.has_edge(s, s, kSelf, kBegin)) << s;
  EXPECT_TRUE(n.owner_states().empty());
}

TEST(NfaBuild, MalformedInputsRejected) {
  Nfa n("bad", NfaField::StatusRoot);
  n.add_state(st("A", ValueClass::Wait, true));
  EXPECT_THROW(n.add_edge("A", "Z", kSelf, kNormal), MalformedNfa);
  n.add_state(st("B", ValueClass::Wait));
  EXPECT_THROW(n.validate(), MalformedNfa);  // B unreachable
  Nfa none("none", NfaField::StatusRoot);
  none.add_state(st("A", ValueClass::Wait));
  EXPECT_THROW(none.start(), MalformedNfa);
}

TEST(NfaChecks, AllBuiltNfasPass) {
  for (const auto& n : {build_root_status_nfa(), build_nonroot_status_nfa()}) {
    EXPECT_TRUE(check_livelock_freedom(n).pass) << n.name();
    EXPECT_TRUE(check_starvation_freedom(n).pass) << n.name();
    EXPECT_TRUE(check_bounded_release(n).pass) << n.name();
    EXPECT_TRUE(check_bounded_timeout(n).pass) << n.name();
    EXPECT_TRUE(check_deadlock_freedom(n).pass) << n.name();
    EXPECT_TRUE(check_three_participants(n).pass) << n.name();
    EXPECT_TRUE(check_round_bound(n).pass) << n.name();
  }
  const auto next = build_next_nfa();
  EXPECT_TRUE(check_livelock_freedom(next).pass);
  EXPECT_TRUE(check_bounded_timeout(next).pass);
  EXPECT_TRUE(check_deadlock_freedom(next).pass);
  EXPECT_THROW(check_starvation_freedom(next), NoOwnerStates);
  EXPECT_THROW(check_bounded_release(next), NoOwnerStates);
}

TEST(NfaChecks, BuiltNfasAgreeWithOracles) {
  for (const auto& n : {build_root_status_nfa(), build_nonroot_status_nfa(), build_next_nfa()}) {
    EXPECT_TRUE(oracle_livelock_free(n)) << n.name();
    EXPECT_TRUE(oracle_deadlock_free(n)) << n.name();
    EXPECT_TRUE(oracle_bounded_timeout(n)) << n.name();
    if (!n.owner_states().empty()) {
      EXPECT_TRUE(oracle_starvation_free(n)) << n.name();
      EXPECT_TRUE(oracle_bounded_release(n)) << n.name();
    }
  }
}

TEST(NfaChecks, LivelockWitnessOnSyntheticCycle) {
  Nfa n("cycle", NfaField::StatusRoot);
  n.add_state(st("A", ValueClass::Wait, true));
  n.add_state(st("B", ValueClass::Wait));
  n.add_edge("A", "B", kSelf, kNormal);
  n.add_edge("B", "A", kSelf, kNormal);
  const auto v = check_livelock_freedom(n);
  EXPECT_FALSE(v.pass);
  EXPECT_EQ(v.witness, (std::vector<std::string>{"A", "B", "A"}));
}

TEST(NfaChecks, StarvationFailsWithoutPass) {
  auto n = build_root_status_nfa();
  EXPECT_EQ(n.remove_edges("W1", "U1"), 1u);
  const auto v = check_starvation_freedom(n);
  EXPECT_FALSE(v.pass);
  EXPECT_FALSE(v.witness.empty());
  EXPECT_FALSE(oracle_starvation_free(n));
}

TEST(NfaChecks, BoundedReleaseFailsWithoutRelease) {
  auto n = build_root_status_nfa();
  n.remove_edges("U1", "R1");
  n.remove_edges("U1", "U3");
  const auto v = check_bounded_release(n);
  EXPECT_FALSE(v.pass);
  EXPECT_EQ(v.witness, (std::vector<std::string>{"U1"}));
}

TEST(NfaChecks, BoundedTimeoutFailsOnAbsorbingState) {
  Nfa n("absorb", NfaField::StatusRoot);
  n.add_state(st("A", ValueClass::Recycled, true));
  n.add_state(st("B", ValueClass::Wait));
  n.add_edge("A", "B", kSelf, kBegin);
  n.add_edge("B", "A", kSelf, kTimeout);
  EXPECT_TRUE(check_bounded_timeout(n).pass);
  n.add_state(st("X", ValueClass::Wait));
  n.add_edge("B", "X", kPred, kNormal);
  const auto v = check_bounded_timeout(n);
  EXPECT_FALSE(v.pass);
  EXPECT_EQ(v.witness, (std::vector<std::string>{"X"}));
}

TEST(NfaChecks, DeadlockFailsWhenBeginSourceUnreachable) {
  Nfa n("stuck", NfaField::StatusRoot);
  n.add_state(st("A", ValueClass::Recycled, true));
  n.add_state(st("B", ValueClass::Wait));
  n.add_state(st("X", ValueClass::Wait));
  n.add_edge("A", "B", kSelf, kBegin);
  n.add_edge("B", "A", kSelf, kNormal);
  n.add_edge("B", "X", kPred, kNormal);
  n.add_edge("X", "A", kSucc, kNormal);
  const auto v = check_deadlock_freedom(n);
  EXPECT_FALSE(v.pass);
  EXPECT_EQ(v.witness, (std::vector<std::string>{"X"}));
}

TEST(NfaChecks, RoundBoundFailsOnThirdRoundEdge) {
  Nfa n("rounds", NfaField::StatusRoot);
  n.add_state(st("A", ValueClass::Recycled, true));
  n.add_state(st("B", ValueClass::Wait));
  n.add_state(st("C", ValueClass::Wait));
  n.add_state(st("D", ValueClass::Wait));
  n.add_edge("A", "B", kSelf, kBegin);
  n.add_edge("B", "C", kSelf, kBegin);
  n.add_edge("C", "D", kSelf, kBegin);
  EXPECT_TRUE(check_round_bound(n, 3).pass);
  EXPECT_FALSE(check_round_bound(n, 2).pass);
}

TEST(NfaChecks, ReportFlagsDeletedEdge) {
  auto n = build_root_status_nfa();
  n.remove_edges("W1", "U1");
  const auto lines = run_nfa_checks(n);
  EXPECT_FALSE(all_passed(lines));
  const auto text = render_nfa_checks(n, lines);
  EXPECT_NE(text.find("starvation-freedom  FAIL"), std::string::npos);
  EXPECT_NE(text.find("witness:"), std::string::npos);
}

TEST(NfaChecks, ReportOnNextMarksStarvationNotApplicable) {
  const auto lines = run_nfa_checks(build_next_nfa());
  EXPECT_TRUE(all_passed(lines));
  for (const auto& l : lines) {
    if (l.property == "starvation-freedom") {
      EXPECT_EQ(l.status, CheckStatus::NotApplicable);
    } else {
      EXPECT_EQ(l.status, CheckStatus::Pass) << l.property;
    }
  }
}

// Property: every checker agrees with an independently written oracle on
// random automata.
TEST(NfaChecks, CheckersMatchOraclesOnRandomNfas) {
  std::mt19937 rng(20240601);
  int with_owner = 0;
  for (int i = 0; i < 400; ++i) {
    const auto n = random_nfa(rng);
    ASSERT_EQ(check_livelock_freedom(n).pass, oracle_livelock_free(n)) << export_graph(n);
    ASSERT_EQ(check_deadlock_freedom(n).pass, oracle_deadlock_free(n)) << export_graph(n);
    ASSERT_EQ(check_bounded_timeout(n).pass, oracle_bounded_timeout(n)) << export_graph(n);
    if (!n.owner_states().empty()) {
      ++with_owner;
      ASSERT_EQ(check_starvation_freedom(n).pass, oracle_starvation_free(n)) << export_graph(n);
      ASSERT_EQ(check_bounded_release(n).pass, oracle_bounded_release(n)) << export_graph(n);
    }
  }
  EXPECT_GT(with_owner, 50);
}

TEST(NfaBuild, ExtensionEdgesAreMarked) {
  const auto names = [](const Nfa& n) {
    std::set<std::string> out;
    for (std::size_t i = 0; i < n.edges().size(); ++i) {
      if (n.edges()[i].extension) out.insert(n.edge_name(i));
    }
    return out;
  };
  EXPECT_EQ(names(build_root_status_nfa()), (std::set<std::string>{"U2->R1 [successor,normal]"}));
  EXPECT_EQ(names(build_nonroot_status_nfa()),
            (std::set<std::string>{"W5->R3 [predecessor,normal]", "V/P1->R1 [successor,normal]",
                                   "P2->R1 [predecessor,normal]", "W3->R3 [successor,normal]",
                                   "W3->R2 [successor,normal]"}));
  EXPECT_TRUE(names(build_next_nfa()).empty());
  const auto dot = export_graph(build_root_status_nfa());
  EXPECT_NE(dot.find("\"U2\" -> \"R1\" [actor=successor, kind=normal, color=red, style=dashed, extension=true];"),
            std::string::npos);
}

TEST(NfaExport, HeaderAndNodeCounts) {
  const auto root = export_graph(build_root_status_nfa());
  EXPECT_EQ(root.rfind("// hmcst-nfa-v1\n", 0), 0u);
  EXPECT_EQ(count_lines_with(root, "shape="), 10u);
  const auto next = export_graph(build_next_nfa());
  EXPECT_EQ(count_lines_with(next, "shape="), 5u);
  EXPECT_NE(next.find("\"S1\" -> \"S1\""), std::string::npos);
  EXPECT_EQ(count_lines_with(export_graph(build_nonroot_status_nfa()), "shape="), 15u);
}

TEST(NfaExport, EmptyNfaIsHeaderAndFooter) {
  Nfa n("empty", NfaField::Next);
  EXPECT_EQ(export_graph(n), "// hmcst-nfa-v1\ndigraph \"empty\" {\n}\n");
}

TEST(NfaExport, Deterministic) {
  EXPECT_EQ(export_graph(build_nonroot_status_nfa()), export_graph(build_nonroot_status_nfa()));
}

TEST(ValueClasses, MatchConcreteValues) {
  EXPECT_TRUE(matches(ValueClass::CohortStart, Field::Status, StatusValue::cohort(1).encode()));
  EXPECT_FALSE(matches(ValueClass::CohortStart, Field::Status, StatusValue::cohort(2).encode()));
  EXPECT_TRUE(matches(ValueClass::PassAll, Field::Status, StatusValue::cohort(3).encode()));
  EXPECT_TRUE(matches(ValueClass::PassOrParent, Field::Status, StatusValue::parent_prefix().encode()));
  EXPECT_TRUE(matches(ValueClass::PassOrParent, Field::Status, StatusValue::cohort(2).encode()));
  EXPECT_FALSE(matches(ValueClass::PassOrParent, Field::Status, StatusValue::cohort(1).encode()));
  EXPECT_TRUE(matches(ValueClass::Successor, Field::Next, NextValue::successor(3).encode()));
  EXPECT_TRUE(matches(ValueClass::Impatience, Field::Next, NextValue::impatience().encode()));
  EXPECT_FALSE(matches(ValueClass::Null, Field::Next, NextValue::impatience().encode()));
}

TEST(ValueClasses, EncodeDecodeRoundTrip) {
  for (auto v : {StatusValue::recycled(), StatusValue::wait(), StatusValue::abandoned(), StatusValue::unlocked_root(),
                 StatusValue::parent_prefix(), StatusValue::cohort(1), StatusValue::cohort(4)}) {
    EXPECT_EQ(StatusValue::decode(v.encode()), v) << v.to_string();
  }
  for (auto v : {NextValue::null(), NextValue::impatience(), NextValue::successor(2), NextValue::predecessor_mark(5)}) {
    EXPECT_EQ(NextValue::decode(v.encode()), v) << v.to_string();
  }
}
