#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hmcst/conformance.hpp"
#include "hmcst/protocol.hpp"

namespace hmcst {

class MalformedTrace : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DigestMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ResourceBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One root lock, three threads; the thread under scrutiny runs two rounds.
Config root_config();
// Two leaf threads under a shared level-2 parent, two threads entering at
// level 2, and an abstract level 3 that grants or abandons.
Config nonroot_config();
std::optional<Config> preset(std::string_view name);

// Parses the text produced by Config::canonical(). Throws InvalidConfig.
Config parse_config(std::string_view canonical);

struct TraceStep {
  ThreadId thread = 0;
  Choice choice = Choice::Proceed;
  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct Trace {
  std::uint64_t digest = 0;
  std::string config;  // canonical config text
  std::vector<TraceStep> steps;
  friend bool operator==(const Trace&, const Trace&) = default;
};

Trace make_trace(const Config& config, std::vector<TraceStep> steps = {});
std::string write_trace(const Trace& trace);
Trace parse_trace(std::string_view text);  // throws MalformedTrace
std::string digest_hex(std::uint64_t digest);

enum class FindingKind : std::uint8_t {
  MutualExclusion,
  Deadlock,
  Conformance,
  NonQuiescent,
  Starvation,
  AcquisitionOrder,
  ReleaseOrder,
  ProtocolFault,
};
const char* to_string(FindingKind k);

struct Finding {
  FindingKind kind = FindingKind::ProtocolFault;
  std::string detail;
  Trace trace;
};

// Per-thread order bookkeeping carried through the search so that the
// acquisition and release facts are checked on every execution.
struct OrderGhost {
  std::uint8_t acq_last = 0;
  std::uint8_t rel_last = 0;
  bool rel_falling = false;
  friend bool operator==(const OrderGhost&, const OrderGhost&) = default;
};

// Protocol state plus monitor cursors and order ghosts: the unit of search.
struct SearchState {
  GlobalState proto;
  std::vector<Cursor> cursors;
  std::array<OrderGhost, kMaxThreads> order{};

  void encode(std::string& out) const;
  std::string encode() const;
};

// Protocol, monitors and every check, packaged for any traversal order.
class Model {
 public:
  explicit Model(const Config& config);

  const Protocol& protocol() const { return protocol_; }
  const Config& config() const { return protocol_.config(); }
  Conformance& conformance() { return conformance_; }
  const Conformance& conformance() const { return conformance_; }

  SearchState initial() const;
  std::vector<TraceStep> enabled(const SearchState& s) const;

  // Applies one scheduling decision. Returns a finding on conformance,
  // order or protocol faults; `labels` and `events` receive what the step
  // emitted.
  std::optional<Finding> advance(SearchState& s, TraceStep step, std::vector<ActionLabel>* labels = nullptr,
                                 std::vector<ProtocolEvent>* events = nullptr);
  // Checks evaluated on every reached state.
  std::optional<Finding> check_state(const SearchState& s) const;
  bool terminal(const SearchState& s) const { return protocol_.all_done(s.proto); }

 private:
  Protocol protocol_;
  Conformance conformance_;
  std::optional<Finding> check_events(SearchState& s, const std::vector<ProtocolEvent>& events) const;
};

std::optional<std::string> assert_mutual_exclusion(const Protocol& p, const GlobalState& s);
std::optional<std::string> assert_no_deadlock(const Protocol& p, const GlobalState& s);
// Terminal checks: statuses recycled, tails empty, next links settled.
std::optional<std::string> assert_quiescent(const Protocol& p, const GlobalState& s);
std::optional<std::string> assert_no_starvation(const Protocol& p, const GlobalState& s);

struct ExploreOptions {
  std::uint64_t state_cap = 50'000'000;
  bool fail_fast = true;
};

struct ExplorationReport {
  std::string config_name;
  std::uint64_t digest = 0;
  std::uint64_t states = 0;
  std::uint64_t protocol_states = 0;
  std::uint64_t transitions = 0;
  std::uint64_t max_depth = 0;
  std::uint64_t terminal_states = 0;
  std::vector<Finding> violations;
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> coverage;  // nfa -> (covered, total)
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> published_coverage;
  std::string coverage_table;

  bool full_coverage(const std::string& nfa) const;
  // Every edge of the published diagram hit; extension edges ignored.
  bool full_published_coverage(const std::string& nfa) const;
  std::string text() const;
};

// Exhaustive depth-first search. Throws ResourceBudgetExceeded at the cap.
ExplorationReport explore(const Config& config, const ExploreOptions& options = {});

struct ReplayResult {
  GlobalState final_state;
  std::vector<std::vector<ActionLabel>> labels;  // per step
  std::vector<ProtocolEvent> events;
  std::optional<Finding> violation;
  std::size_t violation_step = 0;  // index of the step after which it was seen
};

// Throws DigestMismatch when the trace was recorded for another config and
// MalformedTrace when a step is not enabled.
ReplayResult replay(const Config& config, const Trace& trace);
ReplayResult replay(const Trace& trace);

// Per round, the levels at which the thread began acquisition.
std::vector<std::vector<unsigned>> acquisition_order_witness(const Trace& trace, ThreadId thread);
// Per round, (level, kind) for every release, delegation and abandonment.
std::vector<std::vector<std::pair<unsigned, EventKind>>> release_order_witness(const Trace& trace, ThreadId thread);

bool strictly_increasing(const std::vector<unsigned>& levels);
bool bitonic(const std::vector<unsigned>& levels);

}  // namespace hmcst
