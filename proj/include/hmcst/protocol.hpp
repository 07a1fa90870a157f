#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hmcst/values.hpp"

namespace hmcst {

class InvalidConfig : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IllegalStep : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnknownThread : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

inline constexpr std::size_t kMaxNodes = 8;
inline constexpr std::size_t kMaxLocks = 4;
inline constexpr std::size_t kMaxThreads = 4;
inline constexpr std::size_t kMaxPath = 4;  // real levels plus an abstract top

enum class TopMode : std::uint8_t {
  RealRoot,                 // the topmost lock is a real root lock
  NondeterministicAbandon,  // above the topmost lock sits an abstract level that grants or abandons
};

// Seeded protocol faults used to show the checks can fail.
enum class Mutation : std::uint8_t {
  None,
  SkipTailCas,       // release pretends the tail CAS succeeded
  DropRecycleWrite,  // owner never recycles its own node after a handoff
  ReorderRelease,    // at the threshold, release the level before its parent
  NoImpatienceMark,  // impatient release leaves without marking next
  PassWrongDepth,    // release passes a pass-all value where only the parent prefix is legal
  NoTimeoutNoPass,   // no timeouts anywhere and lock passing writes are lost
};

const char* to_string(TopMode m);
const char* to_string(Mutation m);
std::optional<Mutation> mutation_from_string(std::string_view s);
std::vector<Mutation> all_mutations();

struct LockSpec {
  unsigned level = 1;
  LockId parent = kNone;
};

struct ThreadSpec {
  std::string name;
  LockId entry = 0;
  unsigned rounds = 1;
};

struct Config {
  std::string name;
  std::vector<LockSpec> locks;
  std::vector<ThreadSpec> threads;
  TopMode top_mode = TopMode::RealRoot;
  unsigned passing_threshold = 2;
  Mutation mutation = Mutation::None;

  // Stable textual form, the input to digest().
  std::string canonical() const;
  std::uint64_t digest() const;  // FNV-1a 64 of canonical()
};

// One level of a thread's path: the lock and the node it enqueues there.
struct PathStep {
  LockId lock = kNone;
  NodeId node = kNone;
  unsigned level = 0;
  bool is_root = false;
};

class Topology {
 public:
  explicit Topology(const Config& config);  // throws InvalidConfig

  std::size_t node_count() const { return node_lock_.size(); }
  std::size_t lock_count() const { return locks_.size(); }
  std::size_t thread_count() const { return paths_.size(); }

  LockId node_lock(NodeId n) const { return node_lock_.at(n); }
  bool node_is_root(NodeId n) const { return root_lock_[node_lock_.at(n)]; }
  bool lock_is_root(LockId l) const { return root_lock_.at(l); }
  const std::string& node_name(NodeId n) const { return node_name_.at(n); }

  // Real levels only; the abstract top, if any, is position real_length().
  const std::vector<PathStep>& path(ThreadId t) const { return paths_.at(t); }
  std::size_t real_length(ThreadId t) const { return paths_.at(t).size(); }
  bool has_abstract_top() const { return abstract_top_; }
  unsigned abstract_level() const { return abstract_level_; }
  LockId abstract_lock() const { return static_cast<LockId>(locks_.size()); }

  // True when node n lies on thread t's path (t acts on n as "self").
  bool owns(ThreadId t, NodeId n) const;
  // Every node a thread may visit, in path order.
  std::vector<NodeId> nodes_of(ThreadId t) const;

 private:
  std::vector<LockSpec> locks_;
  std::vector<bool> root_lock_;
  std::vector<LockId> node_lock_;
  std::vector<std::string> node_name_;
  std::vector<std::vector<PathStep>> paths_;
  bool abstract_top_ = false;
  unsigned abstract_level_ = 0;
};

enum class Choice : std::uint8_t { Proceed, Timeout };
const char* to_string(Choice c);

enum class Pc : std::uint8_t {
  AcqSwapStatus,
  AcqInheritWrite,
  AwaitRecycle,
  AcqResetNext,
  AcqSwapTail,
  AcqLinkPred,
  AcqRecyclePred,
  AcqOwnNoPred,
  Spin,
  AcqBeginCohort,
  AbstractTop,
  InCs,
  PassReadNext,  // horizontal passing: look for a successor
  SwapSucc,
  MarkChain,
  Recycle,
  CleanupRead,
  CleanupWrite,
  TailCas,
  AwaitNext,
  Done,
};
const char* to_string(Pc pc);

enum class Mode : std::uint8_t { Release, Abort };
enum class Phase : std::uint8_t { Up, Down };

struct ThreadFrame {
  Pc pc = Pc::AcqSwapStatus;
  std::uint8_t pos = 0;
  std::uint8_t round = 0;
  std::uint8_t cs_entries = 0;
  bool timed_out = false;
  std::uint8_t held = 0;  // bit per path position, top position included
  std::uint8_t abort_pos = kNone;
  Mode mode = Mode::Release;
  Phase phase = Phase::Up;
  std::uint16_t spin_value = 0;
  NodeId tmp = kNone;
  std::uint8_t reorder_pos = kNone;
  std::array<NodeId, kMaxPath> cur{kNone, kNone, kNone, kNone};
  std::array<NodeId, kMaxPath> chain{kNone, kNone, kNone, kNone};
  std::array<std::uint8_t, kMaxPath> count{};

  void encode(std::string& out) const;
  friend bool operator==(const ThreadFrame&, const ThreadFrame&) = default;
};

struct NodeCell {
  std::uint16_t status = 0;
  std::uint16_t next = 0;
  friend bool operator==(const NodeCell&, const NodeCell&) = default;
};

struct GlobalState {
  std::uint8_t node_count = 0;
  std::uint8_t lock_count = 0;
  std::uint8_t thread_count = 0;
  std::array<NodeCell, kMaxNodes> nodes{};
  std::array<NodeId, kMaxLocks> tails{};
  std::array<ThreadFrame, kMaxThreads> frames{};

  StatusValue status(NodeId n) const { return StatusValue::decode(nodes[n].status); }
  NextValue next(NodeId n) const { return NextValue::decode(nodes[n].next); }

  // Canonical byte encoding; equal states have equal encodings.
  void encode(std::string& out) const;
  std::string encode() const;
  friend bool operator==(const GlobalState&, const GlobalState&) = default;
};

enum class EventKind : std::uint8_t { BeginLevel, EnterCs, Abandon, Delegate, Release, RoundEnd };
const char* to_string(EventKind k);

struct ProtocolEvent {
  ThreadId thread = 0;
  EventKind kind = EventKind::BeginLevel;
  unsigned level = 0;
  friend bool operator==(const ProtocolEvent&, const ProtocolEvent&) = default;
};

struct StepResult {
  GlobalState state;
  std::vector<ActionLabel> labels;
  std::vector<ProtocolEvent> events;
};

class Protocol {
 public:
  explicit Protocol(Config config);  // throws InvalidConfig

  const Config& config() const { return config_; }
  const Topology& topology() const { return topo_; }

  GlobalState initial_state() const;

  // Empty for a finished thread. Proceed is offered only when the awaited
  // condition holds; Timeout at every waiting point.
  std::vector<Choice> enabled_choices(const GlobalState& s, ThreadId t) const;  // throws UnknownThread

  StepResult step(const GlobalState& s, ThreadId t, Choice c = Choice::Proceed) const;
  // In-place variant; labels and events are appended.
  void apply_step(GlobalState& s, ThreadId t, Choice c, std::vector<ActionLabel>& labels,
                  std::vector<ProtocolEvent>& events) const;

  bool in_cs(const GlobalState& s, ThreadId t) const { return s.frames.at(t).pc == Pc::InCs; }
  bool done(const GlobalState& s, ThreadId t) const { return s.frames.at(t).pc == Pc::Done; }
  bool all_done(const GlobalState& s) const;
  // Holder threads per lock; index abstract_lock() is the abstract top.
  std::vector<std::vector<ThreadId>> holders(const GlobalState& s) const;

  std::string describe(const GlobalState& s) const;

 private:
  Config config_;
  Topology topo_;
};

}  // namespace hmcst
