#include "hmcst/protocol.hpp"

#include <algorithm>
#include <sstream>

namespace hmcst {

const char* to_string(TopMode m) {
  return m == TopMode::RealRoot ? "real-root" : "nondeterministic-abandon";
}

namespace {

constexpr std::array<std::pair<Mutation, const char*>, 7> kMutationNames{{
    {Mutation::None, "none"},
    {Mutation::SkipTailCas, "skip-tail-cas"},
    {Mutation::DropRecycleWrite, "drop-recycle-write"},
    {Mutation::ReorderRelease, "reorder-release"},
    {Mutation::NoImpatienceMark, "no-impatience-mark"},
    {Mutation::PassWrongDepth, "pass-wrong-depth"},
    {Mutation::NoTimeoutNoPass, "no-timeout-no-pass"},
}};

}  // namespace

const char* to_string(Mutation m) {
  for (const auto& [k, name] : kMutationNames) {
    if (k == m) return name;
  }
  return "?";
}

std::optional<Mutation> mutation_from_string(std::string_view s) {
  for (const auto& [k, name] : kMutationNames) {
    if (s == name) return k;
  }
  return std::nullopt;
}

std::vector<Mutation> all_mutations() {
  std::vector<Mutation> out;
  for (const auto& [k, name] : kMutationNames) {
    if (k != Mutation::None) out.push_back(k);
  }
  return out;
}

std::string Config::canonical() const {
  std::ostringstream out;
  out << "name=" << name << ";top=" << to_string(top_mode) << ";threshold=" << passing_threshold
      << ";mutation=" << to_string(mutation) << ";locks=";
  for (std::size_t i = 0; i < locks.size(); ++i) {
    if (i) out << ',';
    out << locks[i].level << ':';
    if (locks[i].parent == kNone) out << '-'; else out << unsigned(locks[i].parent);
  }
  out << ";threads=";
  for (std::size_t i = 0; i < threads.size(); ++i) {
    if (i) out << ',';
    out << threads[i].name << '@' << unsigned(threads[i].entry) << '*' << threads[i].rounds;
  }
  return out.str();
}

std::uint64_t Config::digest() const {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Topology::Topology(const Config& config) : locks_(config.locks) {
  if (locks_.empty() || locks_.size() > kMaxLocks) throw InvalidConfig("lock count out of range");
  if (config.threads.empty() || config.threads.size() > kMaxThreads) throw InvalidConfig("thread count out of range");
  if (config.passing_threshold < 1 || config.passing_threshold > 200) throw InvalidConfig("passing threshold out of range");

  std::size_t tops = 0;
  for (std::size_t i = 0; i < locks_.size(); ++i) {
    const auto& l = locks_[i];
    if (l.parent == kNone) {
      ++tops;
      continue;
    }
    if (l.parent >= locks_.size() || l.parent == i) throw InvalidConfig("bad parent lock");
    if (locks_[l.parent].level <= l.level) throw InvalidConfig("parent level must exceed child level");
  }
  if (tops != 1) throw InvalidConfig("exactly one top lock required");

  abstract_top_ = config.top_mode == TopMode::NondeterministicAbandon;
  root_lock_.assign(locks_.size(), false);
  for (std::size_t i = 0; i < locks_.size(); ++i) {
    if (locks_[i].parent == kNone) {
      root_lock_[i] = !abstract_top_;
      abstract_level_ = locks_[i].level + 1;
    }
  }

  for (std::size_t t = 0; t < config.threads.size(); ++t) {
    const auto& th = config.threads[t];
    if (th.rounds < 1 || th.rounds > 100) throw InvalidConfig("rounds out of range for " + th.name);
    if (th.entry >= locks_.size()) throw InvalidConfig("bad entry lock for " + th.name);
    node_lock_.push_back(th.entry);
    node_name_.push_back(th.name);
  }
  std::vector<NodeId> hnode(locks_.size(), kNone);
  for (std::size_t i = 0; i < locks_.size(); ++i) {
    if (locks_[i].parent == kNone) continue;
    hnode[i] = static_cast<NodeId>(node_lock_.size());
    node_lock_.push_back(locks_[i].parent);
    node_name_.push_back("L" + std::to_string(i));
  }
  if (node_lock_.size() > kMaxNodes) throw InvalidConfig("too many queue nodes");

  for (std::size_t t = 0; t < config.threads.size(); ++t) {
    std::vector<PathStep> path;
    LockId l = config.threads[t].entry;
    NodeId n = static_cast<NodeId>(t);
    while (true) {
      path.push_back({l, n, locks_[l].level, root_lock_[l]});
      if (locks_[l].parent == kNone) break;
      n = hnode[l];
      l = locks_[l].parent;
      if (path.size() > locks_.size()) throw InvalidConfig("lock cycle");
    }
    if (path.size() + (abstract_top_ ? 1 : 0) > kMaxPath) throw InvalidConfig("path too long");
    paths_.push_back(std::move(path));
  }
}

bool Topology::owns(ThreadId t, NodeId n) const {
  const auto& p = paths_.at(t);
  return std::any_of(p.begin(), p.end(), [&](const PathStep& s) { return s.node == n; });
}

std::vector<NodeId> Topology::nodes_of(ThreadId t) const {
  std::vector<NodeId> out;
  for (const auto& s : paths_.at(t)) out.push_back(s.node);
  return out;
}

const char* to_string(Choice c) { return c == Choice::Proceed ? "proceed" : "timeout"; }

const char* to_string(Pc pc) {
  switch (pc) {
    case Pc::AcqSwapStatus: return "acq-swap-status";
    case Pc::AcqInheritWrite: return "acq-inherit";
    case Pc::AwaitRecycle: return "await-recycle";
    case Pc::AcqResetNext: return "acq-reset-next";
    case Pc::AcqSwapTail: return "acq-swap-tail";
    case Pc::AcqLinkPred: return "acq-link-pred";
    case Pc::AcqRecyclePred: return "acq-recycle-pred";
    case Pc::AcqOwnNoPred: return "acq-own";
    case Pc::Spin: return "spin";
    case Pc::AcqBeginCohort: return "acq-begin-cohort";
    case Pc::AbstractTop: return "abstract-top";
    case Pc::InCs: return "in-cs";
    case Pc::PassReadNext: return "pass-read-next";
    case Pc::SwapSucc: return "swap-succ";
    case Pc::MarkChain: return "mark-chain";
    case Pc::Recycle: return "recycle";
    case Pc::CleanupRead: return "cleanup-read";
    case Pc::CleanupWrite: return "cleanup-write";
    case Pc::TailCas: return "tail-cas";
    case Pc::AwaitNext: return "await-next";
    case Pc::Done: return "done";
  }
  return "?";
}

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::BeginLevel: return "begin";
    case EventKind::EnterCs: return "enter-cs";
    case EventKind::Abandon: return "abandon";
    case EventKind::Delegate: return "delegate";
    case EventKind::Release: return "release";
    case EventKind::RoundEnd: return "round-end";
  }
  return "?";
}

void ThreadFrame::encode(std::string& out) const {
  out.push_back(static_cast<char>(pc));
  out.push_back(static_cast<char>(pos));
  out.push_back(static_cast<char>(round));
  out.push_back(static_cast<char>(cs_entries));
  out.push_back(static_cast<char>(timed_out));
  out.push_back(static_cast<char>(held));
  out.push_back(static_cast<char>(abort_pos));
  out.push_back(static_cast<char>((static_cast<unsigned>(mode) << 1) | static_cast<unsigned>(phase)));
  out.push_back(static_cast<char>(spin_value >> 8));
  out.push_back(static_cast<char>(spin_value & 0xFF));
  out.push_back(static_cast<char>(tmp));
  out.push_back(static_cast<char>(reorder_pos));
  for (auto v : cur) out.push_back(static_cast<char>(v));
  for (auto v : chain) out.push_back(static_cast<char>(v));
  for (auto v : count) out.push_back(static_cast<char>(v));
}

void GlobalState::encode(std::string& out) const {
  for (std::size_t i = 0; i < node_count; ++i) {
    out.push_back(static_cast<char>(nodes[i].status >> 8));
    out.push_back(static_cast<char>(nodes[i].status & 0xFF));
    out.push_back(static_cast<char>(nodes[i].next >> 8));
    out.push_back(static_cast<char>(nodes[i].next & 0xFF));
  }
  for (std::size_t i = 0; i < lock_count; ++i) out.push_back(static_cast<char>(tails[i]));
  for (std::size_t i = 0; i < thread_count; ++i) frames[i].encode(out);
}

std::string GlobalState::encode() const {
  std::string out;
  encode(out);
  return out;
}

Protocol::Protocol(Config config) : config_(std::move(config)), topo_(config_) {}

GlobalState Protocol::initial_state() const {
  GlobalState s;
  s.node_count = static_cast<std::uint8_t>(topo_.node_count());
  s.lock_count = static_cast<std::uint8_t>(topo_.lock_count());
  s.thread_count = static_cast<std::uint8_t>(topo_.thread_count());
  for (auto& n : s.nodes) n = {StatusValue::recycled().encode(), NextValue::null().encode()};
  s.tails.fill(kNone);
  return s;
}

bool Protocol::all_done(const GlobalState& s) const {
  for (std::size_t t = 0; t < s.thread_count; ++t) {
    if (s.frames[t].pc != Pc::Done) return false;
  }
  return true;
}

std::vector<std::vector<ThreadId>> Protocol::holders(const GlobalState& s) const {
  std::vector<std::vector<ThreadId>> out(topo_.lock_count() + 1);
  for (std::size_t t = 0; t < s.thread_count; ++t) {
    const auto& path = topo_.path(static_cast<ThreadId>(t));
    const auto held = s.frames[t].held;
    for (std::size_t p = 0; p < path.size(); ++p) {
      if (held & (1u << p)) out[path[p].lock].push_back(static_cast<ThreadId>(t));
    }
    if (topo_.has_abstract_top() && (held & (1u << path.size()))) out[topo_.abstract_lock()].push_back(static_cast<ThreadId>(t));
  }
  return out;
}

namespace {

bool is_grant(StatusValue v, bool root) {
  return root ? v.is(StatusKind::UnlockedRoot) : (v.is_pass_all() || v.is(StatusKind::ParentPrefix));
}

bool has_timeouts(const Config& c) { return c.mutation != Mutation::NoTimeoutNoPass; }

// One step of one thread. Local bookkeeping between shared accesses is folded
// into the access that follows it.
class Stepper {
 public:
  Stepper(const Protocol& p, GlobalState& s, ThreadId t, std::vector<ActionLabel>& labels,
          std::vector<ProtocolEvent>& events)
      : cfg_(p.config()), topo_(p.topology()), s_(s), t_(t), f_(s.frames[t]), labels_(labels), events_(events) {}

  void run(Choice c);

 private:
  const Config& cfg_;
  const Topology& topo_;
  GlobalState& s_;
  ThreadId t_;
  ThreadFrame& f_;
  std::vector<ActionLabel>& labels_;
  std::vector<ProtocolEvent>& events_;

  std::size_t real_len() const { return topo_.real_length(t_); }
  std::size_t top_pos() const { return real_len(); }
  const PathStep& at(std::size_t p) const { return topo_.path(t_)[p]; }
  NodeId own(std::size_t p) const { return at(p).node; }
  bool root(std::size_t p) const { return at(p).is_root; }
  unsigned level(std::size_t p) const { return p == top_pos() ? topo_.abstract_level() : at(p).level; }
  std::uint8_t bit(std::size_t p) const { return static_cast<std::uint8_t>(1u << p); }

  Actor actor(NodeId n, Actor role) const { return topo_.owns(t_, n) ? Actor::Self : role; }

  void event(EventKind k, unsigned lvl) { events_.push_back({t_, k, lvl}); }

  void label(NodeId n, Field field, std::uint16_t old_v, std::uint16_t new_v, Actor role, EdgeKind kind) {
    labels_.push_back({t_, n, field, old_v, new_v, actor(n, role), kind});
  }

  StatusValue status(NodeId n) const { return s_.status(n); }
  NextValue next(NodeId n) const { return s_.next(n); }

  void write_status(NodeId n, StatusValue v, Actor role, EdgeKind kind) {
    const auto old_v = s_.nodes[n].status;
    s_.nodes[n].status = v.encode();
    label(n, Field::Status, old_v, v.encode(), role, kind);
  }

  void write_next(NodeId n, NextValue v, Actor role, EdgeKind kind) {
    const auto old_v = s_.nodes[n].next;
    s_.nodes[n].next = v.encode();
    label(n, Field::Next, old_v, v.encode(), role, kind);
  }

  [[noreturn]] void illegal(const std::string& why) const {
    throw IllegalStep("thread " + std::to_string(t_) + " at " + to_string(f_.pc) + ": " + why);
  }

  StatusValue pass_value(std::size_t p) const;

  void ascend();
  void enter_cs();
  void abandon(std::size_t p);
  void up(std::size_t p);
  void down(int p);
  void complete(std::size_t p);
  void after_pass(std::size_t p);
  void begin_cleanup(std::size_t p);
  void finish();
  void walk_to(std::size_t p, NodeId succ);
  void handoff(std::size_t p);

  void acq_swap_status();
  void await_recycle(Choice c);
  void acq_link_pred();
  void acq_own();
  void spin(Choice c);
  void grant(StatusValue v);
  void abstract_top(Choice c);
  void swap_succ();
  void tail_cas();
  void await_next(Choice c);
  void impatient(std::size_t p, NodeId c);
  void cleanup_write();
};

StatusValue Stepper::pass_value(std::size_t p) const {
  if (root(p)) return StatusValue::unlocked_root();
  if (f_.phase == Phase::Up) {
    if (f_.mode == Mode::Abort) return StatusValue::parent_prefix();
    return StatusValue::cohort(f_.count[p] + 1u);
  }
  if (cfg_.mutation == Mutation::PassWrongDepth) return StatusValue::cohort(cfg_.passing_threshold < 2 ? 2 : cfg_.passing_threshold);
  return StatusValue::parent_prefix();
}

void Stepper::enter_cs() {
  f_.pc = Pc::InCs;
  ++f_.cs_entries;
  event(EventKind::EnterCs, 0);
}

void Stepper::ascend() {
  const std::size_t p = f_.pos + 1u;
  if (p < real_len()) {
    f_.pos = static_cast<std::uint8_t>(p);
    f_.pc = Pc::AcqSwapStatus;
  } else if (topo_.has_abstract_top()) {
    f_.pos = static_cast<std::uint8_t>(p);
    f_.pc = Pc::AbstractTop;
  } else {
    enter_cs();
  }
}

void Stepper::abandon(std::size_t p) {
  event(EventKind::Abandon, level(p));
  f_.mode = Mode::Abort;
  f_.abort_pos = static_cast<std::uint8_t>(p);
  if (p == 0) {
    finish();
  } else {
    up(0);
  }
}

void Stepper::up(std::size_t p) {
  f_.phase = Phase::Up;
  f_.pos = static_cast<std::uint8_t>(p);
  if (p == top_pos()) {
    // Abstract top: released at once.
    f_.held &= static_cast<std::uint8_t>(~bit(p));
    event(EventKind::Release, level(p));
    down(static_cast<int>(p) - 1);
    return;
  }
  f_.cur[p] = own(p);
  f_.chain[p] = kNone;
  // The cohort count lives in the node; a pass-all receiver never wrote it.
  if (!root(p) && status(own(p)).is(StatusKind::Cohort)) f_.count[p] = static_cast<std::uint8_t>(status(own(p)).count());
  if (f_.mode == Mode::Release && !root(p) && f_.count[p] >= cfg_.passing_threshold) {
    if (cfg_.mutation == Mutation::ReorderRelease) {
      f_.reorder_pos = static_cast<std::uint8_t>(p);
      f_.phase = Phase::Down;
      f_.pc = Pc::TailCas;
      return;
    }
    up(p + 1);
    return;
  }
  f_.pc = Pc::PassReadNext;
}

void Stepper::down(int p) {
  while (p >= 0 && f_.reorder_pos == p) --p;
  if (p < 0) {
    finish();
    return;
  }
  f_.phase = Phase::Down;
  f_.pos = static_cast<std::uint8_t>(p);
  f_.pc = Pc::TailCas;
}

void Stepper::complete(std::size_t p) {
  f_.cur[p] = kNone;
  f_.chain[p] = kNone;
  f_.tmp = kNone;
  if (f_.reorder_pos == p) {
    up(p + 1);
  } else {
    down(static_cast<int>(p) - 1);
  }
}

// No successor during horizontal passing.
void Stepper::after_pass(std::size_t p) {
  if (root(p) || (f_.mode == Mode::Abort && p + 1 == f_.abort_pos)) {
    down(static_cast<int>(p));
  } else {
    up(p + 1);
  }
}

void Stepper::begin_cleanup(std::size_t p) {
  const NodeId c = f_.chain[p];
  if (c == kNone) {
    complete(p);
  } else {
    f_.pc = c == own(p) ? Pc::CleanupWrite : Pc::CleanupRead;
  }
}

void Stepper::finish() {
  if (f_.held != 0) illegal("round ends with locks held");
  event(EventKind::RoundEnd, 0);
  ++f_.round;
  f_.mode = Mode::Release;
  f_.phase = Phase::Up;
  f_.abort_pos = kNone;
  f_.reorder_pos = kNone;
  f_.spin_value = 0;
  f_.tmp = kNone;
  f_.cur.fill(kNone);
  f_.chain.fill(kNone);
  f_.count.fill(0);
  f_.pos = 0;
  const auto rounds = cfg_.threads[t_].rounds;
  f_.pc = f_.round < rounds ? Pc::AcqSwapStatus : Pc::Done;
}

void Stepper::acq_swap_status() {
  const std::size_t p = f_.pos;
  const NodeId q = own(p);
  event(EventKind::BeginLevel, level(p));
  const auto old_v = status(q);
  write_status(q, StatusValue::wait(), Actor::Self, EdgeKind::BeginAcquisition);
  if (!old_v.is(StatusKind::Recycled) && !next(q).is(NextKind::Null)) {
    // Re-acquire attempt on a node still in use: next is left alone.
    label(q, Field::Next, s_.nodes[q].next, s_.nodes[q].next, Actor::Self, EdgeKind::BeginAcquisition);
  }
  f_.spin_value = StatusValue::wait().encode();
  switch (old_v.kind()) {
    case StatusKind::Abandoned:
      f_.pc = Pc::Spin;
      break;
    case StatusKind::Recycled:
      f_.pc = Pc::AcqResetNext;
      break;
    case StatusKind::Cohort:
      if (old_v.is_cohort_start() && !root(p)) {
        f_.pc = Pc::AcqInheritWrite;
        break;
      }
      f_.pc = Pc::AwaitRecycle;
      break;
    case StatusKind::Wait:
      illegal("node already waiting");
    default:
      f_.pc = Pc::AwaitRecycle;
  }
}

void Stepper::await_recycle(Choice c) {
  const std::size_t p = f_.pos;
  const NodeId q = own(p);
  const auto cur = status(q);
  if (c == Choice::Proceed) {
    if (!cur.is(StatusKind::Recycled)) illegal("proceed before recycle");
    f_.spin_value = cur.encode();
    f_.pc = Pc::AcqResetNext;
    return;
  }
  f_.timed_out = true;
  const auto back = root(p) ? StatusValue::unlocked_root() : StatusValue::parent_prefix();
  if (cur.is(StatusKind::Wait)) {
    write_status(q, back, Actor::Self, EdgeKind::Timeout);
    abandon(p);
  } else if (cur.is(StatusKind::Recycled)) {
    f_.spin_value = cur.encode();
    f_.pc = Pc::AcqResetNext;
  } else if (cur == back) {
    // An impatient walker already left the parent-prefix mark.
    label(q, Field::Status, cur.encode(), cur.encode(), Actor::Self, EdgeKind::Timeout);
    abandon(p);
  } else {
    illegal("unexpected status " + cur.to_string() + " while awaiting recycle");
  }
}

void Stepper::acq_link_pred() {
  const std::size_t p = f_.pos;
  const NodeId pred = f_.tmp;
  const auto old_v = next(pred);
  write_next(pred, NextValue::successor(own(p)), Actor::Successor, EdgeKind::Normal);
  if (old_v.is(NextKind::ImpatienceMark)) {
    f_.pc = Pc::AcqRecyclePred;
  } else if (old_v.is(NextKind::Null)) {
    f_.tmp = kNone;
    f_.pc = Pc::Spin;
  } else {
    illegal("predecessor already linked");
  }
}

void Stepper::acq_own() {
  const std::size_t p = f_.pos;
  const NodeId q = own(p);
  f_.tmp = kNone;
  f_.held |= bit(p);
  if (root(p)) {
    write_status(q, StatusValue::unlocked_root(), Actor::Self, EdgeKind::Normal);
  } else {
    write_status(q, StatusValue::cohort(1), Actor::Self, EdgeKind::Normal);
    f_.count[p] = 1;
  }
  ascend();
}

void Stepper::grant(StatusValue v) {
  const std::size_t p = f_.pos;
  if (v.is(StatusKind::UnlockedRoot)) {
    f_.held |= bit(p);
    ascend();
  } else if (v.is_pass_all()) {
    for (std::size_t i = p; i <= top_pos(); ++i) {
      if (i < real_len() || topo_.has_abstract_top()) f_.held |= bit(i);
    }
    f_.count[p] = static_cast<std::uint8_t>(v.count());
    enter_cs();
  } else {
    f_.held |= bit(p);
    f_.pc = Pc::AcqBeginCohort;
  }
}

void Stepper::spin(Choice c) {
  const std::size_t p = f_.pos;
  const NodeId q = own(p);
  const auto cur = status(q);
  if (c == Choice::Proceed) {
    if (!is_grant(cur, root(p))) illegal("proceed without a grant");
    grant(cur);
    return;
  }
  f_.timed_out = true;
  if (cur.encode() == f_.spin_value) {
    write_status(q, StatusValue::abandoned(), Actor::Self, EdgeKind::Timeout);
    abandon(p);
  } else if (is_grant(cur, root(p))) {
    grant(cur);
  } else {
    illegal("unexpected status " + cur.to_string() + " while spinning");
  }
}

void Stepper::abstract_top(Choice c) {
  const std::size_t p = f_.pos;
  event(EventKind::BeginLevel, level(p));
  if (c == Choice::Proceed) {
    f_.held |= bit(p);
    enter_cs();
  } else {
    f_.timed_out = true;
    abandon(p);
  }
}

void Stepper::walk_to(std::size_t p, NodeId succ) {
  f_.chain[p] = f_.cur[p];
  f_.cur[p] = succ;
  f_.tmp = kNone;
  f_.pc = f_.phase == Phase::Up ? Pc::PassReadNext : Pc::TailCas;
}

void Stepper::handoff(std::size_t p) {
  if (f_.phase == Phase::Up) {
    const std::size_t hi = f_.mode == Mode::Abort ? f_.abort_pos : top_pos() + 1;
    for (std::size_t i = hi; i-- > p;) {
      if (f_.held & bit(i)) {
        f_.held &= static_cast<std::uint8_t>(~bit(i));
        event(EventKind::Delegate, level(i));
      }
    }
  } else {
    f_.held &= static_cast<std::uint8_t>(~bit(p));
    event(EventKind::Release, level(p));
  }
  f_.tmp = kNone;
  f_.pc = Pc::Recycle;
}

void Stepper::swap_succ() {
  const std::size_t p = f_.pos;
  const NodeId succ = f_.tmp;
  const auto old_v = status(succ);
  if (cfg_.mutation != Mutation::NoTimeoutNoPass) {
    write_status(succ, pass_value(p), Actor::Predecessor, EdgeKind::Normal);
  }
  if (old_v.is(StatusKind::Abandoned)) {
    if (f_.cur[p] == own(p)) {
      walk_to(p, succ);
    } else {
      f_.pc = Pc::MarkChain;
    }
  } else {
    handoff(p);
  }
}

void Stepper::tail_cas() {
  const std::size_t p = f_.pos;
  const NodeId c = f_.cur[p];
  auto& tail = s_.tails[at(p).lock];
  if (tail == c) {
    if (cfg_.mutation != Mutation::SkipTailCas) tail = kNone;
    if (!next(c).is(NextKind::Null)) illegal("tail node has a successor");
    label(c, Field::Next, s_.nodes[c].next, s_.nodes[c].next, Actor::Predecessor, EdgeKind::Normal);
    f_.held &= static_cast<std::uint8_t>(~bit(p));
    event(EventKind::Release, level(p));
    f_.pc = Pc::Recycle;
  } else {
    f_.pc = Pc::AwaitNext;
  }
}

// Impatient release: mark next and, below the root, leave a parent-prefix
// status in the same atomic step.
void Stepper::impatient(std::size_t p, NodeId c) {
  write_next(c, NextValue::impatience(), Actor::Predecessor, EdgeKind::Timeout);
  const auto st = status(c);
  if (root(p)) {
    if (st.is(StatusKind::UnlockedRoot)) {
      label(c, Field::Status, st.encode(), st.encode(), Actor::Predecessor, EdgeKind::Timeout);
    }
  } else if (st.is(StatusKind::Cohort) || st.is(StatusKind::Wait)) {
    write_status(c, StatusValue::parent_prefix(), Actor::Predecessor, EdgeKind::Timeout);
  }
  f_.held &= static_cast<std::uint8_t>(~bit(p));
  event(EventKind::Release, level(p));
  begin_cleanup(p);
}

void Stepper::await_next(Choice c) {
  const std::size_t p = f_.pos;
  const NodeId n = f_.cur[p];
  const auto nx = next(n);
  if (c == Choice::Proceed) {
    if (!nx.is(NextKind::Successor)) illegal("proceed without a successor");
    f_.tmp = *nx.node();
    f_.pc = Pc::SwapSucc;
    return;
  }
  f_.timed_out = true;
  if (nx.is(NextKind::Null)) {
    if (cfg_.mutation == Mutation::NoImpatienceMark) {
      f_.held &= static_cast<std::uint8_t>(~bit(p));
      event(EventKind::Release, level(p));
      begin_cleanup(p);
      return;
    }
    impatient(p, n);
  } else if (nx.is(NextKind::Successor)) {
    f_.tmp = *nx.node();
    f_.pc = Pc::SwapSucc;
  } else {
    illegal("unexpected next " + nx.to_string());
  }
}

void Stepper::cleanup_write() {
  const std::size_t p = f_.pos;
  const NodeId n = f_.chain[p];
  write_status(n, StatusValue::recycled(), Actor::Predecessor, EdgeKind::Normal);
  if (n == own(p)) {
    complete(p);
    return;
  }
  f_.chain[p] = f_.tmp;
  f_.tmp = kNone;
  if (f_.chain[p] == kNone) illegal("broken predecessor chain");
  f_.pc = f_.chain[p] == own(p) ? Pc::CleanupWrite : Pc::CleanupRead;
}

void Stepper::run(Choice c) {
  const bool waiting = f_.pc == Pc::Spin || f_.pc == Pc::AwaitRecycle || f_.pc == Pc::AwaitNext || f_.pc == Pc::AbstractTop;
  if (c == Choice::Timeout && (!waiting || !has_timeouts(cfg_))) illegal("timeout not possible here");
  const std::size_t p = f_.pos;
  switch (f_.pc) {
    case Pc::AcqSwapStatus:
      acq_swap_status();
      break;
    case Pc::AcqInheritWrite:
      write_status(own(p), StatusValue::cohort(1), Actor::Self, EdgeKind::Normal);
      f_.held |= bit(p);
      f_.count[p] = 1;
      ascend();
      break;
    case Pc::AwaitRecycle:
      await_recycle(c);
      break;
    case Pc::AcqResetNext:
      write_next(own(p), NextValue::null(), Actor::Self, EdgeKind::BeginAcquisition);
      f_.pc = Pc::AcqSwapTail;
      break;
    case Pc::AcqSwapTail: {
      auto& tail = s_.tails[at(p).lock];
      const NodeId pred = tail;
      tail = own(p);
      if (pred == kNone) {
        f_.pc = Pc::AcqOwnNoPred;
      } else {
        f_.tmp = pred;
        f_.pc = Pc::AcqLinkPred;
      }
      break;
    }
    case Pc::AcqLinkPred:
      acq_link_pred();
      break;
    case Pc::AcqRecyclePred:
      write_status(f_.tmp, StatusValue::recycled(), Actor::Successor, EdgeKind::Normal);
      f_.pc = Pc::AcqOwnNoPred;
      break;
    case Pc::AcqOwnNoPred:
      acq_own();
      break;
    case Pc::Spin:
      spin(c);
      break;
    case Pc::AcqBeginCohort:
      write_status(own(p), StatusValue::cohort(1), Actor::Self, EdgeKind::Normal);
      f_.count[p] = 1;
      ascend();
      break;
    case Pc::AbstractTop:
      abstract_top(c);
      break;
    case Pc::InCs:
      f_.mode = Mode::Release;
      up(0);
      break;
    case Pc::PassReadNext: {
      const auto nx = next(f_.cur[p]);
      if (nx.is(NextKind::Successor)) {
        f_.tmp = *nx.node();
        f_.pc = Pc::SwapSucc;
      } else {
        after_pass(p);
      }
      break;
    }
    case Pc::SwapSucc:
      swap_succ();
      break;
    case Pc::MarkChain: {
      const NodeId c_node = f_.cur[p];
      write_next(c_node, NextValue::predecessor_mark(f_.chain[p]), Actor::Predecessor, EdgeKind::Normal);
      walk_to(p, f_.tmp);
      break;
    }
    case Pc::Recycle: {
      const NodeId c_node = f_.cur[p];
      if (!(cfg_.mutation == Mutation::DropRecycleWrite && c_node == own(p))) {
        write_status(c_node, StatusValue::recycled(), Actor::Predecessor, EdgeKind::Normal);
      }
      begin_cleanup(p);
      break;
    }
    case Pc::CleanupRead: {
      const auto nx = next(f_.chain[p]);
      if (!nx.is(NextKind::PredecessorMark)) illegal("chain node lost its predecessor mark");
      f_.tmp = *nx.node();
      f_.pc = Pc::CleanupWrite;
      break;
    }
    case Pc::CleanupWrite:
      cleanup_write();
      break;
    case Pc::TailCas:
      tail_cas();
      break;
    case Pc::AwaitNext:
      await_next(c);
      break;
    case Pc::Done:
      illegal("thread has finished");
  }
}

}  // namespace

std::vector<Choice> Protocol::enabled_choices(const GlobalState& s, ThreadId t) const {
  if (t >= topo_.thread_count()) throw UnknownThread("unknown thread " + std::to_string(t));
  const auto& f = s.frames[t];
  const bool timeouts = has_timeouts(config_);
  std::vector<Choice> out;
  auto offer = [&](bool proceed) {
    if (proceed) out.push_back(Choice::Proceed);
    if (timeouts) out.push_back(Choice::Timeout);
  };
  switch (f.pc) {
    case Pc::Done:
      break;
    case Pc::Spin: {
      const auto& ps = topo_.path(t)[f.pos];
      offer(is_grant(s.status(ps.node), ps.is_root));
      break;
    }
    case Pc::AwaitRecycle:
      offer(s.status(topo_.path(t)[f.pos].node).is(StatusKind::Recycled));
      break;
    case Pc::AwaitNext:
      offer(s.next(f.cur[f.pos]).is(NextKind::Successor));
      break;
    case Pc::AbstractTop:
      offer(true);
      break;
    default:
      out.push_back(Choice::Proceed);
  }
  return out;
}

void Protocol::apply_step(GlobalState& s, ThreadId t, Choice c, std::vector<ActionLabel>& labels,
                          std::vector<ProtocolEvent>& events) const {
  if (t >= topo_.thread_count()) throw UnknownThread("unknown thread " + std::to_string(t));
  Stepper(*this, s, t, labels, events).run(c);
}

StepResult Protocol::step(const GlobalState& s, ThreadId t, Choice c) const {
  StepResult r{s, {}, {}};
  apply_step(r.state, t, c, r.labels, r.events);
  return r;
}

std::string Protocol::describe(const GlobalState& s) const {
  std::ostringstream out;
  for (std::size_t n = 0; n < s.node_count; ++n) {
    out << "node " << topo_.node_name(static_cast<NodeId>(n)) << " status=" << s.status(static_cast<NodeId>(n)).to_string()
        << " next=" << s.next(static_cast<NodeId>(n)).to_string() << '\n';
  }
  for (std::size_t l = 0; l < s.lock_count; ++l) {
    out << "lock " << l << " tail=";
    if (s.tails[l] == kNone) out << '-'; else out << topo_.node_name(s.tails[l]);
    out << '\n';
  }
  for (std::size_t t = 0; t < s.thread_count; ++t) {
    const auto& f = s.frames[t];
    out << "thread " << config_.threads[t].name << " pc=" << to_string(f.pc) << " pos=" << unsigned(f.pos)
        << " round=" << unsigned(f.round) << " held=" << unsigned(f.held) << '\n';
  }
  return out.str();
}

}  // namespace hmcst
