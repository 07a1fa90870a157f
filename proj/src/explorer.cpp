#include "hmcst/explorer.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>

namespace hmcst {

Config root_config() {
  Config c;
  c.name = "root";
  c.locks = {LockSpec{1, kNone}};
  c.threads = {{"t", 0, 2}, {"p", 0, 1}, {"s", 0, 1}};
  c.top_mode = TopMode::RealRoot;
  return c;
}

Config nonroot_config() {
  Config c;
  c.name = "nonroot";
  c.locks = {LockSpec{1, 1}, LockSpec{2, kNone}};
  c.threads = {{"t1", 0, 1}, {"t2", 0, 1}, {"s", 1, 1}, {"p", 1, 1}};
  c.top_mode = TopMode::NondeterministicAbandon;
  return c;
}

std::optional<Config> preset(std::string_view name) {
  if (name == "root") return root_config();
  if (name == "nonroot") return nonroot_config();
  return std::nullopt;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    out.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

unsigned parse_uint(std::string_view s, const char* what) {
  unsigned v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw InvalidConfig(std::string("bad ") + what + ": '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

Config parse_config(std::string_view canonical) {
  Config c;
  bool seen_locks = false;
  bool seen_threads = false;
  for (auto field : split(canonical, ';')) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw InvalidConfig("config field without '='");
    const auto key = field.substr(0, eq);
    const auto val = field.substr(eq + 1);
    if (key == "name") {
      c.name = std::string(val);
    } else if (key == "top") {
      if (val == to_string(TopMode::RealRoot)) c.top_mode = TopMode::RealRoot;
      else if (val == to_string(TopMode::NondeterministicAbandon)) c.top_mode = TopMode::NondeterministicAbandon;
      else throw InvalidConfig("bad top mode");
    } else if (key == "threshold") {
      c.passing_threshold = parse_uint(val, "threshold");
    } else if (key == "mutation") {
      const auto m = mutation_from_string(val);
      if (!m) throw InvalidConfig("bad mutation");
      c.mutation = *m;
    } else if (key == "locks") {
      seen_locks = true;
      for (auto item : split(val, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) throw InvalidConfig("bad lock entry");
        LockSpec l;
        l.level = parse_uint(parts[0], "level");
        l.parent = parts[1] == "-" ? kNone : static_cast<LockId>(parse_uint(parts[1], "parent"));
        c.locks.push_back(l);
      }
    } else if (key == "threads") {
      seen_threads = true;
      for (auto item : split(val, ',')) {
        const auto at = item.find('@');
        const auto star = item.find('*');
        if (at == std::string_view::npos || star == std::string_view::npos || star < at) {
          throw InvalidConfig("bad thread entry");
        }
        ThreadSpec t;
        t.name = std::string(item.substr(0, at));
        t.entry = static_cast<LockId>(parse_uint(item.substr(at + 1, star - at - 1), "entry"));
        t.rounds = parse_uint(item.substr(star + 1), "rounds");
        c.threads.push_back(t);
      }
    } else {
      throw InvalidConfig("unknown config field '" + std::string(key) + "'");
    }
  }
  if (!seen_locks || !seen_threads) throw InvalidConfig("config lacks locks or threads");
  Topology check(c);
  return c;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

Trace make_trace(const Config& config, std::vector<TraceStep> steps) {
  return Trace{config.digest(), config.canonical(), std::move(steps)};
}

std::string write_trace(const Trace& trace) {
  std::string out = "hmcst-trace-v1\ndigest " + digest_hex(trace.digest) + " " + trace.config + "\n";
  for (const auto& s : trace.steps) {
    out += "(" + std::to_string(s.thread) + "," + to_string(s.choice) + ")\n";
  }
  return out;
}

Trace parse_trace(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "hmcst-trace-v1") throw MalformedTrace("missing trace header");
  if (!std::getline(in, line) || line.rfind("digest ", 0) != 0) throw MalformedTrace("missing digest line");
  Trace t;
  const auto rest = std::string_view(line).substr(7);
  const auto sp = rest.find(' ');
  const auto hex = rest.substr(0, sp);
  if (hex.size() != 16) throw MalformedTrace("bad digest");
  const auto [p, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), t.digest, 16);
  if (ec != std::errc() || p != hex.data() + hex.size()) throw MalformedTrace("bad digest");
  if (sp == std::string_view::npos) throw MalformedTrace("digest line lacks config");
  t.config = std::string(rest.substr(sp + 1));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.size() < 5 || line.front() != '(' || line.back() != ')') throw MalformedTrace("bad step line: " + line);
    const auto body = std::string_view(line).substr(1, line.size() - 2);
    const auto comma = body.find(',');
    if (comma == std::string_view::npos) throw MalformedTrace("bad step line: " + line);
    unsigned tid = 0;
    const auto ts = body.substr(0, comma);
    const auto [q, ec2] = std::from_chars(ts.data(), ts.data() + ts.size(), tid);
    if (ec2 != std::errc() || q != ts.data() + ts.size() || tid >= kMaxThreads) throw MalformedTrace("bad thread id: " + line);
    const auto cs = body.substr(comma + 1);
    TraceStep step{static_cast<ThreadId>(tid), Choice::Proceed};
    if (cs == "timeout") step.choice = Choice::Timeout;
    else if (cs != "proceed") throw MalformedTrace("bad choice: " + line);
    t.steps.push_back(step);
  }
  return t;
}

const char* to_string(FindingKind k) {
  switch (k) {
    case FindingKind::MutualExclusion: return "mutual-exclusion";
    case FindingKind::Deadlock: return "deadlock";
    case FindingKind::Conformance: return "conformance";
    case FindingKind::NonQuiescent: return "non-quiescent";
    case FindingKind::Starvation: return "starvation";
    case FindingKind::AcquisitionOrder: return "acquisition-order";
    case FindingKind::ReleaseOrder: return "release-order";
    case FindingKind::ProtocolFault: return "protocol-fault";
  }
  return "?";
}

void SearchState::encode(std::string& out) const {
  proto.encode(out);
  for (const auto& c : cursors) c.encode(out);
  for (std::size_t t = 0; t < proto.thread_count; ++t) {
    out.push_back(static_cast<char>(order[t].acq_last));
    out.push_back(static_cast<char>(order[t].rel_last));
    out.push_back(static_cast<char>(order[t].rel_falling));
  }
}

std::string SearchState::encode() const {
  std::string out;
  encode(out);
  return out;
}

std::optional<std::string> assert_mutual_exclusion(const Protocol& p, const GlobalState& s) {
  std::vector<ThreadId> in_cs;
  for (std::size_t t = 0; t < s.thread_count; ++t) {
    if (p.in_cs(s, static_cast<ThreadId>(t))) in_cs.push_back(static_cast<ThreadId>(t));
  }
  const auto& names = p.config().threads;
  if (in_cs.size() > 1) {
    return "threads " + names[in_cs[0]].name + " and " + names[in_cs[1]].name + " both in the critical section";
  }
  const auto holders = p.holders(s);
  for (std::size_t l = 0; l < holders.size(); ++l) {
    if (holders[l].size() > 1) {
      const bool top = l == p.topology().abstract_lock();
      const auto lvl = top ? p.topology().abstract_level() : p.config().locks[l].level;
      return "threads " + names[holders[l][0]].name + " and " + names[holders[l][1]].name + " both hold lock " +
             (top ? std::string("top") : std::to_string(l)) + " at level " + std::to_string(lvl);
    }
  }
  return std::nullopt;
}

std::optional<std::string> assert_no_deadlock(const Protocol& p, const GlobalState& s) {
  if (p.all_done(s)) return std::nullopt;
  for (std::size_t t = 0; t < s.thread_count; ++t) {
    if (!p.enabled_choices(s, static_cast<ThreadId>(t)).empty()) return std::nullopt;
  }
  return "no thread can move:\n" + p.describe(s);
}

std::optional<std::string> assert_quiescent(const Protocol& p, const GlobalState& s) {
  const auto& topo = p.topology();
  for (std::size_t n = 0; n < s.node_count; ++n) {
    const auto id = static_cast<NodeId>(n);
    if (!s.status(id).is(StatusKind::Recycled)) {
      return "node " + topo.node_name(id) + " left with status " + s.status(id).to_string();
    }
    if (s.next(id).is(NextKind::ImpatienceMark)) return "node " + topo.node_name(id) + " left with an impatience mark";
  }
  for (std::size_t l = 0; l < s.lock_count; ++l) {
    if (s.tails[l] != kNone) return "lock " + std::to_string(l) + " tail not empty";
  }
  return std::nullopt;
}

std::optional<std::string> assert_no_starvation(const Protocol& p, const GlobalState& s) {
  for (std::size_t t = 0; t < s.thread_count; ++t) {
    const auto& f = s.frames[t];
    const auto rounds = p.config().threads[t].rounds;
    if (f.pc == Pc::Done && !f.timed_out && f.cs_entries != rounds) {
      return "thread " + p.config().threads[t].name + " never timed out yet entered the critical section " +
             std::to_string(f.cs_entries) + " of " + std::to_string(rounds) + " times";
    }
  }
  return std::nullopt;
}

Model::Model(const Config& config) : protocol_(config), conformance_(protocol_.topology()) {}

SearchState Model::initial() const {
  SearchState s;
  s.proto = protocol_.initial_state();
  s.cursors = conformance_.initial_cursors();
  return s;
}

std::vector<TraceStep> Model::enabled(const SearchState& s) const {
  std::vector<TraceStep> out;
  for (std::size_t t = 0; t < s.proto.thread_count; ++t) {
    for (auto c : protocol_.enabled_choices(s.proto, static_cast<ThreadId>(t))) {
      out.push_back({static_cast<ThreadId>(t), c});
    }
  }
  return out;
}

std::optional<Finding> Model::check_events(SearchState& s, const std::vector<ProtocolEvent>& events) const {
  for (const auto& e : events) {
    auto& g = s.order[e.thread];
    const auto& name = protocol_.config().threads[e.thread].name;
    const auto lvl = static_cast<std::uint8_t>(e.level);
    switch (e.kind) {
      case EventKind::BeginLevel:
        if (lvl <= g.acq_last) {
          return Finding{FindingKind::AcquisitionOrder,
                         name + " began level " + std::to_string(lvl) + " after level " + std::to_string(g.acq_last), {}};
        }
        g.acq_last = lvl;
        break;
      case EventKind::Abandon:
      case EventKind::Delegate:
      case EventKind::Release:
        if (g.rel_last != 0 && (lvl == g.rel_last || (lvl > g.rel_last && g.rel_falling))) {
          return Finding{FindingKind::ReleaseOrder,
                         name + " " + to_string(e.kind) + " at level " + std::to_string(lvl) + " breaks bitonic order", {}};
        }
        if (g.rel_last != 0 && lvl < g.rel_last) g.rel_falling = true;
        g.rel_last = lvl;
        break;
      case EventKind::RoundEnd:
        g = OrderGhost{};
        break;
      case EventKind::EnterCs:
        break;
    }
  }
  return std::nullopt;
}

std::optional<Finding> Model::advance(SearchState& s, TraceStep step, std::vector<ActionLabel>* labels_out,
                                      std::vector<ProtocolEvent>* events_out) {
  std::vector<ActionLabel> labels;
  std::vector<ProtocolEvent> events;
  try {
    protocol_.apply_step(s.proto, step.thread, step.choice, labels, events);
  } catch (const IllegalStep& e) {
    return Finding{FindingKind::ProtocolFault, e.what(), {}};
  } catch (const std::invalid_argument& e) {
    // A broken protocol can read a value that has no meaning for the field.
    return Finding{FindingKind::ProtocolFault, std::string("invalid value: ") + e.what(), {}};
  }
  if (labels_out) *labels_out = labels;
  if (events_out) *events_out = events;
  for (const auto& l : labels) {
    if (auto v = conformance_.observe(s.cursors, l)) return Finding{FindingKind::Conformance, v->detail, {}};
  }
  return check_events(s, events);
}

std::optional<Finding> Model::check_state(const SearchState& s) const {
  if (auto m = assert_mutual_exclusion(protocol_, s.proto)) return Finding{FindingKind::MutualExclusion, *m, {}};
  if (auto d = assert_no_deadlock(protocol_, s.proto)) return Finding{FindingKind::Deadlock, *d, {}};
  if (!terminal(s)) return std::nullopt;
  if (auto q = assert_quiescent(protocol_, s.proto)) return Finding{FindingKind::NonQuiescent, *q, {}};
  std::string why;
  if (!conformance_.quiescent(s.cursors, &why)) return Finding{FindingKind::NonQuiescent, why, {}};
  if (auto st = assert_no_starvation(protocol_, s.proto)) return Finding{FindingKind::Starvation, *st, {}};
  return std::nullopt;
}

namespace {

bool complete(const std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>>& table,
              const std::string& nfa) {
  for (const auto& [name, ct] : table) {
    if (name == nfa) return ct.first == ct.second;
  }
  return false;
}

}  // namespace

bool ExplorationReport::full_coverage(const std::string& nfa) const { return complete(coverage, nfa); }

bool ExplorationReport::full_published_coverage(const std::string& nfa) const {
  return complete(published_coverage, nfa);
}

std::string ExplorationReport::text() const {
  std::ostringstream out;
  out << "config " << config_name << "\n";
  out << "digest " << digest_hex(digest) << "\n";
  out << "states " << states << "\n";
  out << "protocol-states " << protocol_states << "\n";
  out << "transitions " << transitions << "\n";
  out << "max-depth " << max_depth << "\n";
  out << "terminal-states " << terminal_states << "\n";
  out << "violations " << violations.size() << "\n";
  for (const auto& v : violations) {
    out << "  " << to_string(v.kind) << ": " << v.detail << " (trace length " << v.trace.steps.size() << ")\n";
  }
  out << coverage_table;
  return out.str();
}

namespace {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Exact visited set: keys live back to back in fixed-size blocks and an
// open-addressed table holds (hash, reference) pairs.
class StateSet {
 public:
  bool insert(std::string_view key) {
    if ((size_ + 1) * 2 > slots_.size()) grow();
    const auto h = fnv1a(key) | 1u;
    for (std::size_t i = h & (slots_.size() - 1);; i = (i + 1) & (slots_.size() - 1)) {
      auto& slot = slots_[i];
      if (slot.hash == 0) {
        slot = {h, store(key)};
        ++size_;
        return true;
      }
      if (slot.hash == h && load(slot.ref) == key) return false;
    }
  }
  std::size_t size() const { return size_; }

 private:
  struct Slot {
    std::uint64_t hash = 0;
    std::uint64_t ref = 0;
  };
  static constexpr std::size_t kBlock = std::size_t{1} << 22;
  std::vector<std::unique_ptr<char[]>> blocks_;
  std::size_t used_ = kBlock;
  std::vector<Slot> slots_ = std::vector<Slot>(1024);
  std::size_t size_ = 0;

  std::uint64_t store(std::string_view key) {
    const std::size_t need = key.size() + 2;
    if (used_ + need > kBlock) {
      blocks_.push_back(std::make_unique<char[]>(kBlock));
      used_ = 0;
    }
    char* at = blocks_.back().get() + used_;
    at[0] = static_cast<char>(key.size() >> 8);
    at[1] = static_cast<char>(key.size() & 0xFF);
    std::memcpy(at + 2, key.data(), key.size());
    const std::uint64_t ref = (blocks_.size() - 1) * kBlock + used_;
    used_ += need;
    return ref;
  }
  std::string_view load(std::uint64_t ref) const {
    const char* at = blocks_[ref / kBlock].get() + ref % kBlock;
    const std::size_t len = (static_cast<unsigned char>(at[0]) << 8) | static_cast<unsigned char>(at[1]);
    return {at + 2, len};
  }
  void grow() {
    std::vector<Slot> old(slots_.size() * 2);
    old.swap(slots_);
    for (const auto& slot : old) {
      if (slot.hash == 0) continue;
      std::size_t i = slot.hash & (slots_.size() - 1);
      while (slots_[i].hash != 0) i = (i + 1) & (slots_.size() - 1);
      slots_[i] = slot;
    }
  }
};

// Distinct protocol states, counted by 64-bit digest.
class DigestSet {
 public:
  void insert(std::string_view key) {
    if ((size_ + 1) * 2 > slots_.size()) grow();
    const auto h = fnv1a(key) | 1u;
    std::size_t i = h & (slots_.size() - 1);
    while (slots_[i] != 0) {
      if (slots_[i] == h) return;
      i = (i + 1) & (slots_.size() - 1);
    }
    slots_[i] = h;
    ++size_;
  }
  std::size_t size() const { return size_; }

 private:
  std::vector<std::uint64_t> slots_ = std::vector<std::uint64_t>(1024);
  std::size_t size_ = 0;
  void grow() {
    std::vector<std::uint64_t> old(slots_.size() * 2);
    old.swap(slots_);
    for (auto h : old) {
      if (h == 0) continue;
      std::size_t i = h & (slots_.size() - 1);
      while (slots_[i] != 0) i = (i + 1) & (slots_.size() - 1);
      slots_[i] = h;
    }
  }
};

}  // namespace

ExplorationReport explore(const Config& config, const ExploreOptions& options) {
  Model model(config);
  ExplorationReport report;
  report.config_name = config.name;
  report.digest = config.digest();

  struct Frame {
    SearchState state;
    std::vector<TraceStep> moves;
    std::size_t next = 0;
  };
  StateSet visited;
  DigestSet proto_seen;
  std::vector<Frame> stack;
  std::vector<TraceStep> path;

  auto record = [&](Finding f) {
    f.trace = make_trace(config, path);
    report.violations.push_back(std::move(f));
  };

  SearchState init = model.initial();
  visited.insert(init.encode());
  proto_seen.insert(init.proto.encode());
  if (auto f = model.check_state(init)) record(std::move(*f));
  if (report.violations.empty() || !options.fail_fast) stack.push_back({init, model.enabled(init), 0});

  std::string key;
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.next == top.moves.size()) {
      stack.pop_back();
      if (!path.empty()) path.pop_back();
      continue;
    }
    const TraceStep step = top.moves[top.next++];
    SearchState child = top.state;
    ++report.transitions;
    path.push_back(step);
    if (auto f = model.advance(child, step)) {
      record(std::move(*f));
      path.pop_back();
      if (options.fail_fast) break;
      continue;
    }
    key.clear();
    child.encode(key);
    if (!visited.insert(key)) {
      path.pop_back();
      continue;
    }
    if (visited.size() > options.state_cap) {
      throw ResourceBudgetExceeded("state cap of " + std::to_string(options.state_cap) + " reached for " + config.name);
    }
    key.clear();
    child.proto.encode(key);
    proto_seen.insert(key);
    if (model.terminal(child)) ++report.terminal_states;
    report.max_depth = std::max<std::uint64_t>(report.max_depth, path.size());
    if (auto f = model.check_state(child)) {
      record(std::move(*f));
      path.pop_back();
      if (options.fail_fast) break;
      continue;
    }
    auto moves = model.enabled(child);
    stack.push_back({std::move(child), std::move(moves), 0});
  }

  report.states = visited.size();
  report.protocol_states = proto_seen.size();
  for (const auto* m : model.conformance().active()) {
    report.coverage.push_back({m->nfa().name(), {m->covered(), m->total()}});
    report.published_coverage.push_back({m->nfa().name(), {m->published_covered(), m->published_total()}});
  }
  report.coverage_table = model.conformance().coverage_report();
  return report;
}

ReplayResult replay(const Config& config, const Trace& trace) {
  if (config.digest() != trace.digest) {
    throw DigestMismatch("trace digest " + digest_hex(trace.digest) + " does not match config digest " +
                         digest_hex(config.digest()));
  }
  Model model(config);
  ReplayResult r;
  SearchState s = model.initial();
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto step = trace.steps[i];
    const auto en = model.enabled(s);
    if (std::find(en.begin(), en.end(), step) == en.end()) {
      throw MalformedTrace("step " + std::to_string(i) + " (" + std::to_string(step.thread) + "," +
                           to_string(step.choice) + ") is not enabled");
    }
    std::vector<ActionLabel> labels;
    std::vector<ProtocolEvent> events;
    auto f = model.advance(s, step, &labels, &events);
    r.labels.push_back(std::move(labels));
    r.events.insert(r.events.end(), events.begin(), events.end());
    if (!f) f = model.check_state(s);
    if (f) {
      f->trace = trace;
      f->trace.steps.resize(i + 1);
      r.violation = std::move(f);
      r.violation_step = i;
      break;
    }
  }
  r.final_state = s.proto;
  return r;
}

ReplayResult replay(const Trace& trace) { return replay(parse_config(trace.config), trace); }

std::vector<std::vector<unsigned>> acquisition_order_witness(const Trace& trace, ThreadId thread) {
  const auto r = replay(trace);
  std::vector<std::vector<unsigned>> out(1);
  for (const auto& e : r.events) {
    if (e.thread != thread) continue;
    if (e.kind == EventKind::BeginLevel) out.back().push_back(e.level);
    if (e.kind == EventKind::RoundEnd) out.emplace_back();
  }
  if (out.back().empty()) out.pop_back();
  return out;
}

std::vector<std::vector<std::pair<unsigned, EventKind>>> release_order_witness(const Trace& trace, ThreadId thread) {
  const auto r = replay(trace);
  std::vector<std::vector<std::pair<unsigned, EventKind>>> out(1);
  for (const auto& e : r.events) {
    if (e.thread != thread) continue;
    if (e.kind == EventKind::Abandon || e.kind == EventKind::Delegate || e.kind == EventKind::Release) {
      out.back().emplace_back(e.level, e.kind);
    }
    if (e.kind == EventKind::RoundEnd) out.emplace_back();
  }
  if (out.back().empty()) out.pop_back();
  return out;
}

bool strictly_increasing(const std::vector<unsigned>& levels) {
  return std::adjacent_find(levels.begin(), levels.end(), [](unsigned a, unsigned b) { return b <= a; }) == levels.end();
}

bool bitonic(const std::vector<unsigned>& levels) {
  std::size_t i = 1;
  while (i < levels.size() && levels[i] > levels[i - 1]) ++i;
  while (i < levels.size() && levels[i] < levels[i - 1]) ++i;
  return i >= levels.size();
}

}  // namespace hmcst
