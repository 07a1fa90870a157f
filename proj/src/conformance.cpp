#include "hmcst/conformance.hpp"

#include <algorithm>
#include <sstream>

namespace hmcst {

void Cursor::encode(std::string& out) const {
  out.push_back(static_cast<char>(candidates.size()));
  for (const auto& c : candidates) {
    out.push_back(static_cast<char>(c.state));
    out.push_back(static_cast<char>(c.pending.size()));
    for (auto e : c.pending) {
      out.push_back(static_cast<char>(e >> 8));
      out.push_back(static_cast<char>(e & 0xFF));
    }
  }
}

const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::NoSuchEdge: return "no-such-edge";
    case ViolationKind::WrongActor: return "wrong-actor";
    case ViolationKind::WrongKind: return "wrong-kind";
  }
  return "?";
}

Monitor::Monitor(Nfa nfa) : nfa_(std::move(nfa)), hits_(nfa_.edges().size(), 0) { nfa_.validate(); }

Cursor Monitor::start() const { return Cursor{{Candidate{static_cast<std::uint8_t>(nfa_.start()), {}}}}; }

std::optional<Violation> Monitor::observe(Cursor& cursor, const ActionLabel& label) {
  const auto& states = nfa_.states();
  const auto& edges = nfa_.edges();
  const Field field = nfa_.cell();

  std::vector<Candidate> out;
  bool value_ok = false;
  bool actor_ok = false;
  for (const auto& c : cursor.candidates) {
    if (!matches(states[c.state].value, field, label.old_value)) continue;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& e = edges[i];
      if (e.from != c.state || !matches(states[e.to].value, field, label.new_value)) continue;
      value_ok = true;
      if (e.actor != label.actor) continue;
      actor_ok = true;
      if (e.kind != label.kind) continue;
      Candidate next = c;
      next.pending.push_back(static_cast<std::uint16_t>(i));
      next.state = static_cast<std::uint8_t>(e.to);
      out.push_back(std::move(next));
    }
  }
  if (out.empty()) {
    Violation v;
    v.kind = !value_ok ? ViolationKind::NoSuchEdge : !actor_ok ? ViolationKind::WrongActor : ViolationKind::WrongKind;
    v.label = label;
    std::string from;
    for (const auto& name : state_names(cursor)) from += (from.empty() ? "" : "|") + name;
    v.detail = nfa_.name() + ": " + to_string(v.kind) + " from {" + from + "} for " + label.to_string();
    return v;
  }

  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());

  // Commit the pending prefix shared by every candidate.
  std::size_t common = out.front().pending.size();
  for (const auto& c : out) {
    common = std::min(common, c.pending.size());
    for (std::size_t i = 0; i < common; ++i) {
      if (c.pending[i] != out.front().pending[i]) {
        common = i;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < common; ++i) ++hits_[out.front().pending[i]];
  if (common > 0) {
    for (auto& c : out) c.pending.erase(c.pending.begin(), c.pending.begin() + static_cast<std::ptrdiff_t>(common));
  }
  cursor.candidates = std::move(out);
  return std::nullopt;
}

bool Monitor::at_accept(const Cursor& cursor) const {
  return std::all_of(cursor.candidates.begin(), cursor.candidates.end(),
                     [&](const Candidate& c) { return nfa_.states()[c.state].is_accept; });
}

std::vector<std::string> Monitor::state_names(const Cursor& cursor) const {
  std::vector<std::string> out;
  for (const auto& c : cursor.candidates) out.push_back(nfa_.states()[c.state].name);
  return out;
}

std::vector<std::pair<std::string, std::uint64_t>> Monitor::coverage() const {
  std::vector<std::pair<std::string, std::uint64_t>> out;
  for (std::size_t i = 0; i < hits_.size(); ++i) out.emplace_back(nfa_.edge_name(i), hits_[i]);
  return out;
}

std::size_t Monitor::covered() const {
  return static_cast<std::size_t>(std::count_if(hits_.begin(), hits_.end(), [](auto h) { return h > 0; }));
}

std::size_t Monitor::published_covered() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < hits_.size(); ++i) n += !nfa_.edges()[i].extension && hits_[i] > 0;
  return n;
}

std::size_t Monitor::published_total() const {
  return static_cast<std::size_t>(
      std::count_if(nfa_.edges().begin(), nfa_.edges().end(), [](const NfaEdge& e) { return !e.extension; }));
}

std::vector<std::string> Monitor::uncovered() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < hits_.size(); ++i) {
    if (hits_[i] == 0) out.push_back(nfa_.edge_name(i));
  }
  return out;
}

void Monitor::merge(const Monitor& other) {
  for (std::size_t i = 0; i < hits_.size() && i < other.hits_.size(); ++i) hits_[i] += other.hits_[i];
}

Conformance::Conformance(const Topology& topo)
    : topo_(&topo),
      actors_(topo),
      root_(build_root_status_nfa()),
      nonroot_(build_nonroot_status_nfa()),
      next_(build_next_nfa()) {}

Monitor& Conformance::status_monitor(NodeId n) { return topo_->node_is_root(n) ? root_ : nonroot_; }
const Monitor& Conformance::status_monitor(NodeId n) const { return topo_->node_is_root(n) ? root_ : nonroot_; }

std::vector<Cursor> Conformance::initial_cursors() const {
  std::vector<Cursor> out;
  const auto n = topo_->node_count();
  for (std::size_t i = 0; i < n; ++i) out.push_back(status_monitor(static_cast<NodeId>(i)).start());
  for (std::size_t i = 0; i < n; ++i) out.push_back(next_.start());
  return out;
}

std::optional<Violation> Conformance::observe(std::vector<Cursor>& cursors, const ActionLabel& label) {
  if (!actors_.consistent(label)) {
    return Violation{ViolationKind::WrongActor, label, "actor does not match node ownership for " + label.to_string()};
  }
  const auto n = topo_->node_count();
  if (label.field == Field::Status) return status_monitor(label.node).observe(cursors.at(label.node), label);
  return next_.observe(cursors.at(n + label.node), label);
}

bool Conformance::quiescent(const std::vector<Cursor>& cursors, std::string* why) const {
  const auto n = topo_->node_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = status_monitor(static_cast<NodeId>(i));
    if (!m.at_accept(cursors[i])) {
      if (why) *why = "status monitor of " + topo_->node_name(static_cast<NodeId>(i)) + " not at start";
      return false;
    }
    // A link left by the last successor or walker stays until the next
    // acquisition resets it.
    for (const auto& name : next_.state_names(cursors[n + i])) {
      if (name != "0_1" && name != "S1" && name != "P1") {
        if (why) *why = "next monitor of " + topo_->node_name(static_cast<NodeId>(i)) + " in " + name;
        return false;
      }
    }
  }
  return true;
}

std::vector<const Monitor*> Conformance::active() const {
  bool any_root = false;
  bool any_nonroot = false;
  for (std::size_t i = 0; i < topo_->node_count(); ++i) {
    if (topo_->node_is_root(static_cast<NodeId>(i))) any_root = true; else any_nonroot = true;
  }
  std::vector<const Monitor*> out;
  if (any_root) out.push_back(&root_);
  if (any_nonroot) out.push_back(&nonroot_);
  out.push_back(&next_);
  return out;
}

void Conformance::merge(const Conformance& other) {
  root_.merge(other.root_);
  nonroot_.merge(other.nonroot_);
  next_.merge(other.next_);
}

std::string Conformance::coverage_report() const {
  std::ostringstream out;
  std::ostringstream kv;
  for (const auto* m : active()) {
    out << "coverage " << m->nfa().name() << ": " << m->covered() << "/" << m->total() << " edges\n";
    const auto cov = m->coverage();
    for (std::size_t i = 0; i < cov.size(); ++i) {
      const auto& [edge, hits] = cov[i];
      out << "  " << edge;
      for (std::size_t pad = edge.size(); pad < 40; ++pad) out << ' ';
      out << hits << (m->nfa().edges()[i].extension ? "  (extension)" : "") << '\n';
    }
    kv << "coverage." << m->nfa().name() << ".covered=" << m->covered() << '\n';
    kv << "coverage." << m->nfa().name() << ".total=" << m->total() << '\n';
    kv << "coverage." << m->nfa().name() << ".published_covered=" << m->published_covered() << '\n';
    kv << "coverage." << m->nfa().name() << ".published_total=" << m->published_total() << '\n';
  }
  return out.str() + kv.str();
}

}  // namespace hmcst
