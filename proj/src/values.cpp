#include "hmcst/values.hpp"

#include <stdexcept>

namespace hmcst {

StatusValue StatusValue::cohort(unsigned count) {
  if (count == 0 || count >= 0xFF) throw std::invalid_argument("cohort count out of range");
  return {StatusKind::Cohort, static_cast<std::uint8_t>(count)};
}

StatusValue StatusValue::decode(std::uint16_t raw) {
  const auto kind = static_cast<StatusKind>(raw >> 8);
  const auto count = static_cast<std::uint8_t>(raw & 0xFF);
  switch (kind) {
    case StatusKind::Cohort:
      return cohort(count);
    case StatusKind::Recycled:
    case StatusKind::Wait:
    case StatusKind::Abandoned:
    case StatusKind::UnlockedRoot:
    case StatusKind::ParentPrefix:
      if (count != 0) break;
      return {kind, 0};
  }
  throw std::invalid_argument("malformed status encoding");
}

std::string StatusValue::to_string() const {
  switch (kind_) {
    case StatusKind::Recycled: return "R";
    case StatusKind::Wait: return "W";
    case StatusKind::Abandoned: return "A";
    case StatusKind::UnlockedRoot: return "U";
    case StatusKind::Cohort: return count_ == 1 ? "C" : "V" + std::to_string(count_);
    case StatusKind::ParentPrefix: return "P";
  }
  return "?";
}

NextValue NextValue::successor(NodeId id) {
  if (id == kNone) throw std::invalid_argument("successor id reserved");
  return {NextKind::Successor, id};
}

NextValue NextValue::predecessor_mark(NodeId id) {
  if (id == kNone) throw std::invalid_argument("predecessor id reserved");
  return {NextKind::PredecessorMark, id};
}

std::optional<NodeId> NextValue::node() const {
  if (kind_ == NextKind::Successor || kind_ == NextKind::PredecessorMark) return id_;
  return std::nullopt;
}

NextValue NextValue::decode(std::uint16_t raw) {
  const auto kind = static_cast<NextKind>(raw >> 8);
  const auto id = static_cast<std::uint8_t>(raw & 0xFF);
  switch (kind) {
    case NextKind::Null:
      if (id == kNone) return null();
      break;
    case NextKind::ImpatienceMark:
      if (id == kNone) return impatience();
      break;
    case NextKind::Successor:
      return successor(id);
    case NextKind::PredecessorMark:
      return predecessor_mark(id);
  }
  throw std::invalid_argument("malformed next encoding");
}

std::string NextValue::to_string() const {
  switch (kind_) {
    case NextKind::Null: return "0";
    case NextKind::Successor: return "S(" + std::to_string(id_) + ")";
    case NextKind::PredecessorMark: return "P(" + std::to_string(id_) + ")";
    case NextKind::ImpatienceMark: return "M";
  }
  return "?";
}

const char* to_string(Field f) { return f == Field::Status ? "status" : "next"; }

const char* to_string(Actor a) {
  switch (a) {
    case Actor::Self: return "self";
    case Actor::Predecessor: return "predecessor";
    case Actor::Successor: return "successor";
  }
  return "?";
}

const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::BeginAcquisition: return "begin";
    case EdgeKind::Normal: return "normal";
    case EdgeKind::Timeout: return "timeout";
  }
  return "?";
}

std::string ActionLabel::to_string() const {
  std::string out = "t" + std::to_string(thread) + " node" + std::to_string(node) + "." + hmcst::to_string(field) + " ";
  if (field == Field::Status) {
    out += StatusValue::decode(old_value).to_string() + "->" + StatusValue::decode(new_value).to_string();
  } else {
    out += NextValue::decode(old_value).to_string() + "->" + NextValue::decode(new_value).to_string();
  }
  out += std::string(" [") + hmcst::to_string(actor) + "," + hmcst::to_string(kind) + "]";
  return out;
}

}  // namespace hmcst
