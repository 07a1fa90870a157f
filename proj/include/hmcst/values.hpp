#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace hmcst {

using NodeId = std::uint8_t;
using ThreadId = std::uint8_t;
using LockId = std::uint8_t;

inline constexpr std::uint8_t kNone = 0xFF;

enum class StatusKind : std::uint8_t {
  Recycled,
  Wait,
  Abandoned,
  UnlockedRoot,
  Cohort,        // count 1 = cohort start, count >= 2 = pass-all value
  ParentPrefix,  // only the local lock is passed; acquire the parent
};

// Value held in a queue node's status cell.
class StatusValue {
 public:
  constexpr StatusValue() = default;

  static constexpr StatusValue recycled() { return {StatusKind::Recycled, 0}; }
  static constexpr StatusValue wait() { return {StatusKind::Wait, 0}; }
  static constexpr StatusValue abandoned() { return {StatusKind::Abandoned, 0}; }
  static constexpr StatusValue unlocked_root() { return {StatusKind::UnlockedRoot, 0}; }
  static constexpr StatusValue parent_prefix() { return {StatusKind::ParentPrefix, 0}; }
  static StatusValue cohort(unsigned count);

  constexpr StatusKind kind() const { return kind_; }
  constexpr unsigned count() const { return count_; }
  constexpr bool is(StatusKind k) const { return kind_ == k; }

  // A legal lock-passing value that grants every lock up to the root.
  constexpr bool is_pass_all() const { return kind_ == StatusKind::Cohort && count_ >= 2; }
  constexpr bool is_cohort_start() const { return kind_ == StatusKind::Cohort && count_ == 1; }

  std::uint16_t encode() const { return static_cast<std::uint16_t>((static_cast<unsigned>(kind_) << 8) | count_); }
  static StatusValue decode(std::uint16_t raw);

  std::string to_string() const;

  friend constexpr bool operator==(StatusValue a, StatusValue b) = default;

 private:
  constexpr StatusValue(StatusKind k, std::uint8_t c) : kind_(k), count_(c) {}
  StatusKind kind_ = StatusKind::Recycled;
  std::uint8_t count_ = 0;
};

enum class NextKind : std::uint8_t { Null, Successor, PredecessorMark, ImpatienceMark };

// Value held in a queue node's next cell.
class NextValue {
 public:
  constexpr NextValue() = default;

  static constexpr NextValue null() { return {NextKind::Null, kNone}; }
  static constexpr NextValue impatience() { return {NextKind::ImpatienceMark, kNone}; }
  static NextValue successor(NodeId id);
  static NextValue predecessor_mark(NodeId id);

  constexpr NextKind kind() const { return kind_; }
  constexpr bool is(NextKind k) const { return kind_ == k; }
  // Node id carried by Successor / PredecessorMark.
  std::optional<NodeId> node() const;

  std::uint16_t encode() const { return static_cast<std::uint16_t>((static_cast<unsigned>(kind_) << 8) | id_); }
  static NextValue decode(std::uint16_t raw);

  std::string to_string() const;

  friend constexpr bool operator==(NextValue a, NextValue b) = default;

 private:
  constexpr NextValue(NextKind k, std::uint8_t id) : kind_(k), id_(id) {}
  NextKind kind_ = NextKind::Null;
  std::uint8_t id_ = kNone;
};

enum class Field : std::uint8_t { Status, Next };

enum class Actor : std::uint8_t { Self, Predecessor, Successor };

enum class EdgeKind : std::uint8_t { BeginAcquisition, Normal, Timeout };

const char* to_string(Field f);
const char* to_string(Actor a);
const char* to_string(EdgeKind k);

// One observable access to a status or next cell, as emitted by the step
// function. old == new marks a value-preserving context move.
struct ActionLabel {
  ThreadId thread = 0;
  NodeId node = 0;
  Field field = Field::Status;
  std::uint16_t old_value = 0;
  std::uint16_t new_value = 0;
  Actor actor = Actor::Self;
  EdgeKind kind = EdgeKind::Normal;

  std::string to_string() const;
  friend bool operator==(const ActionLabel&, const ActionLabel&) = default;
};

}  // namespace hmcst
