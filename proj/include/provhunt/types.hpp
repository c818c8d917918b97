#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace provhunt {

/// Nanoseconds since epoch.
using Timestamp = std::int64_t;

enum class EntityKind : std::uint8_t { Process, File, Socket };

enum class EventType : std::uint8_t {
  Write,
  Execute,
  Fork,
  Send,
  Read,
  Mmap,
  Receive,
};

inline constexpr EventType kAllEventTypes[] = {
    EventType::Write, EventType::Execute, EventType::Fork, EventType::Send,
    EventType::Read,  EventType::Mmap,    EventType::Receive};

std::string_view to_string(EntityKind kind) noexcept;
std::string_view to_string(EventType type) noexcept;

/// Case-insensitive; nullopt for anything outside the three kinds.
std::optional<EntityKind> parse_entity_kind(std::string_view text);
/// Case-insensitive; nullopt for types we do not track.
std::optional<EventType> parse_event_type(std::string_view text);

/// Write, Read, Mmap, Send and Receive carry data; Fork and Execute are
/// control flow.
constexpr bool is_flow(EventType type) noexcept {
  return type != EventType::Fork && type != EventType::Execute;
}

/// True iff (subject kind, object kind, type) is one of the permitted
/// audit dependencies.
bool is_legal_edge(EntityKind subject, EntityKind object, EventType type) noexcept;

struct Entity {
  std::string uuid;
  EntityKind kind = EntityKind::Process;
  std::string name;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct RawEvent {
  Entity subject;
  Entity object;
  EventType type = EventType::Read;
  Timestamp t = 0;

  friend bool operator==(const RawEvent&, const RawEvent&) = default;
};

/// A retained event standing for `count` semantically equivalent raw events.
struct CompressedEdge {
  Entity subject;
  Entity object;
  EventType type = EventType::Read;
  Timestamp t = 0;  // first occurrence
  std::uint64_t count = 1;

  friend bool operator==(const CompressedEdge&, const CompressedEdge&) = default;
};

}  // namespace provhunt
