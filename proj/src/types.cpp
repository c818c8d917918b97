#include "provhunt/types.hpp"

#include <algorithm>
#include <cctype>

#include "provhunt/errors.hpp"

namespace provhunt {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::IllegalEdge: return "IllegalEdge";
    case ErrorCode::TimeRegression: return "TimeRegression";
    case ErrorCode::NotAFlowEvent: return "NotAFlowEvent";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::MalformedPath: return "MalformedPath";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::EmptyBenignKb: return "EmptyBenignKB";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::NoViableCluster: return "NoViableCluster";
    case ErrorCode::Config: return "ConfigError";
  }
  return "Unknown";
}

std::string_view to_string(EntityKind kind) noexcept {
  switch (kind) {
    case EntityKind::Process: return "Process";
    case EntityKind::File: return "File";
    case EntityKind::Socket: return "Socket";
  }
  return "?";
}

std::string_view to_string(EventType type) noexcept {
  switch (type) {
    case EventType::Write: return "write";
    case EventType::Execute: return "execute";
    case EventType::Fork: return "fork";
    case EventType::Send: return "send";
    case EventType::Read: return "read";
    case EventType::Mmap: return "mmap";
    case EventType::Receive: return "receive";
  }
  return "?";
}

std::optional<EntityKind> parse_entity_kind(std::string_view text) {
  for (auto kind : {EntityKind::Process, EntityKind::File, EntityKind::Socket}) {
    if (iequals(text, to_string(kind))) return kind;
  }
  return std::nullopt;
}

std::optional<EventType> parse_event_type(std::string_view text) {
  for (auto type : kAllEventTypes) {
    if (iequals(text, to_string(type))) return type;
  }
  return std::nullopt;
}

bool is_legal_edge(EntityKind subject, EntityKind object, EventType type) noexcept {
  using K = EntityKind;
  using E = EventType;
  switch (subject) {
    case K::Process:
      if (object == K::File) return type == E::Write || type == E::Execute;
      if (object == K::Process) return type == E::Fork;
      if (object == K::Socket) return type == E::Send;
      return false;
    case K::File:
      return object == K::Process && (type == E::Read || type == E::Mmap);
    case K::Socket:
      return object == K::Process && type == E::Receive;
  }
  return false;
}

}  // namespace provhunt
