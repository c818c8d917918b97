#include "provhunt/event_ingest.hpp"

#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <json.hpp>

namespace provhunt {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void malformed(const std::string& why) {
  throw Error(ErrorCode::MalformedRecord, why);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::string canonical_endpoint(std::string_view ep) {
  ep = trim(ep);
  if (ep.empty()) return "*:*";
  std::string_view host = ep;
  std::string_view port;
  if (ep.front() == '[') {
    auto close = ep.find(']');
    if (close != std::string_view::npos) {
      host = ep.substr(0, close + 1);
      auto rest = ep.substr(close + 1);
      if (!rest.empty() && rest.front() == ':') port = rest.substr(1);
    }
  } else if (auto colon = ep.rfind(':');
             colon != std::string_view::npos && ep.find(':') == colon) {
    host = ep.substr(0, colon);
    port = ep.substr(colon + 1);
  }
  host = trim(host);
  port = trim(port);
  return fmt::format("{}:{}", host.empty() ? "*" : host, port.empty() ? "*" : port);
}

Entity parse_entity(const nlohmann::json& j, const char* which) {
  if (!j.is_object()) malformed(fmt::format("'{}' is not an object", which));
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "uuid" && it.key() != "kind" && it.key() != "name")
      malformed(fmt::format("unexpected field '{}.{}'", which, it.key()));
  }
  auto field = [&](const char* key) -> const std::string& {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
      malformed(fmt::format("'{}.{}' missing or not a string", which, key));
    return it->get_ref<const std::string&>();
  };
  Entity e;
  e.uuid = field("uuid");
  if (e.uuid.empty()) malformed(fmt::format("'{}.uuid' is empty", which));
  auto kind = parse_entity_kind(field("kind"));
  if (!kind) malformed(fmt::format("'{}.kind' unknown: {}", which, field("kind")));
  e.kind = *kind;
  const std::string& raw_name = field("name");
  e.name = e.kind == EntityKind::Socket ? canonical_socket_name(raw_name) : raw_name;
  if (e.name.empty()) malformed(fmt::format("'{}.name' is empty", which));
  return e;
}

}  // namespace

std::string canonical_socket_name(std::string_view text) {
  auto arrow = text.find("->");
  if (arrow == std::string_view::npos) return "*:*->" + canonical_endpoint(text);
  return canonical_endpoint(text.substr(0, arrow)) + "->" +
         canonical_endpoint(text.substr(arrow + 2));
}

ParseResult parse_event(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    malformed(fmt::format("invalid JSON: {}", e.what()));
  }
  if (!j.is_object()) malformed("record is not a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "type" && k != "subj" && k != "obj" && k != "t")
      malformed(fmt::format("unexpected field '{}'", k));
  }
  auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) malformed("'type' missing or not a string");
  const auto& type_text = type_it->get_ref<const std::string&>();
  auto type = parse_event_type(type_text);
  if (!type) return Skip{type_text};

  auto subj_it = j.find("subj");
  auto obj_it = j.find("obj");
  if (subj_it == j.end() || obj_it == j.end()) malformed("'subj' or 'obj' missing");
  auto t_it = j.find("t");
  if (t_it == j.end() || !t_it->is_number_integer()) malformed("'t' missing or not an integer");
  if (t_it->is_number_unsigned() &&
      t_it->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
    malformed("'t' out of range");

  RawEvent ev;
  ev.subject = parse_entity(*subj_it, "subj");
  ev.object = parse_entity(*obj_it, "obj");
  ev.type = *type;
  ev.t = t_it->get<std::int64_t>();
  if (!is_legal_edge(ev.subject.kind, ev.object.kind, ev.type)) {
    throw Error(ErrorCode::IllegalEdge,
                fmt::format("{} -{}-> {} is not a permitted dependency",
                            to_string(ev.subject.kind), to_string(ev.type),
                            to_string(ev.object.kind)));
  }
  return ev;
}

std::string serialize_event(const RawEvent& event) {
  auto entity = [](const Entity& e) {
    ordered_json j;
    j["uuid"] = e.uuid;
    j["kind"] = std::string(to_string(e.kind));
    j["name"] = e.name;
    return j;
  };
  ordered_json j;
  j["type"] = std::string(to_string(event.type));
  j["subj"] = entity(event.subject);
  j["obj"] = entity(event.object);
  j["t"] = event.t;
  return j.dump();
}

EventStream::EventStream(std::istream& in, StreamOptions options)
    : in_(in), options_(options) {}

void EventStream::check_entity(const Entity& entity) {
  auto [it, inserted] = seen_.try_emplace(entity.uuid, entity.kind, entity.name);
  if (!inserted && (it->second.first != entity.kind || it->second.second != entity.name)) {
    malformed(fmt::format("uuid '{}' redeclared as {} '{}' (was {} '{}')", entity.uuid,
                          to_string(entity.kind), entity.name, to_string(it->second.first),
                          it->second.second));
  }
}

void EventStream::consume_line(const std::string& line) {
  ++stats_.total;
  const std::size_t line_no = stats_.total;
  if (trim(line).empty()) {
    ++stats_.skipped;
    return;
  }
  try {
    auto parsed = parse_event(line);
    if (std::holds_alternative<Skip>(parsed)) {
      ++stats_.skipped;
      return;
    }
    auto& ev = std::get<RawEvent>(parsed);
    if (newest_ && ev.t < *newest_ && *newest_ - ev.t > options_.tolerance) {
      throw Error(ErrorCode::TimeRegression,
                  fmt::format("t={} is behind newest accepted t={} by more than {} ns", ev.t,
                              *newest_, options_.tolerance));
    }
    check_entity(ev.subject);
    check_entity(ev.object);
    newest_ = newest_ ? std::max(*newest_, ev.t) : ev.t;
    const Timestamp t = ev.t;
    buffer_.push(Pending{t, seq_++, std::move(ev)});
    ++stats_.accepted;
  } catch (const Error& e) {
    ++stats_.errored;
    if (options_.strict) {
      throw Error(e.code(), fmt::format("line {}: {}", line_no, e.what()));
    }
    stats_.issues.push_back({line_no, e.code(), e.what()});
  }
}

bool EventStream::releasable(const Pending& p) const {
  // Every future accepted event has t >= newest - tolerance.
  return eof_ || (newest_ && p.t < *newest_ - options_.tolerance);
}

std::optional<RawEvent> EventStream::next() {
  std::string line;
  while (buffer_.empty() || !releasable(buffer_.top())) {
    if (eof_) break;
    if (!std::getline(in_, line)) {
      eof_ = true;
      break;
    }
    consume_line(line);
  }
  if (buffer_.empty()) return std::nullopt;
  RawEvent out = buffer_.top().event;
  buffer_.pop();
  return out;
}

std::vector<RawEvent> read_events(std::istream& in, StreamOptions options, IngestStats* stats) {
  EventStream stream(in, options);
  std::vector<RawEvent> events;
  while (auto ev = stream.next()) events.push_back(std::move(*ev));
  if (stats) *stats = stream.stats();
  return events;
}

std::vector<RawEvent> read_event_file(const std::string& path, StreamOptions options,
                                      IngestStats* stats) {
  if (path == "-") return read_events(std::cin, options, stats);
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, fmt::format("cannot open '{}'", path));
  return read_events(in, options, stats);
}

}  // namespace provhunt
