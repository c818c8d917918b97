#include "provhunt/reducer.hpp"

#include <fmt/format.h>

#include <fstream>
#include <functional>
#include <json.hpp>

#include "provhunt/errors.hpp"
#include "provhunt/event_ingest.hpp"

namespace provhunt {

const Entity& which_source(const RawEvent& event) {
  if (!is_flow(event.type)) {
    throw Error(ErrorCode::NotAFlowEvent,
                fmt::format("{} is a control event", to_string(event.type)));
  }
  return event.subject;
}

std::size_t Reducer::TripleHash::operator()(const TripleKey& k) const noexcept {
  std::size_t h = std::hash<std::string>{}(k.subject);
  h ^= std::hash<std::string>{}(k.object) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= static_cast<std::size_t>(k.type) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::uint64_t Reducer::version(const std::string& uuid) const {
  auto it = versions_.find(uuid);
  return it == versions_.end() ? 0 : it->second;
}

void Reducer::push(const RawEvent& event) {
  if (is_flow(event.type)) {
    const std::uint64_t source_version = version(which_source(event).uuid);
    TripleKey key{event.subject.uuid, event.object.uuid, event.type};
    auto it = open_.find(key);
    if (it != open_.end() && it->second.source_version == source_version) {
      ++edges_[it->second.index].count;
      return;
    }
    open_.insert_or_assign(std::move(key), OpenEdge{edges_.size(), source_version});
  }
  edges_.push_back(CompressedEdge{event.subject, event.object, event.type, event.t, 1});
  ++versions_[event.object.uuid];
}

std::vector<CompressedEdge> reduce(std::span<const RawEvent> events) {
  Reducer reducer;
  for (const auto& ev : events) reducer.push(ev);
  return std::move(reducer).take();
}

std::string serialize_edge(const CompressedEdge& edge) {
  // Reuse the event encoder so the two schemas cannot drift apart.
  auto j = nlohmann::ordered_json::parse(
      serialize_event(RawEvent{edge.subject, edge.object, edge.type, edge.t}));
  j["c"] = edge.count;
  return j.dump();
}

CompressedEdge parse_edge(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedRecord, fmt::format("invalid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw Error(ErrorCode::MalformedRecord, "edge is not a JSON object");
  auto c = j.find("c");
  if (c == j.end() || !c->is_number_unsigned() || c->get<std::uint64_t>() == 0)
    throw Error(ErrorCode::MalformedRecord, "'c' missing or not a positive integer");
  const std::uint64_t count = c->get<std::uint64_t>();
  j.erase("c");
  auto parsed = parse_event(j.dump());
  if (!std::holds_alternative<RawEvent>(parsed))
    throw Error(ErrorCode::MalformedRecord, "edge has an untracked event type");
  auto& ev = std::get<RawEvent>(parsed);
  return CompressedEdge{std::move(ev.subject), std::move(ev.object), ev.type, ev.t, count};
}

void write_edges(const std::string& path, std::span<const CompressedEdge> edges) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, fmt::format("cannot write '{}'", path));
  for (const auto& e : edges) out << serialize_edge(e) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, fmt::format("write failed: '{}'", path));
}

std::vector<CompressedEdge> read_edges(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, fmt::format("cannot open '{}'", path));
  std::vector<CompressedEdge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      edges.push_back(parse_edge(line));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}:{}: {}", path, line_no, e.what()));
    }
  }
  return edges;
}

}  // namespace provhunt
