#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "provhunt/types.hpp"

namespace provhunt {

/// The entity whose semantic version gates merging of a flow event: the data
/// origin, which is always the subject in the permitted dependency table
/// (File for Read/Mmap, Process for Write/Send, Socket for Receive).
/// Throws Error(NotAFlowEvent) for Fork and Execute.
const Entity& which_source(const RawEvent& event);

/// Streaming lossless reducer. Feed timestamp-ordered events; a flow event is
/// folded into the last retained edge of the same (subject, object, type)
/// when the source's semantic version has not moved since that edge was
/// retained. Every retained event bumps its object's version; folded events
/// carry no new information and bump nothing.
class Reducer {
 public:
  void push(const RawEvent& event);

  const std::vector<CompressedEdge>& edges() const noexcept { return edges_; }
  std::vector<CompressedEdge> take() && { return std::move(edges_); }

  /// 0 for entities never targeted by a retained event.
  std::uint64_t version(const std::string& uuid) const;

 private:
  struct TripleKey {
    std::string subject;
    std::string object;
    EventType type;
    bool operator==(const TripleKey&) const = default;
  };
  struct TripleHash {
    std::size_t operator()(const TripleKey& k) const noexcept;
  };
  struct OpenEdge {
    std::size_t index;
    std::uint64_t source_version;
  };

  std::vector<CompressedEdge> edges_;
  std::unordered_map<std::string, std::uint64_t> versions_;
  std::unordered_map<TripleKey, OpenEdge, TripleHash> open_;
};

std::vector<CompressedEdge> reduce(std::span<const RawEvent> events);

/// Wire schema of the ingest records plus "c"; one object per line.
std::string serialize_edge(const CompressedEdge& edge);
/// Throws Error(MalformedRecord).
CompressedEdge parse_edge(std::string_view line);

void write_edges(const std::string& path, std::span<const CompressedEdge> edges);
std::vector<CompressedEdge> read_edges(const std::string& path);

}  // namespace provhunt
