#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "provhunt/types.hpp"

namespace provhunt {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

enum class Direction { Forward, Backward };

struct GraphEdge {
  NodeId src = 0;
  NodeId dst = 0;
  EventType type = EventType::Read;
  Timestamp t = 0;
  std::uint64_t count = 1;
};

/// In-memory provenance graph over reduced edges. Adjacency lists are kept
/// sorted by (t, insertion order). Not synchronized: build it, then share it
/// read-only.
class ProvGraph {
 public:
  /// Registers the entity, or returns the existing id for its uuid.
  NodeId add_node(const Entity& entity);
  EdgeId insert(const CompressedEdge& edge);

  std::optional<NodeId> find(std::string_view uuid) const;
  /// Throws Error(UnknownNode).
  NodeId id_of(std::string_view uuid) const;

  const Entity& node(NodeId id) const { return nodes_[id]; }
  const GraphEdge& edge(EdgeId id) const { return edges_[id]; }
  CompressedEdge compressed(EdgeId id) const;

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  std::span<const EdgeId> out_edges(NodeId id) const { return out_[id]; }
  std::span<const EdgeId> in_edges(NodeId id) const { return in_[id]; }

  /// Forward: out-edges with t >= t0, ascending. Backward: in-edges with
  /// t <= t0, descending.
  std::vector<EdgeId> neighbors_after(NodeId id, Timestamp t0, Direction dir) const;
  std::vector<EdgeId> neighbors_after(std::string_view uuid, Timestamp t0, Direction dir) const;

 private:
  void place(std::vector<EdgeId>& list, EdgeId id);

  std::vector<Entity> nodes_;
  std::vector<GraphEdge> edges_;
  std::vector<std::vector<EdgeId>> out_;
  std::vector<std::vector<EdgeId>> in_;
  std::unordered_map<std::string, NodeId> index_;
};

ProvGraph build_graph(std::span<const CompressedEdge> edges);

}  // namespace provhunt
