#include "provhunt/graph_store.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "provhunt/errors.hpp"

namespace provhunt {

NodeId ProvGraph::add_node(const Entity& entity) {
  auto [it, inserted] = index_.try_emplace(entity.uuid, static_cast<NodeId>(nodes_.size()));
  if (inserted) {
    nodes_.push_back(entity);
    out_.emplace_back();
    in_.emplace_back();
  }
  return it->second;
}

void ProvGraph::place(std::vector<EdgeId>& list, EdgeId id) {
  const Timestamp t = edges_[id].t;
  auto pos = std::upper_bound(list.begin(), list.end(), t,
                              [this](Timestamp value, EdgeId e) { return value < edges_[e].t; });
  list.insert(pos, id);
}

EdgeId ProvGraph::insert(const CompressedEdge& edge) {
  const NodeId src = add_node(edge.subject);
  const NodeId dst = add_node(edge.object);
  const auto id = static_cast<EdgeId>(edges_.size());
  edges_.push_back(GraphEdge{src, dst, edge.type, edge.t, edge.count});
  place(out_[src], id);
  place(in_[dst], id);
  return id;
}

std::optional<NodeId> ProvGraph::find(std::string_view uuid) const {
  auto it = index_.find(std::string(uuid));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeId ProvGraph::id_of(std::string_view uuid) const {
  if (auto id = find(uuid)) return *id;
  throw Error(ErrorCode::UnknownNode, fmt::format("unknown node '{}'", uuid));
}

CompressedEdge ProvGraph::compressed(EdgeId id) const {
  const auto& e = edges_[id];
  return CompressedEdge{nodes_[e.src], nodes_[e.dst], e.type, e.t, e.count};
}

std::vector<EdgeId> ProvGraph::neighbors_after(NodeId id, Timestamp t0, Direction dir) const {
  if (id >= nodes_.size())
    throw Error(ErrorCode::UnknownNode, fmt::format("unknown node id {}", id));
  auto by_time = [this](Timestamp value, EdgeId e) { return value < edges_[e].t; };
  if (dir == Direction::Forward) {
    const auto& list = out_[id];
    auto first = std::lower_bound(list.begin(), list.end(), t0,
                                  [this](EdgeId e, Timestamp value) { return edges_[e].t < value; });
    return {first, list.end()};
  }
  const auto& list = in_[id];
  auto last = std::upper_bound(list.begin(), list.end(), t0, by_time);
  return {std::make_reverse_iterator(last), list.rend()};
}

std::vector<EdgeId> ProvGraph::neighbors_after(std::string_view uuid, Timestamp t0,
                                               Direction dir) const {
  return neighbors_after(id_of(uuid), t0, dir);
}

ProvGraph build_graph(std::span<const CompressedEdge> edges) {
  ProvGraph g;
  for (const auto& e : edges) g.insert(e);
  return g;
}

}  // namespace provhunt
