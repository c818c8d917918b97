#include "provhunt/export.hpp"

#include <fmt/format.h>

#include "provhunt/reducer.hpp"

namespace provhunt {

namespace {

std::string dot_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string_view shape_of(EntityKind kind) {
  switch (kind) {
    case EntityKind::Process: return "ellipse";
    case EntityKind::File: return "box";
    case EntityKind::Socket: return "diamond";
  }
  return "ellipse";
}

}  // namespace

std::string to_dot(const AttackGraph& g, const ProvGraph& graph, const ExportAnnotations& notes) {
  std::string out = "digraph attack {\n  rankdir=LR;\n  node [fontname=\"Helvetica\"];\n";
  for (NodeId n : g.nodes) {
    const auto& e = graph.node(n);
    const bool attack = notes.attack_nodes.contains(e.uuid);
    out += fmt::format("  \"{}\" [label=\"{}\", shape={}{}];\n", dot_escape(e.uuid),
                       dot_escape(e.name), shape_of(e.kind),
                       attack ? ", color=red, fontcolor=red" : "");
  }
  for (EdgeId id : g.edges) {
    const auto& e = graph.edge(id);
    const std::string label = e.count > 1 ? fmt::format("{} x{}", to_string(e.type), e.count)
                                          : std::string(to_string(e.type));
    out += fmt::format("  \"{}\" -> \"{}\" [label=\"{}\"];\n", dot_escape(graph.node(e.src).uuid),
                       dot_escape(graph.node(e.dst).uuid), label);
  }
  out += "}\n";
  return out;
}

nlohmann::ordered_json to_json(const AttackGraph& g, const ProvGraph& graph,
                               const ExportAnnotations& notes) {
  nlohmann::ordered_json j;
  auto nodes = nlohmann::ordered_json::array();
  for (NodeId n : g.nodes) {
    const auto& e = graph.node(n);
    nlohmann::ordered_json row;
    row["uuid"] = e.uuid;
    row["kind"] = std::string(to_string(e.kind));
    row["name"] = e.name;
    row["role"] = notes.attack_nodes.contains(e.uuid) ? "attack" : "context";
    if (auto it = notes.verdicts.find(e.uuid); it != notes.verdicts.end()) {
      row["verdict"] = std::string(to_string(it->second));
    } else {
      row["verdict"] = nullptr;
    }
    nodes.push_back(std::move(row));
  }
  auto edges = nlohmann::ordered_json::array();
  for (EdgeId id : g.edges) edges.push_back(nlohmann::ordered_json::parse(serialize_edge(graph.compressed(id))));
  j["nodes"] = std::move(nodes);
  j["edges"] = std::move(edges);
  j["provenance"] = {{"nodes", graph.node_count()}, {"edges", graph.edge_count()}};
  return j;
}

}  // namespace provhunt
