#pragma once

#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "provhunt/cti_kb.hpp"
#include "provhunt/graph_store.hpp"
#include "provhunt/reconstruct.hpp"

namespace provhunt {

struct ExportAnnotations {
  std::map<std::string, Label> verdicts;  // uuid -> judged label
  std::set<std::string> attack_nodes;     // winning cluster members
};

/// Graphviz digraph: ellipse = process, box = file, diamond = socket.
/// Attack nodes are drawn red; context nodes black.
std::string to_dot(const AttackGraph& g, const ProvGraph& graph, const ExportAnnotations& notes);

/// {"nodes": [...], "edges": [<ingest schema + "c">], "provenance": {...}}
nlohmann::ordered_json to_json(const AttackGraph& g, const ProvGraph& graph,
                               const ExportAnnotations& notes);

}  // namespace provhunt
