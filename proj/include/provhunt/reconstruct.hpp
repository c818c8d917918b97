#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "provhunt/graph_store.hpp"
#include "provhunt/types.hpp"

namespace provhunt {

/// One event from a node's rare paths, carrying its -log2 S score.
struct RareEvent {
  std::string subject;  // uuid
  std::string object;   // uuid
  std::string subject_name;
  std::string object_name;
  EventType type = EventType::Read;
  Timestamp t = 0;
  double score = 0.0;

  friend bool operator==(const RareEvent&, const RareEvent&) = default;
};

/// uuid -> distinct events on that node's rare paths.
using RareEventList = std::map<std::string, std::vector<RareEvent>>;

struct Cluster {
  std::vector<std::string> members;  // sorted uuids
  double score = 0.0;                // mean per-member sum of rare-event scores
  bool scored = false;               // singletons are never scored
};

/// Seed list for the keyword rule; operators extend it per environment.
std::vector<std::string> default_keywords();

/// Reads one keyword per line; blank lines and '#' comments are skipped.
std::vector<std::string> load_keywords(const std::string& path);

/// Groups malicious nodes. Two nodes are linked when both of their rare-event
/// lists touch a keyword (substring of either endpoint name), or when one
/// node is an endpoint of an event in the other's list. The result is a
/// partition; members and clusters are sorted by uuid.
std::vector<Cluster> cluster_nodes(std::span<const std::string> malicious,
                                   const RareEventList& rel,
                                   std::span<const std::string> keywords);

/// Scores every non-singleton cluster and returns the winner: highest score,
/// then more members, then smallest member uuid. Throws
/// Error(NoViableCluster) when every cluster is a singleton.
Cluster score_and_select(std::vector<Cluster>& clusters, const RareEventList& rel);

struct AttackGraph {
  std::vector<NodeId> nodes;  // sorted by uuid
  std::vector<EdgeId> edges;  // sorted by (t, id)
};

/// Attack nodes plus every entity on their rare events; edges are all graph
/// edges with both endpoints in that set.
AttackGraph build_attack_graph(std::span<const std::string> attack_nodes,
                               const RareEventList& rel, const ProvGraph& graph);

}  // namespace provhunt
