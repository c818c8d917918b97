#include "provhunt/reconstruct.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "provhunt/errors.hpp"
#include "provhunt/union_find.hpp"

namespace provhunt {

namespace {

const std::vector<RareEvent>& events_of(const RareEventList& rel, const std::string& uuid) {
  static const std::vector<RareEvent> kNone;
  auto it = rel.find(uuid);
  return it == rel.end() ? kNone : it->second;
}

bool touches_keyword(const std::vector<RareEvent>& events, std::span<const std::string> keywords) {
  for (const auto& e : events) {
    for (const auto& k : keywords) {
      if (k.empty()) continue;
      if (e.subject_name.find(k) != std::string::npos ||
          e.object_name.find(k) != std::string::npos)
        return true;
    }
  }
  return false;
}

bool mentions(const std::vector<RareEvent>& events, const std::string& uuid) {
  return std::any_of(events.begin(), events.end(),
                     [&](const RareEvent& e) { return e.subject == uuid || e.object == uuid; });
}

}  // namespace

std::vector<std::string> default_keywords() {
  return {"/etc/passwd", "hostname",  "/etc/shadow", "/etc/sudoers",
          "authorized_keys", "/etc/crontab", "/root/.ssh", "/etc/group"};
}

std::vector<std::string> load_keywords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, fmt::format("cannot open keyword file '{}'", path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    auto last = line.find_last_not_of(" \t");
    out.push_back(line.substr(first, last - first + 1));
  }
  return out;
}

std::vector<Cluster> cluster_nodes(std::span<const std::string> malicious,
                                   const RareEventList& rel,
                                   std::span<const std::string> keywords) {
  const std::set<std::string> unique(malicious.begin(), malicious.end());
  const std::vector<std::string> nodes(unique.begin(), unique.end());
  UnionFind uf(nodes.size());

  std::vector<bool> keyworded(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    keyworded[i] = touches_keyword(events_of(rel, nodes[i]), keywords);

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& rel_i = events_of(rel, nodes[i]);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (i == j) continue;
      if ((keyworded[i] && keyworded[j]) || mentions(rel_i, nodes[j])) uf.unite(i, j);
    }
  }

  std::map<std::size_t, Cluster> by_root;
  for (std::size_t i = 0; i < nodes.size(); ++i) by_root[uf.find(i)].members.push_back(nodes[i]);
  std::vector<Cluster> clusters;
  clusters.reserve(by_root.size());
  for (auto& [_, c] : by_root) clusters.push_back(std::move(c));
  std::sort(clusters.begin(), clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.members.front() < b.members.front(); });
  return clusters;
}

Cluster score_and_select(std::vector<Cluster>& clusters, const RareEventList& rel) {
  const Cluster* best = nullptr;
  for (auto& c : clusters) {
    if (c.members.size() <= 1) {
      c.scored = false;
      continue;
    }
    double p_score = 0.0;
    for (const auto& v : c.members)
      for (const auto& e : events_of(rel, v)) p_score += e.score;
    c.score = p_score / static_cast<double>(c.members.size());
    c.scored = true;
    if (!best || c.score > best->score ||
        (c.score == best->score &&
         (c.members.size() > best->members.size() ||
          (c.members.size() == best->members.size() && c.members.front() < best->members.front()))))
      best = &c;
  }
  if (!best) throw Error(ErrorCode::NoViableCluster, "no attack reconstructed: every cluster is a singleton");
  return *best;
}

AttackGraph build_attack_graph(std::span<const std::string> attack_nodes,
                               const RareEventList& rel, const ProvGraph& graph) {
  std::set<NodeId> members;
  auto add = [&](const std::string& uuid) {
    if (auto id = graph.find(uuid)) members.insert(*id);
  };
  for (const auto& v : attack_nodes) {
    add(v);
    for (const auto& e : events_of(rel, v)) {
      add(e.subject);
      add(e.object);
    }
  }

  AttackGraph g;
  g.nodes.assign(members.begin(), members.end());
  std::sort(g.nodes.begin(), g.nodes.end(),
            [&](NodeId a, NodeId b) { return graph.node(a).uuid < graph.node(b).uuid; });
  for (EdgeId e = 0; e < graph.edge_count(); ++e) {
    const auto& edge = graph.edge(e);
    if (members.contains(edge.src) && members.contains(edge.dst)) g.edges.push_back(e);
  }
  std::stable_sort(g.edges.begin(), g.edges.end(),
                   [&](EdgeId a, EdgeId b) { return graph.edge(a).t < graph.edge(b).t; });
  return g;
}

}  // namespace provhunt
