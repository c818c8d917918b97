#include "provhunt/anomaly.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "provhunt/errors.hpp"

namespace provhunt {

namespace {

enum class Goal { Rarest, Commonest };

/// Rarity compared at 1e-9 bits so that sums taken in different orders rank
/// identically.
std::int64_t rank_key(double r) { return std::llround(r * 1e9); }

double ratio_or_eps(std::uint64_t num, std::uint64_t den, double eps) {
  if (num == 0 || den == 0) return eps;
  return static_cast<double>(num) / static_cast<double>(den);
}

struct Half {
  std::vector<EdgeId> edges;  // away from the anchor
  double surprisal = 0.0;
};

NodeId far_end(const GraphEdge& e, Direction dir) {
  return dir == Direction::Backward ? e.src : e.dst;
}

bool better(std::int64_t a, std::int64_t b, Goal goal) {
  return goal == Goal::Rarest ? a > b : a < b;
}

std::vector<Half> search_half(const ProvGraph& graph, const EdgeScorer& scorer, NodeId anchor,
                              Direction dir, int k1, int width, Goal goal) {
  struct State {
    std::vector<EdgeId> edges;
    double surprisal;
    NodeId at;
    Timestamp bound;
  };
  struct Candidate {
    std::size_t parent;
    EdgeId edge;
    double surprisal;
    std::int64_t key;
  };

  std::vector<State> frontier;
  frontier.push_back({{},
                      0.0,
                      anchor,
                      dir == Direction::Backward ? std::numeric_limits<Timestamp>::max()
                                                 : std::numeric_limits<Timestamp>::min()});
  std::vector<Half> done;
  std::vector<Candidate> cands;

  for (int depth = 0; depth < k1 && !frontier.empty(); ++depth) {
    cands.clear();
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      const auto& st = frontier[i];
      bool extended = false;
      for (EdgeId e : graph.neighbors_after(st.at, st.bound, dir)) {
        if (std::find(st.edges.begin(), st.edges.end(), e) != st.edges.end()) continue;
        const double s = st.surprisal + scorer.surprisal(e);
        cands.push_back({i, e, s, rank_key(s)});
        extended = true;
      }
      if (!extended) done.push_back({st.edges, st.surprisal});
    }
    auto order = [goal](const Candidate& a, const Candidate& b) {
      if (a.key != b.key) return better(a.key, b.key, goal);
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.edge < b.edge;
    };
    if (cands.size() > static_cast<std::size_t>(width)) {
      std::nth_element(cands.begin(), cands.begin() + width, cands.end(), order);
      cands.resize(static_cast<std::size_t>(width));
    }
    std::sort(cands.begin(), cands.end(), order);

    std::vector<State> next;
    next.reserve(cands.size());
    for (const auto& c : cands) {
      const auto& parent = frontier[c.parent];
      State st{parent.edges, c.surprisal, far_end(graph.edge(c.edge), dir), graph.edge(c.edge).t};
      st.edges.push_back(c.edge);
      next.push_back(std::move(st));
    }
    frontier = std::move(next);
  }
  for (auto& st : frontier) done.push_back({std::move(st.edges), st.surprisal});

  // Keep the best `width` complete halves.
  std::sort(done.begin(), done.end(), [goal](const Half& a, const Half& b) {
    const auto ka = rank_key(a.surprisal), kb = rank_key(b.surprisal);
    if (ka != kb) return better(ka, kb, goal);
    return a.edges < b.edges;
  });
  if (done.size() > static_cast<std::size_t>(width)) done.resize(static_cast<std::size_t>(width));
  return done;
}

RarePath assemble(const EdgeScorer& scorer, NodeId anchor, const Half& back, const Half& fwd) {
  RarePath p;
  p.anchor = anchor;
  p.backward_len = back.edges.size();
  p.events.reserve(back.edges.size() + fwd.edges.size());
  for (auto it = back.edges.rbegin(); it != back.edges.rend(); ++it)
    p.events.push_back({*it, scorer.score(*it)});
  for (EdgeId e : fwd.edges) p.events.push_back({e, scorer.score(e)});
  for (const auto& ev : p.events) p.rarity += scorer.surprisal(ev.edge);
  return p;
}

std::vector<RarePath> search_paths(const ProvGraph& graph, const EdgeScorer& scorer,
                                   NodeId anchor, int k1, int k2, int width, Goal goal) {
  if (anchor >= graph.node_count())
    throw Error(ErrorCode::UnknownNode, fmt::format("unknown node id {}", anchor));
  if (k1 < 1 || k2 < 1 || width < 1)
    throw Error(ErrorCode::Config, "k1, k2 and beam width must be >= 1");

  const auto back = search_half(graph, scorer, anchor, Direction::Backward, k1, width, goal);
  const auto fwd = search_half(graph, scorer, anchor, Direction::Forward, k1, width, goal);

  struct Ranked {
    RarePath path;
    std::int64_t key;
    Timestamp first;
    std::vector<NodeId> nodes;
  };
  std::vector<Ranked> all;
  all.reserve(back.size() * fwd.size());
  for (const auto& b : back) {
    for (const auto& f : fwd) {
      Ranked r{assemble(scorer, anchor, b, f), 0, 0, {}};
      r.key = rank_key(r.path.rarity);
      r.first = r.path.events.empty() ? std::numeric_limits<Timestamp>::max()
                                      : graph.edge(r.path.events.front().edge).t;
      r.nodes = path_nodes(graph, r.path);
      all.push_back(std::move(r));
    }
  }
  auto order = [&graph, goal](const Ranked& a, const Ranked& b) {
    if (a.key != b.key) return better(a.key, b.key, goal);
    if (a.first != b.first) return a.first < b.first;
    const bool uuid_less = std::lexicographical_compare(
        a.nodes.begin(), a.nodes.end(), b.nodes.begin(), b.nodes.end(),
        [&graph](NodeId x, NodeId y) { return graph.node(x).uuid < graph.node(y).uuid; });
    if (uuid_less) return true;
    const bool uuid_greater = std::lexicographical_compare(
        b.nodes.begin(), b.nodes.end(), a.nodes.begin(), a.nodes.end(),
        [&graph](NodeId x, NodeId y) { return graph.node(x).uuid < graph.node(y).uuid; });
    if (uuid_greater) return false;
    return std::lexicographical_compare(
        a.path.events.begin(), a.path.events.end(), b.path.events.begin(), b.path.events.end(),
        [](const ScoredEvent& x, const ScoredEvent& y) { return x.edge < y.edge; });
  };
  const std::size_t n = std::min(all.size(), static_cast<std::size_t>(k2));
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), order);

  std::vector<RarePath> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::move(all[i].path));
  return out;
}

std::string sentence_word(std::string_view name) {
  std::string w(name);
  for (char& c : w)
    if (std::isspace(static_cast<unsigned char>(c))) c = '_';
  return w;
}

}  // namespace

double smoothing_epsilon(const BehaviorStats& stats) noexcept {
  return 1.0 / (1.0 + static_cast<double>(stats.grand_out));
}

double freq_ratio(const BehaviorStats& stats, const std::string& src, const std::string& dst,
                  EventType type) {
  return ratio_or_eps(stats.freq(src, dst, type), stats.out_of(src), smoothing_epsilon(stats));
}

DegreeRatios degree_ratios(const BehaviorStats& stats, std::string_view src,
                           std::string_view dst) {
  const double eps = smoothing_epsilon(stats);
  return {ratio_or_eps(stats.out_of(src), stats.grand_out, eps),
          ratio_or_eps(stats.in_of(dst), stats.grand_in, eps)};
}

double event_score(const BehaviorStats& stats, const std::string& src, const std::string& dst,
                   EventType type) {
  const auto d = degree_ratios(stats, src, dst);
  return d.out * freq_ratio(stats, src, dst, type) * d.in;
}

double rarity(std::span<const double> scores) {
  double r = 0.0;
  for (double s : scores) r -= std::log2(s);
  return r;
}

EdgeScorer::EdgeScorer(const ProvGraph& graph, const BehaviorStats& stats) {
  score_.reserve(graph.edge_count());
  surprisal_.reserve(graph.edge_count());
  for (EdgeId e = 0; e < graph.edge_count(); ++e) {
    const auto& edge = graph.edge(e);
    const double s = event_score(stats, graph.node(edge.src).name, graph.node(edge.dst).name,
                                 edge.type);
    score_.push_back(s);
    surprisal_.push_back(-std::log2(s));
  }
}

std::vector<SuspicionResult> select_suspicious(const ProvGraph& graph, const Embedder& embedder,
                                               const std::set<std::string>& benign_names,
                                               double tau) {
  if (benign_names.empty())
    throw Error(ErrorCode::EmptyBenignKb, "benign knowledge base has no names");
  std::vector<Vector> benign;
  benign.reserve(benign_names.size());
  for (const auto& n : benign_names) benign.push_back(embedder.embed(n));

  std::unordered_map<std::string, double> best_by_name;
  std::vector<SuspicionResult> out;
  out.reserve(graph.node_count());
  for (NodeId id = 0; id < graph.node_count(); ++id) {
    const auto& entity = graph.node(id);
    auto it = best_by_name.find(entity.name);
    if (it == best_by_name.end()) {
      double best = -1.0;
      if (benign_names.contains(entity.name)) {
        best = 1.0;
      } else {
        const Vector v = embedder.embed(entity.name);
        for (const auto& b : benign) best = std::max(best, cosine(v, b));
      }
      it = best_by_name.emplace(entity.name, best).first;
    }
    out.push_back({entity.uuid, it->second, it->second < tau});
  }
  return out;
}

std::vector<RarePath> rare_paths(const ProvGraph& graph, const EdgeScorer& scorer, NodeId anchor,
                                 const PathSearchOptions& options) {
  return search_paths(graph, scorer, anchor, options.k1, options.k2, options.beam_width,
                      Goal::Rarest);
}

RarePath common_path(const ProvGraph& graph, const EdgeScorer& scorer, NodeId node, int k1,
                     int beam_width) {
  auto paths = search_paths(graph, scorer, node, k1, 1, beam_width, Goal::Commonest);
  return std::move(paths.front());
}

std::vector<NodeId> path_nodes(const ProvGraph& graph, const RarePath& path) {
  std::vector<NodeId> nodes;
  nodes.reserve(path.events.size() + 1);
  if (path.backward_len > 0) {
    nodes.push_back(graph.edge(path.events.front().edge).src);
  } else {
    nodes.push_back(path.anchor);
  }
  for (const auto& ev : path.events) nodes.push_back(graph.edge(ev.edge).dst);
  return nodes;
}

std::string path_sentence(const ProvGraph& graph, const RarePath& path) {
  const auto nodes = path_nodes(graph, path);
  std::string out = sentence_word(graph.node(nodes.front()).name);
  for (std::size_t i = 0; i < path.events.size(); ++i) {
    out += ' ';
    out += to_string(graph.edge(path.events[i].edge).type);
    out += ' ';
    out += sentence_word(graph.node(nodes[i + 1]).name);
  }
  return out;
}

std::vector<ContextPath> benign_context_paths(const std::set<NodeId>& nodes,
                                              const ProvGraph& graph, const EdgeScorer& scorer,
                                              int k1, int beam_width) {
  std::map<std::string, NodeId> by_uuid;
  for (NodeId n : nodes) by_uuid.emplace(graph.node(n).uuid, n);
  std::vector<ContextPath> out;
  out.reserve(by_uuid.size());
  for (const auto& [uuid, id] : by_uuid) {
    const auto p = common_path(graph, scorer, id, k1, beam_width);
    out.push_back({uuid, path_sentence(graph, p), p.rarity});
  }
  return out;
}

}  // namespace provhunt
