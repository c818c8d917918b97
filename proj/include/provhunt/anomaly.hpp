#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "provhunt/benign_kb.hpp"
#include "provhunt/embedder.hpp"
#include "provhunt/graph_store.hpp"

namespace provhunt {

// ---------------------------------------------------------------------------
// Frequency scoring against benign statistics.
//
//   F(e)     = TotalFreq(s, d, type) / OUT(s)
//   D_out(s) = OUT(s) / sum OUT,   D_in(d) = IN(d) / sum IN
//   S(e)     = D_out(s) * F(e) * D_in(d)
//   R(path)  = -log2 prod S(e)
//
// Any ratio whose numerator or denominator is zero is replaced by
// epsilon = 1 / (1 + grand_out), which keeps S in (0, 1] and makes unseen
// behaviour strictly rarer than anything observed.
// ---------------------------------------------------------------------------

double smoothing_epsilon(const BehaviorStats& stats) noexcept;

double freq_ratio(const BehaviorStats& stats, const std::string& src, const std::string& dst,
                  EventType type);

struct DegreeRatios {
  double out = 0.0;
  double in = 0.0;
};

DegreeRatios degree_ratios(const BehaviorStats& stats, std::string_view src,
                           std::string_view dst);

double event_score(const BehaviorStats& stats, const std::string& src, const std::string& dst,
                   EventType type);

/// -log2 of the product of `scores`; 0 for an empty path.
double rarity(std::span<const double> scores);

/// Per-edge S and -log2 S for a frozen graph, computed once up front.
class EdgeScorer {
 public:
  EdgeScorer(const ProvGraph& graph, const BehaviorStats& stats);

  double score(EdgeId e) const { return score_[e]; }
  double surprisal(EdgeId e) const { return surprisal_[e]; }

 private:
  std::vector<double> score_;
  std::vector<double> surprisal_;
};

// ---------------------------------------------------------------------------
// Suspicious node selection.
// ---------------------------------------------------------------------------

struct SuspicionResult {
  std::string node;  // uuid
  double max_benign_similarity = -1.0;
  bool suspicious = false;
};

inline constexpr double kDefaultTau = 0.9;

/// One result per graph node, in node-id order. A node is suspicious when the
/// best cosine between its name embedding and any benign name is below tau.
/// Throws Error(EmptyBenignKb) if `benign_names` is empty.
std::vector<SuspicionResult> select_suspicious(const ProvGraph& graph, const Embedder& embedder,
                                               const std::set<std::string>& benign_names,
                                               double tau = kDefaultTau);

// ---------------------------------------------------------------------------
// Rare path search.
// ---------------------------------------------------------------------------

struct ScoredEvent {
  EdgeId edge = 0;
  double s = 1.0;
};

/// Events in walk order: the backward half (reversed, so it ends at the
/// anchor) followed by the forward half.
struct RarePath {
  NodeId anchor = 0;
  std::vector<ScoredEvent> events;
  std::size_t backward_len = 0;
  double rarity = 0.0;
};

struct PathSearchOptions {
  int k1 = 10;          // hops per direction
  int k2 = 10;          // paths kept per anchor
  int beam_width = 64;  // partial chains kept per depth and direction
};

/// The k2 highest-rarity paths through `anchor`. Each half walks up to k1
/// hops: backward over in-edges with non-increasing t, forward over
/// out-edges with non-decreasing t; a half stops early only when it cannot
/// be extended and never reuses an edge. Ordering: rarity (1e-9 resolution)
/// descending, then earliest first-event time, then the node uuid sequence,
/// then edge ids.
std::vector<RarePath> rare_paths(const ProvGraph& graph, const EdgeScorer& scorer, NodeId anchor,
                                 const PathSearchOptions& options = {});

/// The single lowest-rarity path through `node` under the same walk rules.
RarePath common_path(const ProvGraph& graph, const EdgeScorer& scorer, NodeId node, int k1,
                     int beam_width = PathSearchOptions{}.beam_width);

/// "name type name type ... name"; whitespace inside names becomes '_'.
std::string path_sentence(const ProvGraph& graph, const RarePath& path);

/// Node uuids along the walk, anchor included.
std::vector<NodeId> path_nodes(const ProvGraph& graph, const RarePath& path);

struct ContextPath {
  std::string node;  // uuid
  std::string sentence;
  double rarity = 0.0;
};

/// For each node in `nodes` (sorted by uuid), its lowest-rarity path rendered
/// as a sentence. These become the benign entries of the retrieval corpus.
std::vector<ContextPath> benign_context_paths(const std::set<NodeId>& nodes,
                                              const ProvGraph& graph, const EdgeScorer& scorer,
                                              int k1, int beam_width = PathSearchOptions{}.beam_width);

}  // namespace provhunt
